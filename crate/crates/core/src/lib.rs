//! Spectral bandits for reward functions that are smooth over a known graph.
//!
//! Arms are the nodes of a weighted graph. Feature vectors are rows of the
//! Laplacian eigenvector matrix, and the policies regularize towards the
//! smooth (low-eigenvalue) directions through `Λ = Λ_L + λI`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the experiment harness uses.

// `!(x > 0)` is used on purpose throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod env;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod policy;
pub mod ratings;
pub mod scalar;
pub mod spectral;

pub use env::{make_smooth_alpha, normalize_alpha, BanditInstance, RegretTrace};
pub use error::{Error, Result};
pub use graph::{
    build_knn_graph, build_laplacian, generate_barabasi_albert, Laplacian, Similarity, WeightLaw, WeightedGraph,
};
pub use linalg::{Cholesky, Matrix};
pub use policy::{
    init_policy, select_ts, select_ucb, ts_scale, ucb_width, update_state, Policy, PolicyConfig, PolicyKind,
    PolicyState,
};
pub use ratings::{complete_low_rank, load_ratings, user_reward_function, AlsOptions, CompletedMatrix, RatingsTable};
pub use scalar::Scalar;
pub use spectral::{effective_dimension, eigendecompose, symmetric_eigen, JacobiOptions, SpectralBasis};

pub type Matrix64 = Matrix<f64>;
pub type WeightedGraph64 = WeightedGraph<f64>;
pub type Laplacian64 = Laplacian<f64>;
pub type SpectralBasis64 = SpectralBasis<f64>;
pub type BanditInstance64 = BanditInstance<f64>;
pub type RegretTrace64 = RegretTrace<f64>;
pub type PolicyConfig64 = PolicyConfig<f64>;
pub type PolicyState64 = PolicyState<f64>;
pub type Policy64 = Policy<f64>;
pub type RatingsTable64 = RatingsTable<f64>;
pub type CompletedMatrix64 = CompletedMatrix<f64>;

pub type Matrix32 = Matrix<f32>;
pub type SpectralBasis32 = SpectralBasis<f32>;
pub type Policy32 = Policy<f32>;
