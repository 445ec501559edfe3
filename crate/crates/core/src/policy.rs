//! SpectralUCB, Spectral Thompson Sampling, and the LinUCB / LinearTS baselines.
//!
//! All four share one regularized least-squares state. The spectral variants
//! start from `V = Λ = Λ_L + λI` and use the effective dimension `d` in their
//! confidence constants; the linear baselines start from `V = λI` and use the
//! ambient dimension `N`. Nothing else differs.
//!
//! Arm features are always rows of the Laplacian eigenvector matrix, so all
//! vectors below are expressed in the eigenbasis.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{argmax_lowest, Scalar};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    SpectralUcb,
    SpectralTs,
    LinUcb,
    LinearTs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::SpectralUcb,
        PolicyKind::SpectralTs,
        PolicyKind::LinUcb,
        PolicyKind::LinearTs,
    ];

    pub fn is_spectral(self) -> bool {
        matches!(self, PolicyKind::SpectralUcb | PolicyKind::SpectralTs)
    }

    pub fn is_thompson(self) -> bool {
        matches!(self, PolicyKind::SpectralTs | PolicyKind::LinearTs)
    }

    /// Short CLI name: `sucb`, `sts`, `lucb`, `lts`.
    pub fn short_name(self) -> &'static str {
        match self {
            PolicyKind::SpectralUcb => "sucb",
            PolicyKind::SpectralTs => "sts",
            PolicyKind::LinUcb => "lucb",
            PolicyKind::LinearTs => "lts",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::SpectralUcb => "SpectralUCB",
            PolicyKind::SpectralTs => "SpectralTS",
            PolicyKind::LinUcb => "LinUCB",
            PolicyKind::LinearTs => "LinearTS",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.short_name() == lower || k.label().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

/// Hyperparameters of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig<T> {
    pub kind: PolicyKind,
    /// Confidence parameter, in (0, 1).
    pub delta: T,
    /// Sub-Gaussian noise bound `R`.
    pub noise_bound: T,
    /// Bound `C` on the norm of the true weight vector.
    pub norm_bound: T,
    pub lambda_reg: T,
    pub horizon: u64,
    /// Seed of the posterior sampling stream (Thompson variants only).
    pub rng_seed: u64,
}

impl<T: Scalar> PolicyConfig<T> {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            delta: T::lit(0.001),
            noise_bound: T::lit(0.01),
            norm_bound: T::one(),
            lambda_reg: T::one(),
            horizon: 200,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return bad(format!("delta must be in (0, 1), got {}", self.delta));
        }
        if !(self.noise_bound >= T::zero()) {
            return bad(format!("noise bound R must be >= 0, got {}", self.noise_bound));
        }
        if !(self.norm_bound >= T::zero()) {
            return bad(format!("norm bound C must be >= 0, got {}", self.norm_bound));
        }
        if !(self.lambda_reg > T::zero()) {
            return bad(format!("lambda must be > 0, got {}", self.lambda_reg));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        Ok(())
    }
}

/// `c_t = 2R sqrt(d ln(1 + t/λ) + 2 ln(1/δ)) + C`
pub fn ucb_width<T: Scalar>(config: &PolicyConfig<T>, d: usize, t: u64) -> T {
    let r = config.noise_bound.as_f64();
    let lambda = config.lambda_reg.as_f64();
    let delta = config.delta.as_f64();
    let inner = d as f64 * (1.0 + t as f64 / lambda).ln() + 2.0 * (1.0 / delta).ln();
    T::lit(2.0 * r * inner.sqrt()) + config.norm_bound
}

/// `v = R sqrt(6 d ln((λ + T) / (δ λ))) + C`
pub fn ts_scale<T: Scalar>(config: &PolicyConfig<T>, d: usize) -> T {
    let r = config.noise_bound.as_f64();
    let lambda = config.lambda_reg.as_f64();
    let delta = config.delta.as_f64();
    let horizon = config.horizon as f64;
    let inner = 6.0 * d as f64 * ((lambda + horizon) / (delta * lambda)).ln();
    T::lit(r * inner.sqrt()) + config.norm_bound
}

/// Regularized least-squares statistics shared by every policy.
#[derive(Debug, Clone)]
pub struct PolicyState<T> {
    v_matrix: Matrix<T>,
    v_inverse: Matrix<T>,
    response_acc: Vec<T>,
    alpha_hat: Vec<T>,
    step: usize,
    /// Cholesky factor of `V`, kept current for posterior sampling.
    factor: Option<Cholesky<T>>,
}

impl<T: Scalar> PolicyState<T> {
    /// State with `V = diag(prior)`, zero estimate, and optionally a maintained factor of `V`.
    pub fn with_diagonal_prior(prior: &[T], maintain_factor: bool) -> Result<Self> {
        let n = prior.len();
        let factor = if maintain_factor {
            Some(Cholesky::from_positive_diagonal(prior)?)
        } else if let Some((i, p)) = prior.iter().enumerate().find(|(_, p)| !(**p > T::zero())) {
            return Err(Error::NotPositiveDefinite(format!("prior entry {i} is {p}")));
        } else {
            None
        };
        let inv: Vec<T> = prior.iter().map(|&p| T::one() / p).collect();
        Ok(Self {
            v_matrix: Matrix::from_diagonal(prior),
            v_inverse: Matrix::from_diagonal(&inv),
            response_acc: vec![T::zero(); n],
            alpha_hat: vec![T::zero(); n],
            step: 0,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha_hat.len()
    }

    pub fn v_matrix(&self) -> &Matrix<T> {
        &self.v_matrix
    }

    pub fn v_inverse(&self) -> &Matrix<T> {
        &self.v_inverse
    }

    pub fn response_acc(&self) -> &[T] {
        &self.response_acc
    }

    pub fn alpha_hat(&self) -> &[T] {
        &self.alpha_hat
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn factor(&self) -> Option<&Cholesky<T>> {
        self.factor.as_ref()
    }

    /// `||x||_{V^{-1}}^2 = x^T V^{-1} x`
    pub fn inverse_quadratic(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                acc = acc + xi * dot(self.v_inverse.row(i), x);
            }
        }
        acc
    }

    /// Rank-one update after observing reward `r` for features `x`.
    ///
    /// The inverse follows the Sherman–Morrison identity
    /// `(V + xx^T)^{-1} = V^{-1} - (V^{-1}x)(V^{-1}x)^T / (1 + x^T V^{-1} x)`.
    pub fn update(&mut self, x: &[T], r: T) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "feature length {} does not match state dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let u = self.v_inverse.mat_vec(x);
        let denom = T::one() + dot(x, &u);
        if !(denom > T::zero()) || !denom.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "Sherman-Morrison denominator is {denom}"
            )));
        }
        self.v_inverse.add_outer(-T::one() / denom, &u, &u);
        self.v_matrix.add_outer(T::one(), x, x);
        for (f, &xi) in self.response_acc.iter_mut().zip(x) {
            *f = *f + xi * r;
        }
        self.alpha_hat = self.v_inverse.mat_vec(&self.response_acc);
        if let Some(factor) = self.factor.as_mut() {
            factor.rank_one_update(x)?;
        }
        self.step += 1;
        Ok(())
    }

    /// Draws `α̃ = α̂ + scale · w` with `Cov(w) = V^{-1}`.
    ///
    /// With `V = L L^T`, `w = L^{-T} z` for standard-normal `z` has covariance
    /// `L^{-T} L^{-1} = V^{-1}`.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, scale: T, rng: &mut R) -> Result<Vec<T>> {
        let fresh;
        let factor = match self.factor.as_ref() {
            Some(f) => f,
            None => {
                fresh = Cholesky::factor(&self.v_matrix)?;
                &fresh
            }
        };
        let z: Vec<T> = (0..self.dim())
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let w = factor.solve_upper_transposed(&z);
        Ok(self.alpha_hat.iter().zip(&w).map(|(&a, &wi)| a + scale * wi).collect())
    }
}

pub fn update_state<T: Scalar>(state: &mut PolicyState<T>, x: &[T], r: T) -> Result<()> {
    state.update(x, r)
}

/// `argmax_v <x_v, α̂> + c_t ||x_v||_{V^{-1}}`, ties to the lowest index.
pub fn select_ucb<T: Scalar>(state: &PolicyState<T>, basis: &SpectralBasis<T>, width: T) -> usize {
    let q = basis.q();
    argmax_lowest((0..basis.num_arms()).map(|v| {
        let x = q.row(v);
        dot(x, state.alpha_hat()) + width * state.inverse_quadratic(x).max(T::zero()).sqrt()
    }))
}

/// Samples `α̃ ~ N(α̂, v² V^{-1})` and returns `argmax_a <x_a, α̃>`, ties to the lowest index.
pub fn select_ts<T: Scalar, R: Rng + ?Sized>(
    state: &PolicyState<T>,
    basis: &SpectralBasis<T>,
    scale: T,
    rng: &mut R,
) -> Result<usize> {
    let sample = state.sample_posterior(scale, rng)?;
    Ok(argmax_lowest(basis.payoffs(&sample)))
}

/// A configured policy bound to a spectral basis.
#[derive(Debug, Clone)]
pub struct Policy<T> {
    config: PolicyConfig<T>,
    basis: SpectralBasis<T>,
    dimension: usize,
    scale: T,
    state: PolicyState<T>,
    rng: ChaCha8Rng,
}

pub fn init_policy<T: Scalar>(config: PolicyConfig<T>, basis: &SpectralBasis<T>) -> Result<Policy<T>> {
    config.validate()?;
    let basis = basis.with_lambda(config.lambda_reg)?;
    let n = basis.num_arms();
    let (prior, dimension) = if config.kind.is_spectral() {
        (
            basis.reg_eigenvalues().to_vec(),
            basis.effective_dimension(config.horizon),
        )
    } else {
        (vec![config.lambda_reg; n], n)
    };
    let state = PolicyState::with_diagonal_prior(&prior, config.kind.is_thompson())?;
    let scale = if config.kind.is_thompson() {
        ts_scale(&config, dimension)
    } else {
        T::zero()
    };
    let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    Ok(Policy {
        config,
        basis,
        dimension,
        scale,
        state,
        rng,
    })
}

impl<T: Scalar> Policy<T> {
    pub fn config(&self) -> &PolicyConfig<T> {
        &self.config
    }

    pub fn kind(&self) -> PolicyKind {
        self.config.kind
    }

    /// `d` for the spectral variants, `N` for the linear baselines.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn state(&self) -> &PolicyState<T> {
        &self.state
    }

    pub fn basis(&self) -> &SpectralBasis<T> {
        &self.basis
    }

    /// Thompson sampling scale `v`; zero for the UCB variants.
    pub fn ts_scale(&self) -> T {
        self.scale
    }

    /// Chooses the arm for the next step `t = step + 1`.
    pub fn select(&mut self) -> Result<usize> {
        if self.config.kind.is_thompson() {
            select_ts(&self.state, &self.basis, self.scale, &mut self.rng)
        } else {
            let t = self.state.step() as u64 + 1;
            let width = ucb_width(&self.config, self.dimension, t);
            Ok(select_ucb(&self.state, &self.basis, width))
        }
    }

    pub fn observe(&mut self, arm: usize, reward: T) -> Result<()> {
        let x = self.basis.arm_feature(arm)?.to_vec();
        self.state.update(&x, reward)
    }
}
