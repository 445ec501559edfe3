use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specband_core::graph::{build_laplacian, generate_barabasi_albert, WeightLaw};
use specband_core::policy::PolicyState;
use specband_core::scalar::argmax_lowest;
use specband_core::{
    eigendecompose, init_policy, make_smooth_alpha, BanditInstance, PolicyConfig, PolicyKind, RegretTrace,
    SpectralBasis, WeightedGraph,
};

fn ba_basis(n: usize, seed: u64, lambda: f64) -> SpectralBasis<f64> {
    let g: WeightedGraph<f64> = generate_barabasi_albert(n, 2, seed, WeightLaw::Uniform).unwrap();
    eigendecompose(&build_laplacian(&g), lambda).unwrap()
}

fn to_na(m: &specband_core::Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

#[test]
fn incremental_matches_batch_ridge_and_direct_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for episode in 0..50u64 {
        let basis = ba_basis(8, episode, 1.0);
        let mut state = PolicyState::with_diagonal_prior(basis.reg_eigenvalues(), true).unwrap();
        let pulls = rng.random_range(1..40);
        let mut xs = Vec::new();
        let mut rs = Vec::new();
        for _ in 0..pulls {
            let v = rng.random_range(0..8);
            let x = basis.arm_feature(v).unwrap().to_vec();
            let r: f64 = rng.random_range(-1.0..1.0);
            state.update(&x, r).unwrap();
            xs.push(x);
            rs.push(r);
        }
        // batch: (Λ + X^T X) α = X^T r
        let x = DMatrix::from_fn(xs.len(), 8, |i, j| xs[i][j]);
        let r = DVector::from_vec(rs);
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(basis.reg_eigenvalues()));
        let v = &lam + x.transpose() * &x;
        let alpha = v.clone().lu().solve(&(x.transpose() * r)).unwrap();
        for (got, want) in state.alpha_hat().iter().zip(alpha.iter()) {
            assert!((got - want).abs() < 1e-6);
        }
        let v_state = to_na(state.v_matrix());
        assert!((&v_state - &v).abs().max() < 1e-8);
        let inv = v.clone().try_inverse().unwrap();
        assert!((to_na(state.v_inverse()) - &inv).abs().max() < 1e-8);
        let prod = to_na(state.v_inverse()) * &v_state;
        assert!((prod - DMatrix::identity(8, 8)).abs().max() < 1e-6);
        let l = to_na(state.factor().unwrap().lower());
        assert!((&l * l.transpose() - &v).abs().max() < 1e-8);
        // V is positive definite with smallest eigenvalue at least λ
        let min_eig = v.symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= 1.0 - 1e-9);
    }
}

#[test]
fn posterior_sample_covariance() {
    let basis = ba_basis(5, 3, 1.0);
    let mut state = PolicyState::with_diagonal_prior(basis.reg_eigenvalues(), true).unwrap();
    for (v, r) in [(0, 0.3), (2, -0.1), (4, 0.8), (2, 0.0), (1, 0.5)] {
        state.update(basis.arm_feature(v).unwrap(), r).unwrap();
    }
    let scale = 1.3;
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|_| state.sample_posterior(scale, &mut rng).unwrap())
        .collect();
    let n = 5;
    let mean: Vec<f64> = (0..n)
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / draws as f64)
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            let emp = samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / (draws - 1) as f64;
            let want = scale * scale * state.v_inverse()[(i, j)];
            num += (emp - want).powi(2);
            den += want * want;
        }
    }
    assert!((num / den).sqrt() < 0.10);
    for (m, a) in mean.iter().zip(state.alpha_hat()) {
        assert!((m - a).abs() < 0.05);
    }
}

fn run(
    kind: PolicyKind,
    basis: &SpectralBasis<f64>,
    inst: &BanditInstance<f64>,
    cfg: PolicyConfig<f64>,
) -> RegretTrace<f64> {
    let mut policy = init_policy(PolicyConfig { kind, ..cfg }, basis).unwrap();
    let mut env = inst.clone();
    let mut trace = RegretTrace::with_capacity(cfg.horizon as usize);
    for _ in 0..cfg.horizon {
        let arm = policy.select().unwrap();
        let r = env.pull(arm).unwrap();
        policy.observe(arm, r).unwrap();
        trace.record_step(&env, arm, Duration::ZERO).unwrap();
    }
    trace
}

#[test]
fn thompson_is_deterministic_given_seed() {
    let basis = ba_basis(20, 1, 1.0);
    let alpha = make_smooth_alpha(&basis, 3, 8).unwrap();
    let inst = BanditInstance::from_alpha(&basis, &alpha, 0.01, 4).unwrap();
    let cfg = PolicyConfig {
        horizon: 30,
        rng_seed: 17,
        ..PolicyConfig::new(PolicyKind::SpectralTs)
    };
    let a = run(PolicyKind::SpectralTs, &basis, &inst, cfg.clone());
    let b = run(PolicyKind::SpectralTs, &basis, &inst, cfg);
    assert_eq!(a.chosen_arms(), b.chosen_arms());
}

#[test]
fn noiseless_confidence_widths_cover_every_arm() {
    // with R = 0 the estimation error at each arm is |x_v^T V^-1 Λ α*| <= C ||x_v||_{V^-1}
    let n = 10;
    let g = WeightedGraph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0f64))).unwrap();
    let basis = eigendecompose(&build_laplacian(&g), 1.0).unwrap();
    for seed in 0..5 {
        let alpha = make_smooth_alpha(&basis, 3, seed).unwrap();
        let mut env = BanditInstance::from_alpha(&basis, &alpha, 0.0, seed).unwrap();
        let c = basis.lambda_norm(env.alpha_star().unwrap());
        let cfg = PolicyConfig {
            noise_bound: 0.0,
            norm_bound: c,
            horizon: 50,
            ..PolicyConfig::new(PolicyKind::SpectralUcb)
        };
        let mut policy = init_policy(cfg, &basis).unwrap();
        for _ in 0..50 {
            let state = policy.state();
            for v in 0..n {
                let x = basis.arm_feature(v).unwrap();
                let pred: f64 = x.iter().zip(state.alpha_hat()).map(|(a, b)| a * b).sum();
                let width = c * state.inverse_quadratic(x).sqrt();
                assert!((pred - env.payoffs()[v]).abs() <= width + 1e-10, "seed {seed}, arm {v}");
            }
            let arm = policy.select().unwrap();
            let r = env.pull(arm).unwrap();
            assert_eq!(r, env.payoffs()[arm]);
            policy.observe(arm, r).unwrap();
        }
    }
}

#[test]
fn spectral_and_linear_share_one_code_path() {
    // with no edges Λ = λI, and a long horizon gives d = N: the pairs must coincide
    let n = 6;
    let g = WeightedGraph::<f64>::new(n, []).unwrap();
    let basis = eigendecompose(&build_laplacian(&g), 1.0).unwrap();
    let alpha = vec![0.5, -0.2, 0.9, 0.1, -0.7, 0.3];
    let inst = BanditInstance::from_alpha(&basis, &alpha, 0.05, 2).unwrap();
    let cfg = PolicyConfig {
        horizon: 50,
        rng_seed: 3,
        ..PolicyConfig::new(PolicyKind::SpectralUcb)
    };
    assert_eq!(basis.effective_dimension(50), n);
    for (spectral, linear) in [
        (PolicyKind::SpectralUcb, PolicyKind::LinUcb),
        (PolicyKind::SpectralTs, PolicyKind::LinearTs),
    ] {
        let a = run(spectral, &basis, &inst, cfg.clone());
        let b = run(linear, &basis, &inst, cfg.clone());
        assert_eq!(a, b);
    }
}

#[test]
fn f32_policies_run() {
    let g: WeightedGraph<f32> = generate_barabasi_albert(15, 2, 4, WeightLaw::Uniform).unwrap();
    let basis = eigendecompose(&build_laplacian(&g), 1.0f32).unwrap();
    let alpha = make_smooth_alpha(&basis, 3, 1).unwrap();
    let mut inst = BanditInstance::from_alpha(&basis, &alpha, 0.01f32, 0).unwrap();
    for kind in PolicyKind::ALL {
        let cfg = PolicyConfig {
            horizon: 20,
            ..PolicyConfig::<f32>::new(kind)
        };
        let mut p = init_policy(cfg, &basis).unwrap();
        let mut trace = RegretTrace::with_capacity(20);
        for _ in 0..20 {
            let arm = p.select().unwrap();
            let r = inst.pull(arm).unwrap();
            p.observe(arm, r).unwrap();
            trace.record_step(&inst, arm, Duration::ZERO).unwrap();
        }
        assert!(trace.cumulative_regret().windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #[test]
    fn argmax_ignores_constant_shift(scores in proptest::collection::vec(-1000i32..1000, 1..40), shift in -1000i32..1000) {
        let base: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let shifted: Vec<f64> = scores.iter().map(|&s| (s + shift) as f64).collect();
        prop_assert_eq!(argmax_lowest(base), argmax_lowest(shifted));
    }
}
