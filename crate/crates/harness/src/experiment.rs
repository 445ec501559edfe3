//! Paired multi-run simulations and their aggregation.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use specband_core::bounds::{check_regret_bound, BoundCheck, BoundParams};
use specband_core::ratings::user_reward_function;
use specband_core::{
    build_laplacian, eigendecompose, generate_barabasi_albert, init_policy, make_smooth_alpha, AlsOptions,
    BanditInstance64, PolicyConfig64, RegretTrace64, SpectralBasis64, WeightedGraph64,
};

use crate::config::{ExperimentConfig, GraphSource, NormBound};
use crate::error::{HarnessError, IoContext, Result};
use crate::pipeline::{prepare_ratings, PreparedRatings};

/// splitmix64 finalizer; derives independent sub-seeds from a run seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ALPHA_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const USER_STREAM: u64 = 3;
const POLICY_STREAM: u64 = 4;

/// One policy's run on one instance.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub config: PolicyConfig64,
    /// `d` for the spectral variants, `N` for the linear ones.
    pub dimension: usize,
    pub trace: RegretTrace64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// Ratings mode: the user whose ratings define the payoffs.
    pub user: Option<usize>,
    pub num_arms: usize,
    pub policies: Vec<PolicyRun>,
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    /// Column labels, made unique when a policy kind repeats.
    pub labels: Vec<String>,
    pub horizon: usize,
    /// `mean_regret[p][t]`: mean cumulative regret of policy `p` after step `t + 1`.
    pub mean_regret: Vec<Vec<f64>>,
    /// Standard error of the mean (sample sd / sqrt(runs)); zero for a single run.
    pub stderr_regret: Vec<Vec<f64>>,
    pub mean_step_ms: Vec<f64>,
    pub runs: Vec<RunRecord>,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl AggregateResult {
    pub fn final_mean(&self, policy: usize) -> f64 {
        *self.mean_regret[policy].last().expect("horizon >= 1")
    }
}

/// Graph-side state shared by all runs.
enum Source {
    Ba {
        n: usize,
        m: usize,
        law: specband_core::WeightLaw,
    },
    Fixed(SpectralBasis64),
    Ratings(Box<PreparedRatings>, SpectralBasis64),
}

fn basis_of(g: &WeightedGraph64, lambda: f64) -> specband_core::Result<SpectralBasis64> {
    eigendecompose(&build_laplacian(g), lambda)
}

fn prepare_source(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Source> {
    let lambda = cfg.policies[0].lambda;
    Ok(match &cfg.graph {
        GraphSource::Ba { n, m, weight_law } => Source::Ba {
            n: *n,
            m: *m,
            law: *weight_law,
        },
        GraphSource::EdgeList { path } => {
            let f = std::fs::File::open(path).at(path)?;
            let g = WeightedGraph64::read_edge_list(std::io::BufReader::new(f))?;
            Source::Fixed(basis_of(&g, lambda)?)
        }
        GraphSource::KnnFromRatings {
            path,
            rank,
            mu,
            k,
            iters,
            als_seed,
            similarity,
        } => {
            let opts = AlsOptions {
                rank: *rank,
                reg: *mu,
                iters: *iters,
                seed: *als_seed,
            };
            let prepared = prepare_ratings(path, opts, *k, *similarity, cache_dir)?;
            let basis = basis_of(&prepared.graph, lambda)?;
            Source::Ratings(Box::new(prepared), basis)
        }
    })
}

/// Runs one policy to the horizon. Step time covers selection and update only.
pub fn run_policy(
    basis: &SpectralBasis64,
    instance: &BanditInstance64,
    config: PolicyConfig64,
) -> specband_core::Result<PolicyRun> {
    let horizon = config.horizon as usize;
    let mut policy = init_policy(config.clone(), basis)?;
    let mut env = instance.clone();
    let mut trace = RegretTrace64::with_capacity(horizon);
    for _ in 0..horizon {
        let start = Instant::now();
        let arm = policy.select()?;
        let mut elapsed = start.elapsed();
        let reward = env.pull(arm)?;
        let start = Instant::now();
        policy.observe(arm, reward)?;
        elapsed += start.elapsed();
        trace.record_step(&env, arm, elapsed)?;
    }
    Ok(PolicyRun {
        config,
        dimension: policy.dimension(),
        trace,
    })
}

/// `||α||` under the policy's own prior: `sqrt(α^T Λ α)` for spectral kinds, `sqrt(λ) ||α||` otherwise.
pub fn exact_norm_bound(
    basis: &SpectralBasis64,
    alpha: &[f64],
    spectral: bool,
    lambda: f64,
) -> specband_core::Result<f64> {
    if spectral {
        Ok(basis.with_lambda(lambda)?.lambda_norm(alpha))
    } else {
        Ok(lambda.sqrt() * alpha.iter().map(|a| a * a).sum::<f64>().sqrt())
    }
}

fn run_once(cfg: &ExperimentConfig, source: &Source, run: usize) -> specband_core::Result<RunRecord> {
    let seed = cfg.run_seed(run);
    let noise_seed = mix_seed(seed, NOISE_STREAM);
    let mut user = None;
    let (basis, instance) = match source {
        Source::Ba { n, m, law } => {
            let g: WeightedGraph64 = generate_barabasi_albert(*n, *m, seed, *law)?;
            let basis = basis_of(&g, cfg.policies[0].lambda)?;
            let alpha = make_smooth_alpha(&basis, cfg.smooth_k, mix_seed(seed, ALPHA_STREAM))?;
            let inst = BanditInstance64::from_alpha(&basis, &alpha, cfg.noise, noise_seed)?;
            (basis, inst)
        }
        Source::Fixed(basis) => {
            let alpha = make_smooth_alpha(basis, cfg.smooth_k, mix_seed(seed, ALPHA_STREAM))?;
            let inst = BanditInstance64::from_alpha(basis, &alpha, cfg.noise, noise_seed)?;
            (basis.clone(), inst)
        }
        Source::Ratings(prepared, basis) => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, USER_STREAM));
            let u = rng.random_range(0..prepared.table.num_users);
            user = Some(u);
            let payoffs = user_reward_function(&prepared.table, &prepared.completed, u)?;
            (
                basis.clone(),
                BanditInstance64::from_payoffs(payoffs, cfg.noise, noise_seed)?,
            )
        }
    };

    let mut policies = Vec::with_capacity(cfg.policies.len());
    for spec in &cfg.policies {
        let c = match (spec.norm_bound, instance.alpha_star()) {
            (Some(NormBound::Value(c)), _) => c,
            (_, Some(alpha)) => exact_norm_bound(&basis, alpha, spec.kind.is_spectral(), spec.lambda)?,
            (None, None) => 1.0,
            (Some(NormBound::Exact), None) => {
                return Err(specband_core::Error::InvalidArgument(
                    "norm_bound = \"exact\" needs a synthetic α*; ratings payoffs have none".into(),
                ))
            }
        };
        let pc = spec.to_policy_config(
            cfg.noise,
            c,
            cfg.horizon,
            mix_seed(mix_seed(seed, POLICY_STREAM), spec.rng_seed),
        );
        // every policy starts from a clone of the same instance: same payoffs, same noise stream
        policies.push(run_policy(&basis, &instance, pc)?);
    }
    Ok(RunRecord {
        run,
        seed,
        user,
        num_arms: basis.num_arms(),
        policies,
    })
}

fn unique_labels(cfg: &ExperimentConfig) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for p in &cfg.policies {
        let base = p.kind.label().to_string();
        let count = labels
            .iter()
            .filter(|l| l.split('#').next() == Some(base.as_str()))
            .count();
        labels.push(if count == 0 {
            base
        } else {
            format!("{base}#{}", count + 1)
        });
    }
    labels
}

pub fn aggregate(cfg: &ExperimentConfig, runs: Vec<RunRecord>) -> Result<AggregateResult> {
    let horizon = cfg.horizon as usize;
    let k = runs.len() as f64;
    let mut mean_regret = Vec::new();
    let mut stderr_regret = Vec::new();
    let mut mean_step_ms = Vec::new();
    for p in 0..cfg.policies.len() {
        let mut mean = vec![0.0; horizon];
        for r in &runs {
            for (m, &x) in mean.iter_mut().zip(r.policies[p].trace.cumulative_regret()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= k);
        let se: Vec<f64> = if runs.len() < 2 {
            vec![0.0; horizon]
        } else {
            (0..horizon)
                .map(|t| {
                    let ss: f64 = runs
                        .iter()
                        .map(|r| (r.policies[p].trace.cumulative_regret()[t] - mean[t]).powi(2))
                        .sum();
                    (ss / (k - 1.0)).sqrt() / k.sqrt()
                })
                .collect()
        };
        mean_step_ms.push(runs.iter().map(|r| r.policies[p].trace.mean_step_ms()).sum::<f64>() / k);
        mean_regret.push(mean);
        stderr_regret.push(se);
    }
    Ok(AggregateResult {
        labels: unique_labels(cfg),
        horizon,
        mean_regret,
        stderr_regret,
        mean_step_ms,
        seeds: runs.iter().map(|r| r.seed).collect(),
        runs,
        config_hash: cfg.hash()?,
    })
}

/// Runs every configured run (in parallel) and aggregates.
///
/// `cache_dir` holds completed ratings matrices between invocations; `None` disables caching.
pub fn run_experiment_cached(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<AggregateResult> {
    cfg.validate()?;
    let source = prepare_source(cfg, cache_dir)?;
    let runs: Vec<RunRecord> = (0..cfg.num_runs)
        .into_par_iter()
        .map(|run| run_once(cfg, &source, run).map_err(|source| HarnessError::Run { run, source }))
        .collect::<Result<_>>()?;
    aggregate(cfg, runs)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    run_experiment_cached(cfg, None)
}

/// Regret-bound check of every (run, policy) trace, indexed `[run][policy]`.
pub fn bound_checks(result: &AggregateResult) -> Vec<Vec<BoundCheck>> {
    result
        .runs
        .iter()
        .map(|r| {
            r.policies
                .iter()
                .map(|p| {
                    let params = BoundParams {
                        effective_dim: p.dimension,
                        lambda: p.config.lambda_reg,
                        norm_bound: p.config.norm_bound,
                        noise_bound: p.config.noise_bound,
                        delta: p.config.delta,
                        horizon: p.config.horizon,
                        num_arms: r.num_arms,
                    };
                    check_regret_bound(&p.trace, p.config.kind, &params)
                })
                .collect()
        })
        .collect()
}
