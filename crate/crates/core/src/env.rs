//! Bandit environment: hidden payoffs, noisy pulls, and pseudo-regret accounting.

use std::io::Write;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{argmax_lowest, Scalar};
use crate::spectral::SpectralBasis;

/// Rescales `alpha` so that `max_v |<x_v, alpha>| = 1`.
pub fn normalize_alpha<T: Scalar>(basis: &SpectralBasis<T>, alpha: &[T]) -> Result<Vec<T>> {
    let peak = max_abs(&basis.payoffs(alpha));
    if !(peak > T::zero()) || !peak.is_finite() {
        return Err(Error::InvalidArgument("alpha produces identically zero payoffs".into()));
    }
    Ok(alpha.iter().map(|&a| a / peak).collect())
}

/// Random smooth weight vector: standard-normal coefficients on the `k` smoothest
/// eigenvectors, zero elsewhere, normalized to a peak payoff magnitude of 1.
pub fn make_smooth_alpha<T: Scalar>(basis: &SpectralBasis<T>, k: usize, seed: u64) -> Result<Vec<T>> {
    let n = basis.num_arms();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("support size k={k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut alpha = vec![T::zero(); n];
        for a in alpha.iter_mut().take(k) {
            *a = T::lit(rng.sample::<f64, _>(StandardNormal));
        }
        match normalize_alpha(basis, &alpha) {
            Ok(a) => return Ok(a),
            // zero-probability event; draw again from the same stream
            Err(_) => continue,
        }
    }
}

fn max_abs<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Stochastic environment over the nodes of a graph.
///
/// Noise is Gaussian `N(0, R^2)`; the regret accounting only ever uses the
/// noiseless payoffs.
#[derive(Debug, Clone)]
pub struct BanditInstance<T> {
    payoffs: Vec<T>,
    alpha_star: Option<Vec<T>>,
    noise_level: T,
    rng: ChaCha8Rng,
    best_arm: usize,
    best_value: T,
}

impl<T: Scalar> BanditInstance<T> {
    /// Instance with payoffs `<x_v, alpha>`, where `alpha` is first normalized to peak magnitude 1.
    pub fn from_alpha(basis: &SpectralBasis<T>, alpha: &[T], noise_level: T, noise_seed: u64) -> Result<Self> {
        if alpha.len() != basis.num_arms() {
            return Err(Error::InvalidArgument("alpha length must equal number of arms".into()));
        }
        let alpha = normalize_alpha(basis, alpha)?;
        let payoffs = basis.payoffs(&alpha);
        let mut inst = Self::from_payoffs(payoffs, noise_level, noise_seed)?;
        inst.alpha_star = Some(alpha);
        Ok(inst)
    }

    /// Instance whose noiseless payoffs are given per node; they must lie in `[-1, 1]`.
    pub fn from_payoffs(payoffs: Vec<T>, noise_level: T, noise_seed: u64) -> Result<Self> {
        if payoffs.is_empty() {
            return Err(Error::InvalidArgument("instance needs at least one arm".into()));
        }
        if !(noise_level >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be >= 0, got {noise_level}"
            )));
        }
        let slack = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        if payoffs.iter().any(|p| !p.is_finite() || p.abs() > T::one() + slack) {
            return Err(Error::InvalidArgument("payoffs must lie in [-1, 1]".into()));
        }
        let best_arm = argmax_lowest(payoffs.iter().copied());
        let best_value = payoffs[best_arm];
        Ok(Self {
            payoffs,
            alpha_star: None,
            noise_level,
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
            best_arm,
            best_value,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.payoffs.len()
    }

    pub fn payoffs(&self) -> &[T] {
        &self.payoffs
    }

    pub fn alpha_star(&self) -> Option<&[T]> {
        self.alpha_star.as_deref()
    }

    pub fn noise_level(&self) -> T {
        self.noise_level
    }

    pub fn best_arm(&self) -> usize {
        self.best_arm
    }

    pub fn best_value(&self) -> T {
        self.best_value
    }

    /// Pseudo-regret of a single choice.
    pub fn gap(&self, v: usize) -> T {
        (self.best_value - self.payoffs[v]).max(T::zero())
    }

    /// Noisy reward for one pull of arm `v`.
    pub fn pull(&mut self, v: usize) -> Result<T> {
        if v >= self.payoffs.len() {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: self.payoffs.len(),
            });
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(self.payoffs[v] + self.noise_level * T::lit(z))
    }

    /// Restarts the noise stream from `seed`.
    pub fn reseed_noise(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Per-step and cumulative pseudo-regret with wall-clock step timings.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace<T> {
    capacity: usize,
    per_step_regret: Vec<T>,
    cumulative_regret: Vec<T>,
    step_times: Vec<Duration>,
    chosen: Vec<usize>,
}

impl<T: Scalar> RegretTrace<T> {
    pub fn with_capacity(horizon: usize) -> Self {
        Self {
            capacity: horizon,
            per_step_regret: Vec::with_capacity(horizon),
            cumulative_regret: Vec::with_capacity(horizon),
            step_times: Vec::with_capacity(horizon),
            chosen: Vec::with_capacity(horizon),
        }
    }

    pub fn record_step(&mut self, instance: &BanditInstance<T>, chosen: usize, elapsed: Duration) -> Result<()> {
        if self.per_step_regret.len() == self.capacity {
            return Err(Error::TraceFull(self.capacity));
        }
        if chosen >= instance.num_arms() {
            return Err(Error::IndexOutOfRange {
                index: chosen,
                len: instance.num_arms(),
            });
        }
        let r = instance.gap(chosen);
        let prev = self.cumulative_regret.last().copied().unwrap_or_else(T::zero);
        self.per_step_regret.push(r);
        self.cumulative_regret.push(prev + r);
        self.step_times.push(elapsed);
        self.chosen.push(chosen);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.per_step_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step_regret.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn per_step_regret(&self) -> &[T] {
        &self.per_step_regret
    }

    pub fn cumulative_regret(&self) -> &[T] {
        &self.cumulative_regret
    }

    pub fn final_regret(&self) -> T {
        self.cumulative_regret.last().copied().unwrap_or_else(T::zero)
    }

    pub fn step_times(&self) -> &[Duration] {
        &self.step_times
    }

    pub fn chosen_arms(&self) -> &[usize] {
        &self.chosen
    }

    pub fn mean_step_ms(&self) -> f64 {
        if self.step_times.is_empty() {
            return 0.0;
        }
        self.step_times.iter().map(|d| d.as_secs_f64() * 1e3).sum::<f64>() / self.step_times.len() as f64
    }

    /// CSV with columns `t,inst_regret,cum_regret,step_ms`, `t` starting at 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,inst_regret,cum_regret,step_ms")?;
        for (i, ((r, c), d)) in self
            .per_step_regret
            .iter()
            .zip(&self.cumulative_regret)
            .zip(&self.step_times)
            .enumerate()
        {
            writeln!(out, "{},{},{},{:.6}", i + 1, r, c, d.as_secs_f64() * 1e3)?;
        }
        Ok(())
    }
}
