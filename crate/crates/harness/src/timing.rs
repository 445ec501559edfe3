//! Per-step cost of SpectralUCB against Spectral Thompson sampling as `N` grows.

use std::io::Write;

use specband_core::{
    build_laplacian, eigendecompose, generate_barabasi_albert, make_smooth_alpha, BanditInstance64, PolicyKind,
    WeightLaw, WeightedGraph64,
};

use crate::config::PolicySpec;
use crate::error::Result;
use crate::experiment::{exact_norm_bound, run_policy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub ucb_ms: f64,
    pub ts_ms: f64,
    /// `ucb_ms / ts_ms`
    pub ratio: f64,
}

/// Mean selection + update time per step on a BA graph (m = 3) of each size.
///
/// Runs on the calling thread; only the policy loop is timed, never graph or basis construction.
pub fn time_complexity_study(sizes: &[usize], steps: usize, seed: u64) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let g: WeightedGraph64 = generate_barabasi_albert(n, 3, seed, WeightLaw::Uniform)?;
        let basis = eigendecompose(&build_laplacian(&g), 1.0)?;
        let alpha = make_smooth_alpha(&basis, 3, seed)?;
        let inst = BanditInstance64::from_alpha(&basis, &alpha, 0.01, seed)?;
        let mut ms = [0.0; 2];
        for (slot, kind) in [PolicyKind::SpectralUcb, PolicyKind::SpectralTs]
            .into_iter()
            .enumerate()
        {
            let spec = PolicySpec::new(kind);
            let c = exact_norm_bound(&basis, inst.alpha_star().unwrap_or(&alpha), true, spec.lambda)?;
            let cfg = spec.to_policy_config(0.01, c, steps as u64, seed);
            ms[slot] = run_policy(&basis, &inst, cfg)?.trace.mean_step_ms();
        }
        log::info!("N={n}: ucb {:.4} ms, ts {:.4} ms", ms[0], ms[1]);
        rows.push(TimingRow {
            n,
            ucb_ms: ms[0],
            ts_ms: ms[1],
            ratio: ms[0] / ms[1],
        });
    }
    Ok(rows)
}

pub fn write_timing_csv<W: Write>(rows: &[TimingRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "N,ucb_ms,ts_ms,ratio")?;
    for r in rows {
        writeln!(out, "{},{:.6},{:.6},{:.4}", r.n, r.ucb_ms, r.ts_ms, r.ratio)?;
    }
    Ok(())
}
