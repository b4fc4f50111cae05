//! Long-run debiased power iteration: distributional checks at iteration
//! counts far beyond the symbolic evaluation horizon, plus direct path-gap
//! slopes at small t.

use crate::canon::canonicalize;
use crate::diagram::Diagram;
use crate::ensemble::MatrixEnsemble;
use crate::error::Result;
use crate::eval::{EvalMode, EvalSession};
use crate::matrix::{dot_product, linf_dist};
use crate::program::presets;
use crate::rng::{standard_normal, stream_rng, STREAM_GENERIC};
use crate::verify::{ks_distance, loglog_slope, median, CheckRecord};
use crate::Limits;

pub struct PowerRunStats {
    /// KS distance of the coordinates of x_t against sampled standard normals.
    pub ks_final: f64,
    /// max over s < t of |(1/n) <x_s, x_t>|.
    pub max_cross_correlation: f64,
    /// Diagnostics near the conjectural iteration-count regimes.
    pub records: Vec<CheckRecord>,
}

/// Runs x_{t+1} = A x_t - x_{t-1} under the ±1/sqrt(n-1) ensemble for t_max
/// steps and reports distributional statistics.
pub fn long_run_power_iteration_check(
    n: usize,
    t_max: usize,
    seed: u64,
    ks_samples: usize,
    limits: &Limits,
) -> Result<PowerRunStats> {
    let ens = MatrixEnsemble::rademacher_variant(n, seed);
    let run = crate::engine::run_gfom(&presets::debiased_power(t_max), &ens, limits)?;
    let xs = &run.iterates;

    // reference sample of the predicted standard normal limit
    let mut rng = stream_rng(seed ^ 0x9e3779b97f4a7c15, STREAM_GENERIC);
    let normals: Vec<f64> = (0..ks_samples).map(|_| standard_normal(&mut rng)).collect();
    let ks_final = ks_distance(&xs[t_max], &normals);

    let mut max_cross = 0.0f64;
    for s in 1..t_max {
        for t in (s + 1)..=t_max {
            let c = (dot_product(&xs[s], &xs[t]) / n as f64).abs();
            max_cross = max_cross.max(c);
        }
    }

    let mut records = Vec::new();
    // near-threshold diagnostics: norms at t around log n / log log n
    let log_n = (n as f64).ln();
    let t_soft = (log_n / log_n.ln()).round() as usize;
    for t in [t_soft.min(t_max), t_max] {
        let norm2 = (dot_product(&xs[t], &xs[t]) / n as f64).sqrt();
        records.push(
            CheckRecord::new(
                "power-iteration/norm-diagnostic",
                serde_json::json!({"n": n, "t": t}),
                1.0,
                norm2,
                "informational",
                true,
            )
            .info(),
        );
    }
    Ok(PowerRunStats { ks_final, max_cross_correlation: max_cross, records })
}

/// Median over seeds of the path-approximation gap |x_t - Z_{t-path}|_inf at
/// each n, and its log-log slope across the grid. t must stay within the exact
/// evaluation horizon (t <= 3 keeps every quotient contraction affordable).
pub fn path_gap_slope(ns: &[usize], t: usize, seeds: &[u64], limits: &Limits) -> Result<(Vec<f64>, f64)> {
    let path = canonicalize(&Diagram::rooted_path(t))?;
    let mut medians = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut gaps = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let ens = MatrixEnsemble::rademacher_variant(n, seed);
            let a = ens.sample()?;
            let steps = presets::debiased_power(t).steps()?;
            let iterates = crate::engine::run_steps(&steps, &a, crate::engine::OnsagerMode::Empirical, limits)?;
            let mut session = EvalSession::new(&a, EvalMode::Moebius, limits.clone());
            let z = session.eval_diagram(&path)?;
            let z = z.as_vector().unwrap();
            gaps.push(linf_dist(&iterates[t], z));
        }
        medians.push(median(&mut gaps));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &medians);
    Ok((medians, slope))
}
