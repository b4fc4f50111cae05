//! Exact oracles and Monte Carlo statistics for theorem-level verification.

pub mod exhaustive;
pub mod moments;
pub mod power;
pub mod star;
pub mod suites;
pub mod traversal;

use serde::{Deserialize, Serialize};

/// One verification record; the CLI aggregates these into tables and CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: serde_json::Value,
    pub predicted: String,
    pub observed: String,
    pub tolerance: String,
    pub pass: bool,
    /// Diagnostics near conjectural regimes carry no pass/fail meaning.
    #[serde(default)]
    pub informational: bool,
}

impl CheckRecord {
    pub fn new(
        check: impl Into<String>,
        params: serde_json::Value,
        predicted: impl ToString,
        observed: impl ToString,
        tolerance: impl ToString,
        pass: bool,
    ) -> Self {
        Self {
            check: check.into(),
            params,
            predicted: predicted.to_string(),
            observed: observed.to_string(),
            tolerance: tolerance.to_string(),
            pass,
            informational: false,
        }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self.pass = true;
        self
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / xs.len() as f64;
        let fb = j as f64 / ys.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_identical_samples_is_small() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64) / 1000.0).collect();
        assert!(ks_distance(&a, &a) <= 1e-3);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!(ks_distance(&a, &b) >= 0.45);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [250.0, 500.0, 1000.0, 2000.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}
