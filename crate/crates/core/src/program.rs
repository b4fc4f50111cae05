//! Iteration programs: explicit step lists and the named presets.
//!
//! JSON format:
//! `{"steps": [{"op": "matvec"} | {"op": "pointwise", "poly": ...} |
//! {"op": "amp", "poly": ...}], "preset": {...}}`
//! where `poly` is the history-polynomial encoding `[[[e0, ..., et], num, den], ...]`
//! (variable j is the j-th iterate). Exactly one of `steps` / `preset` must be
//! given. Presets:
//! `{"kind": "debiased-power", "steps": T}`,
//! `{"kind": "amp", "fs": [poly, ...]}`,
//! `{"kind": "iamp", "us": [poly, ...]}`.

use serde::{Deserialize, Serialize};

use crate::coeff::rat_int;
use crate::error::{Error, Result};
use crate::poly::HistoryPolynomial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Step {
    Matvec,
    Pointwise { poly: HistoryPolynomial },
    Amp { poly: HistoryPolynomial },
}

// internal, denormalized view
pub use step_view::Step as StepView;
mod step_view {
    use crate::poly::HistoryPolynomial;

    #[derive(Debug, Clone, PartialEq)]
    pub enum Step {
        MatVec,
        Pointwise(HistoryPolynomial),
        AmpStep(HistoryPolynomial),
    }
}
pub use step_view::Step::{AmpStep, MatVec, Pointwise};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Preset {
    DebiasedPower { steps: usize },
    Amp { fs: Vec<HistoryPolynomial> },
    Iamp { us: Vec<HistoryPolynomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfomProgram {
    #[serde(rename = "steps", default, skip_serializing_if = "Option::is_none")]
    pub steps_json: Option<Vec<Step>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

impl GfomProgram {
    pub fn from_steps(steps: Vec<step_view::Step>) -> Self {
        let steps_json = steps
            .into_iter()
            .map(|s| match s {
                MatVec => Step::Matvec,
                Pointwise(poly) => Step::Pointwise { poly },
                AmpStep(poly) => Step::Amp { poly },
            })
            .collect();
        Self { steps_json: Some(steps_json), preset: None }
    }

    pub fn from_preset(preset: Preset) -> Self {
        Self { steps_json: None, preset: Some(preset) }
    }

    /// Resolved step list; presets expand here.
    pub fn steps(&self) -> Result<Vec<step_view::Step>> {
        match (&self.steps_json, &self.preset) {
            (Some(steps), None) => Ok(steps
                .iter()
                .map(|s| match s {
                    Step::Matvec => MatVec,
                    Step::Pointwise { poly } => Pointwise(poly.clone()),
                    Step::Amp { poly } => AmpStep(poly.clone()),
                })
                .collect()),
            (None, Some(p)) => Ok(expand_preset(p)),
            (Some(_), Some(_)) => Err(Error::Config("give either steps or a preset, not both".into())),
            (None, None) => Err(Error::Config("program needs steps or a preset".into())),
        }
    }

    /// AMP nonlinearities when the program is a pure AMP-step sequence.
    pub fn amp_polynomials(&self) -> Result<Vec<HistoryPolynomial>> {
        let steps = self.steps()?;
        steps
            .into_iter()
            .map(|s| match s {
                AmpStep(f) => Ok(f),
                _ => Err(Error::Config("program mixes AMP and raw GFOM steps".into())),
            })
            .collect()
    }

    /// FNV-1a hash of the canonical JSON encoding; recorded in run metadata.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("program serializes");
        fnv1a(json.as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn expand_preset(p: &Preset) -> Vec<step_view::Step> {
    match p {
        Preset::DebiasedPower { steps } => {
            (0..*steps).map(|t| AmpStep(HistoryPolynomial::var(t))).collect()
        }
        Preset::Amp { fs } => fs.iter().cloned().map(AmpStep).collect(),
        Preset::Iamp { us } => iamp_steps(us),
    }
}

/// f_t = w_t * u_t(w_{t-1}, ..., w_0) with u_0 = 1 implicit at t = 0; `us[t-1]`
/// is u_t. The returned steps run w_1 .. w_T.
pub fn iamp_steps(us: &[HistoryPolynomial]) -> Vec<step_view::Step> {
    let mut steps = vec![AmpStep(HistoryPolynomial::var(0))];
    for t in 1..us.len() {
        // us[t-1] is u_t, a polynomial in (w_{t-1}, ..., w_0)
        steps.push(AmpStep(us[t - 1].mul_var(t)));
    }
    steps
}

pub mod presets {
    use super::*;

    pub fn debiased_power(steps: usize) -> GfomProgram {
        GfomProgram::from_preset(Preset::DebiasedPower { steps })
    }

    pub fn amp(fs: Vec<HistoryPolynomial>) -> GfomProgram {
        GfomProgram::from_preset(Preset::Amp { fs })
    }

    pub fn iamp(us: Vec<HistoryPolynomial>) -> GfomProgram {
        GfomProgram::from_preset(Preset::Iamp { us })
    }

    /// The five-step benchmark used across the numeric checks:
    /// [MatVec, w^2, MatVec, w^2 - 1, MatVec].
    pub fn benchmark() -> GfomProgram {
        let sq = |t: usize| {
            let mut e = vec![0u32; t + 1];
            e[t] = 2;
            HistoryPolynomial::from_terms(vec![(e, rat_int(1))])
        };
        let sq_minus_one = |t: usize| {
            let mut e = vec![0u32; t + 1];
            e[t] = 2;
            HistoryPolynomial::from_terms(vec![(e, rat_int(1)), (vec![], rat_int(-1))])
        };
        GfomProgram::from_steps(vec![
            MatVec,
            Pointwise(sq(1)),
            MatVec,
            Pointwise(sq_minus_one(3)),
            MatVec,
        ])
    }
}
