//! Numeric execution of iteration programs on sampled matrices: generic GFOM
//! steps, AMP with empirical or asymptotic Onsager correction, dense-message
//! belief propagation, and iterative AMP.

use serde::{Deserialize, Serialize};

use crate::coeff::rat_to_f64;
use crate::ensemble::MatrixEnsemble;
use crate::error::{Error, Result};
use crate::evolution::{amp_state_evolution, onsager_coefficients};
use crate::matrix::SymMatrix;
use crate::poly::HistoryPolynomial;
use crate::program::{iamp_steps, GfomProgram, StepView};
use crate::Limits;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub n: usize,
    pub seed: u64,
    pub ensemble: MatrixEnsemble,
    pub program_hash: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// x_0, ..., x_T.
    pub iterates: Vec<Vec<f64>>,
    /// Outputs m_t when an output nonlinearity was given.
    pub outputs: Option<Vec<Vec<f64>>>,
    pub meta: RunMeta,
}

impl RunResult {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("x_0 always present")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsagerMode {
    /// b_{s,t} = (1/n) sum_i df_t/dw_s at the current iterates.
    Empirical,
    /// b_{s,t} = E[df_t/dw_s(W_t, ..., W_0)] from the exact state evolution.
    Asymptotic,
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Runs a resolved program: x_0 = all-ones; MatVec multiplies by A; Pointwise
/// applies the polynomial to the coordinatewise history; AMP steps apply the
/// Onsager-corrected update.
pub fn run_gfom(program: &GfomProgram, ens: &MatrixEnsemble, limits: &Limits) -> Result<RunResult> {
    run_gfom_with(program, ens, OnsagerMode::Empirical, limits)
}

pub fn run_gfom_with(
    program: &GfomProgram,
    ens: &MatrixEnsemble,
    onsager: OnsagerMode,
    limits: &Limits,
) -> Result<RunResult> {
    let start = std::time::Instant::now();
    let a = ens.sample()?;
    let steps = program.steps()?;
    let iterates = run_steps(&steps, &a, onsager, limits)?;
    Ok(RunResult {
        iterates,
        outputs: None,
        meta: RunMeta {
            n: ens.n,
            seed: ens.seed,
            ensemble: ens.clone(),
            program_hash: format!("{:016x}", program.hash()),
            wall_ms: start.elapsed().as_millis() as u64,
        },
    })
}

pub fn run_steps(
    steps: &[StepView],
    a: &SymMatrix,
    onsager: OnsagerMode,
    limits: &Limits,
) -> Result<Vec<Vec<f64>>> {
    let n = a.n();
    let mut iterates: Vec<Vec<f64>> = vec![vec![1.0; n]];
    // AMP bookkeeping: f-values of past AMP steps and the symbolic evolution
    let mut amp_fs: Vec<HistoryPolynomial> = Vec::new();
    let mut amp_fvals: Vec<Vec<f64>> = Vec::new();
    let asymptotic_b: Option<Vec<Vec<crate::Rat>>> = match onsager {
        OnsagerMode::Asymptotic => {
            let fs: Vec<HistoryPolynomial> = steps
                .iter()
                .map(|s| match s {
                    StepView::AmpStep(f) => Ok(f.clone()),
                    _ => Err(Error::Config("asymptotic Onsager mode needs a pure AMP program".into())),
                })
                .collect::<Result<_>>()?;
            let evo = amp_state_evolution(&fs, limits)?;
            Some(onsager_coefficients(&fs, &evo.states, limits)?)
        }
        OnsagerMode::Empirical => None,
    };

    for (idx, step) in steps.iter().enumerate() {
        let next = match step {
            StepView::MatVec => a.matvec(iterates.last().unwrap()),
            StepView::Pointwise(f) => {
                if f.arity() > iterates.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "step {idx}: polynomial wants {} iterates, have {}",
                        f.arity(),
                        iterates.len()
                    )));
                }
                pointwise_eval(f, &iterates)
            }
            StepView::AmpStep(f) => {
                let t = amp_fs.len(); // this is f_t producing w_{t+1}
                if iterates.len() != t + 1 {
                    return Err(Error::Config(format!(
                        "step {idx}: AMP steps cannot mix with raw steps"
                    )));
                }
                let fval = pointwise_eval(f, &iterates);
                let mut next = a.matvec(&fval);
                for s in 1..=t {
                    let b = match (&asymptotic_b, onsager) {
                        (Some(b), _) => rat_to_f64(&b[t][s]),
                        (None, _) => {
                            // empirical: (1/n) sum_i df_t/dw_s at the current history
                            let df = f.partial(s);
                            let mut acc = 0.0;
                            let mut row = vec![0.0; iterates.len()];
                            for i in 0..n {
                                for (j, it) in iterates.iter().enumerate() {
                                    row[j] = it[i];
                                }
                                acc += df.eval_f64(&row);
                            }
                            acc / n as f64
                        }
                    };
                    if b != 0.0 {
                        for (o, v) in next.iter_mut().zip(&amp_fvals[s - 1]) {
                            *o -= b * v;
                        }
                    }
                }
                amp_fs.push(f.clone());
                amp_fvals.push(fval);
                next
            }
        };
        check_finite(&next, idx)?;
        iterates.push(next);
    }
    Ok(iterates)
}

fn pointwise_eval(f: &HistoryPolynomial, iterates: &[Vec<f64>]) -> Vec<f64> {
    let n = iterates[0].len();
    let mut row = vec![0.0; iterates.len()];
    (0..n)
        .map(|i| {
            for (j, it) in iterates.iter().enumerate() {
                row[j] = it[i];
            }
            f.eval_f64(&row)
        })
        .collect()
}

/// AMP run with optional output nonlinearities m_t = ftilde_t(w_t, ..., w_0).
pub fn run_amp(
    fs: &[HistoryPolynomial],
    ftildes: Option<&[HistoryPolynomial]>,
    ens: &MatrixEnsemble,
    onsager: OnsagerMode,
    limits: &Limits,
) -> Result<RunResult> {
    let start = std::time::Instant::now();
    let program = GfomProgram::from_preset(crate::program::Preset::Amp { fs: fs.to_vec() });
    let a = ens.sample()?;
    let steps = program.steps()?;
    let iterates = run_steps(&steps, &a, onsager, limits)?;
    let outputs = ftildes.map(|fts| {
        fts.iter()
            .enumerate()
            .map(|(t, ft)| pointwise_eval(ft, &iterates[..=t.min(iterates.len() - 1)]))
            .collect()
    });
    Ok(RunResult {
        iterates,
        outputs,
        meta: RunMeta {
            n: ens.n,
            seed: ens.seed,
            ensemble: ens.clone(),
            program_hash: format!("{:016x}", program.hash()),
            wall_ms: start.elapsed().as_millis() as u64,
        },
    })
}

pub struct BpRunResult {
    /// m^t_i for t = 0..T (outputs; m^0 = all-ones).
    pub outputs: Vec<Vec<f64>>,
    /// Full-sum fields w^t_i = sum_k A_ik m^{t-1}_{k->i} for t = 1..T.
    pub fields: Vec<Vec<f64>>,
    /// Final-generation cavity messages, row-major [i * n + j] = m_{i->j}.
    pub final_messages: Vec<f64>,
}

/// Dense belief propagation with cavity messages m_{i->j}. The nonlinearity at
/// generation t sees the t exclusion sums (newest first in chronological
/// variable order: variable r is the sum over generation r-1 messages) plus the
/// constant initial message as variable 0.
///
/// Messages m^t for all generations are retained (the update needs every
/// earlier generation), so memory is T * n^2 and n is guarded.
pub fn run_bp(
    fs: &[HistoryPolynomial],
    ftildes: &[HistoryPolynomial],
    ens: &MatrixEnsemble,
    limits: &Limits,
) -> Result<BpRunResult> {
    let n = ens.n;
    if n > limits.bp_max_n {
        return Err(Error::BudgetExceeded {
            what: "dense cavity-message storage".into(),
            needed: n,
            limit: limits.bp_max_n,
        });
    }
    if ens.diag != crate::ensemble::DiagLaw::Zero {
        return Err(Error::Config("belief propagation requires a zero-diagonal ensemble".into()));
    }
    let t_max = fs.len();
    let a = ens.sample()?;
    // generations of messages; m^0 = 1
    let mut messages: Vec<Vec<f64>> = vec![vec![1.0; n * n]];
    // full sums per generation: fields[r][i] = sum_k A_ik m^r_{k->i}
    let mut fields: Vec<Vec<f64>> = Vec::new();
    let mut outputs: Vec<Vec<f64>> = vec![vec![1.0; n]];

    for t in 1..=t_max {
        // field of the previous generation
        let prev = &messages[t - 1];
        let mut g = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a.get(i, k) * prev[k * n + i];
            }
            g[i] = acc;
        }
        fields.push(g);
        // m^t_{i->j} = f_t(args) with args[r] = sum_{k != j} A_ik m^{r-1}_{k->i}
        //            = fields[r-1][i] - A_ij m^{r-1}_{j->i}, and args[0] = 1
        let f = &fs[t - 1];
        let mut next = vec![0.0; n * n];
        let mut args = vec![0.0; t + 1];
        args[0] = 1.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let aij = a.get(i, j);
                for r in 1..=t {
                    args[r] = fields[r - 1][i] - aij * messages[r - 1][j * n + i];
                }
                next[i * n + j] = f.eval_f64(&args);
            }
        }
        check_finite(&next, t)?;
        messages.push(next);
        // output m^t_i = ftilde_t(full sums, 1)
        let ft = &ftildes[t - 1];
        let mut out = vec![0.0; n];
        let mut oargs = vec![0.0; t + 1];
        oargs[0] = 1.0;
        for i in 0..n {
            for r in 1..=t {
                oargs[r] = fields[r - 1][i];
            }
            out[i] = ft.eval_f64(&oargs);
        }
        outputs.push(out);
    }
    Ok(BpRunResult { outputs, fields, final_messages: messages.pop().unwrap() })
}

pub struct IampRunResult {
    pub run: RunResult,
    /// x_T = sum_{t=1}^T w_t * u_t(w_{t-1}, ..., w_0).
    pub candidate: Vec<f64>,
    /// <x_T, A x_T> / n.
    pub objective: f64,
}

/// Iterative AMP: f_t = w_t * u_t(history); `us[t-1]` is u_t for t = 1..T.
pub fn run_iamp(us: &[HistoryPolynomial], ens: &MatrixEnsemble, limits: &Limits) -> Result<IampRunResult> {
    let start = std::time::Instant::now();
    let steps = iamp_steps(us);
    let a = ens.sample()?;
    let iterates = run_steps(&steps, &a, OnsagerMode::Empirical, limits)?;
    let n = ens.n;
    let t_max = us.len();
    let mut candidate = vec![0.0; n];
    let mut row = vec![0.0; iterates.len()];
    for i in 0..n {
        for (j, it) in iterates.iter().enumerate() {
            row[j] = it[i];
        }
        let mut acc = 0.0;
        for t in 1..=t_max {
            acc += row[t] * us[t - 1].eval_f64(&row[..t]);
        }
        candidate[i] = acc;
    }
    let ax = a.matvec(&candidate);
    let objective = crate::matrix::dot_product(&candidate, &ax) / n as f64;
    let program = GfomProgram::from_preset(crate::program::Preset::Iamp { us: us.to_vec() });
    Ok(IampRunResult {
        run: RunResult {
            iterates,
            outputs: None,
            meta: RunMeta {
                n,
                seed: ens.seed,
                ensemble: ens.clone(),
                program_hash: format!("{:016x}", program.hash()),
                wall_ms: start.elapsed().as_millis() as u64,
            },
        },
        candidate,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;
    use crate::program::presets;

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn matvec_on_two_by_two() {
        let ens = MatrixEnsemble::rademacher_zero_diag(2, 0);
        let program = GfomProgram::from_steps(vec![StepView::MatVec]);
        let run = run_gfom(&program, &ens, &limits()).unwrap();
        let a = ens.sample().unwrap().get(0, 1);
        assert_eq!(run.iterates[1], vec![a, a]);
    }

    #[test]
    fn debiased_power_tiny() {
        // n = 2, variant scaling: A_{12} = ±1, x_2 = A x_1 - x_0 = 0
        let ens = MatrixEnsemble::rademacher_variant(2, 3);
        let run = run_gfom(&presets::debiased_power(2), &ens, &limits()).unwrap();
        assert_eq!(run.iterates[2], vec![0.0, 0.0]);
    }

    #[test]
    fn amp_identity_is_debiased_power_bit_for_bit() {
        let ens = MatrixEnsemble::gaussian_zero_diag(200, 11);
        let fs: Vec<HistoryPolynomial> = (0..4).map(HistoryPolynomial::var).collect();
        let amp = run_amp(&fs, None, &ens, OnsagerMode::Empirical, &limits()).unwrap();
        // x_{t+1} = A x_t - x_{t-1} computed directly
        let a = ens.sample().unwrap();
        let mut xs = vec![vec![1.0; 200]];
        for t in 0..4 {
            let mut next = a.matvec(&xs[t]);
            if t >= 1 {
                for (o, v) in next.iter_mut().zip(&xs[t - 1]) {
                    *o -= v;
                }
            }
            xs.push(next);
        }
        for t in 0..=4 {
            assert_eq!(amp.iterates[t], xs[t], "iterate {t}");
        }
    }

    #[test]
    fn empirical_and_asymptotic_onsager_close() {
        let ens = MatrixEnsemble::gaussian_zero_diag(600, 7);
        let fs = vec![
            HistoryPolynomial::var(0),
            HistoryPolynomial::from_terms(vec![(vec![0, 2], rat(1, 2)), (vec![], rat(-1, 2))]),
            HistoryPolynomial::from_terms(vec![(vec![0, 0, 2], rat(1, 2)), (vec![0, 1], rat(1, 4))]),
        ];
        let e = run_amp(&fs, None, &ens, OnsagerMode::Empirical, &limits()).unwrap();
        let a = run_amp(&fs, None, &ens, OnsagerMode::Asymptotic, &limits()).unwrap();
        let gap = crate::matrix::linf_dist(e.last(), a.last());
        assert!(gap < 0.5, "onsager variants diverged: {gap}");
        assert!(gap > 0.0);
    }

    #[test]
    fn bp_first_generation_is_nonbacktracking_sum() {
        let ens = MatrixEnsemble::rademacher_zero_diag(30, 9);
        let fs = vec![HistoryPolynomial::var(1)];
        let res = run_bp(&fs, &fs, &ens, &limits()).unwrap();
        let a = ens.sample().unwrap();
        // m^1_{i->j} = sum_{k != j} A_ik
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let expect: f64 = (0..30).filter(|&k| k != j).map(|k| a.get(i, k)).sum();
                let got = res.final_messages[i * 30 + j];
                assert!((got - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn iamp_objective_small() {
        // u_t = 1, T = 3: objective ~ 2 (T-1) = 4 at moderate n
        let us: Vec<HistoryPolynomial> = (0..3).map(|_| HistoryPolynomial::constant(rat(1, 1))).collect();
        let ens = MatrixEnsemble::gaussian_zero_diag(1500, 21);
        let res = run_iamp(&us, &ens, &limits()).unwrap();
        assert!((res.objective - 4.0).abs() < 0.8, "objective {}", res.objective);
    }

    #[test]
    fn determinism() {
        let ens = MatrixEnsemble::gaussian_zero_diag(100, 5);
        let p = presets::benchmark();
        let r1 = run_gfom(&p, &ens, &limits()).unwrap();
        let r2 = run_gfom(&p, &ens, &limits()).unwrap();
        assert_eq!(r1.iterates, r2.iterates);
    }

    #[test]
    fn nonfinite_detected() {
        // squaring without damping blows up quickly at large norm
        let sq = HistoryPolynomial::from_terms(vec![(vec![0, 0, 0, 20], rat(1_000_000, 1))]);
        let program = GfomProgram::from_steps(vec![
            StepView::MatVec,
            StepView::MatVec,
            StepView::MatVec,
            StepView::Pointwise(sq.clone()),
            StepView::Pointwise(HistoryPolynomial::from_terms(vec![(vec![0, 0, 0, 0, 20], rat(1_000_000, 1))])),
            StepView::Pointwise(HistoryPolynomial::from_terms(vec![(vec![0, 0, 0, 0, 0, 20], rat(1_000_000, 1))])),
        ]);
        let ens = MatrixEnsemble::gaussian_zero_diag(50, 1);
        let err = run_gfom(&program, &ens, &limits()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "got {err:?}");
    }
}
