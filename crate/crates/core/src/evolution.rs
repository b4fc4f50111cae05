//! Asymptotic state evolution: the tree-calculus recursion for general
//! first-order methods, the Gaussian recursion for AMP, Onsager coefficients,
//! and the iterative-AMP objective.

use crate::coeff::Rat;
use crate::error::{Error, Result};
use crate::poly::HistoryPolynomial;
use crate::program::{GfomProgram, StepView};
use crate::tree::{apply_polynomial, TreeState};
use crate::Limits;

/// Runs the tree-calculus recursion: X_0 = singleton; multiplication by A maps
/// X to X+ + X-; a pointwise polynomial acts through branch-matching products;
/// an AMP step applies the polynomial and extends the root.
pub fn gfom_asymptotic_run(program: &GfomProgram, limits: &Limits) -> Result<Vec<TreeState>> {
    let steps = program.steps()?;
    let mut states = vec![TreeState::one()];
    for (idx, step) in steps.iter().enumerate() {
        let next = match step {
            StepView::MatVec => {
                let x = states.last().unwrap();
                x.plus().add(&x.minus())
            }
            StepView::Pointwise(f) => {
                apply_polynomial(f, &states, limits).map_err(|e| step_err(e, idx))?
            }
            StepView::AmpStep(f) => {
                apply_polynomial(f, &states, limits).map_err(|e| step_err(e, idx))?.plus()
            }
        };
        states.push(next);
    }
    Ok(states)
}

fn step_err(e: Error, idx: usize) -> Error {
    match e {
        Error::BudgetExceeded { what, needed, limit } => Error::BudgetExceeded {
            what: format!("step {idx}: {what}"),
            needed,
            limit,
        },
        other => other,
    }
}

pub struct AmpEvolution {
    /// W_0 = 1, W_{t+1} = f_t(W_t, ..., W_0)+.
    pub states: Vec<TreeState>,
    /// Gram matrix E[W_s W_t] (exact rationals).
    pub covariance: Vec<Vec<Rat>>,
}

/// The Gaussian recursion for AMP with nonlinearities `fs[t]` (the polynomial
/// applied at time t to the history (w_t, ..., w_0), indexed chronologically).
pub fn amp_state_evolution(fs: &[HistoryPolynomial], limits: &Limits) -> Result<AmpEvolution> {
    let mut states = vec![TreeState::one()];
    for (t, f) in fs.iter().enumerate() {
        let val = apply_polynomial(f, &states, limits)?;
        let next = val.plus();
        if !next.is_gaussian() {
            return Err(Error::Internal(format!(
                "AMP state W_{} leaks outside the one-branch trees",
                t + 1
            )));
        }
        states.push(next);
    }
    let t_max = states.len();
    let mut covariance = vec![vec![Rat::from_integer(0.into()); t_max]; t_max];
    for s in 0..t_max {
        for t in s..t_max {
            let v = states[s].inner_product(&states[t]);
            covariance[s][t] = v.clone();
            covariance[t][s] = v;
        }
    }
    Ok(AmpEvolution { states, covariance })
}

/// Asymptotic Onsager coefficients b[t][s] = E[df_t/dw_s(W_t, ..., W_0)] for
/// 0 <= s <= t (the iteration uses s >= 1).
pub fn onsager_coefficients(
    fs: &[HistoryPolynomial],
    states: &[TreeState],
    limits: &Limits,
) -> Result<Vec<Vec<Rat>>> {
    let mut out = Vec::with_capacity(fs.len());
    for (t, f) in fs.iter().enumerate() {
        let mut row = Vec::with_capacity(t + 1);
        for s in 0..=t {
            let df = f.partial(s);
            let val = apply_polynomial(&df, &states[..=t], limits)?;
            row.push(val.expectation());
        }
        out.push(row);
    }
    Ok(out)
}

pub struct IampReport {
    /// U_0 = 1, U_t = u_t(W_{t-1}, ..., W_0).
    pub u_states: Vec<TreeState>,
    /// W_0 = 1, W_{t+1} = (U_t W_t)+.
    pub w_states: Vec<TreeState>,
    pub e_u: Vec<Rat>,
    pub e_w2: Vec<Rat>,
    /// 2 sum_{t=2}^T E[U_t] E[W_t^2].
    pub value: Rat,
}

/// Iterative AMP with f_t = w_t * u_t(w_{t-1}, ..., w_0); `us[t-1]` is u_t for
/// t = 1..T. Verifies the depth structure: W_t is supported on one-branch trees
/// of depth exactly t, U_t on trees of depth at most t-1.
pub fn iamp_objective(us: &[HistoryPolynomial], limits: &Limits) -> Result<IampReport> {
    let t_max = us.len(); // T
    let mut w_states = vec![TreeState::one()];
    let mut u_states = vec![TreeState::one()];
    for t in 1..=t_max {
        // W_t = (U_{t-1} W_{t-1})+
        let prev_u = &u_states[t - 1];
        let prev_w = &w_states[t - 1];
        let w = prev_u.mul(prev_w, limits)?.plus();
        let depth = w.depth();
        if depth != Some(t) || !w.is_gaussian() {
            return Err(Error::Internal(format!(
                "W_{t} expected one-branch support at depth exactly {t}, got depth {depth:?}"
            )));
        }
        if w.iter().any(|(cd, _)| cd.tree().unwrap().depth != t) {
            return Err(Error::Internal(format!("W_{t} mixes depths")));
        }
        w_states.push(w);
        // U_t = u_t(W_{t-1}, ..., W_0)
        let u = apply_polynomial(&us[t - 1], &w_states[..t], limits)?;
        if let Some(du) = u.depth() {
            if du > t - 1 {
                return Err(Error::Internal(format!("U_{t} has depth {du} > {}", t - 1)));
            }
        }
        u_states.push(u);
    }
    let e_u: Vec<Rat> = u_states.iter().map(|u| u.expectation()).collect();
    let e_w2: Vec<Rat> = w_states.iter().map(|w| w.second_moment()).collect();
    let mut value = Rat::from_integer(0.into());
    for t in 2..=t_max {
        value += e_u[t].clone() * e_w2[t].clone();
    }
    value *= Rat::from_integer(2.into());
    Ok(IampReport { u_states, w_states, e_u, e_w2, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::coeff::{rat, rat_int};
    use crate::diagram::Diagram;
    use crate::program::presets;

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn single_matvec_gives_edge() {
        let program = GfomProgram::from_steps(vec![Step::MatVec]);
        let states = gfom_asymptotic_run(&program, &limits()).unwrap();
        let edge = canonicalize(&Diagram::rooted_path(1)).unwrap();
        assert_eq!(states[1], TreeState::from_tree(edge));
    }

    #[test]
    fn square_example_run() {
        // [MatVec, w^2, MatVec] -> X_3 = (1,2)-tree + edge
        let program = GfomProgram::from_steps(vec![
            Step::MatVec,
            Step::Pointwise(HistoryPolynomial::from_terms(vec![(vec![0, 2], rat(1, 1))])),
            Step::MatVec,
        ]);
        let states = gfom_asymptotic_run(&program, &limits()).unwrap();
        let t12 = canonicalize(
            &Diagram::new(4, Some(0), [(0, 1, 1, crate::EdgeLabel::Plain), (1, 2, 1, crate::EdgeLabel::Plain), (1, 3, 1, crate::EdgeLabel::Plain)]).unwrap(),
        )
        .unwrap();
        let edge = canonicalize(&Diagram::rooted_path(1)).unwrap();
        let expect = TreeState::from_tree(t12).add(&TreeState::from_tree(edge));
        assert_eq!(states[3], expect);
    }

    #[test]
    fn amp_identity_gives_paths() {
        // f_t = latest iterate: W_t = t-path, E[W_t^2] = 1
        let fs: Vec<HistoryPolynomial> = (0..4).map(|t| HistoryPolynomial::var(t)).collect();
        let evo = amp_state_evolution(&fs, &limits()).unwrap();
        for (t, w) in evo.states.iter().enumerate() {
            let path = canonicalize(&Diagram::rooted_path(t)).unwrap();
            assert_eq!(*w, TreeState::from_tree(path));
            assert_eq!(evo.covariance[t][t], rat(1, 1));
        }
        // distinct paths are orthogonal
        assert_eq!(evo.covariance[1][2], rat(0, 1));
    }

    #[test]
    fn amp_square_fourth_moment() {
        // f_0 = w_0, f_1(w_1) = w_1^2: E[W_2^2] = E[W_1^4] = 3
        let fs = vec![
            HistoryPolynomial::var(0),
            HistoryPolynomial::from_terms(vec![(vec![0, 2], rat(1, 1))]),
        ];
        let evo = amp_state_evolution(&fs, &limits()).unwrap();
        assert_eq!(evo.covariance[2][2], rat(3, 1));
    }

    #[test]
    fn scalar_state_evolution_recursion() {
        // sigma_{t+1}^2 = E f(Z_t)^2 for f depending only on the latest iterate:
        // f(w) = w^2 - 1 centered square
        let f_of = |t: usize| {
            HistoryPolynomial::from_terms(vec![(exp_at(t, 2), rat(1, 1)), (vec![], rat(-1, 1))])
        };
        let fs = vec![HistoryPolynomial::var(0), f_of(1), f_of(2)];
        let evo = amp_state_evolution(&fs, &limits()).unwrap();
        // sigma_1^2 = 1; E[(Z^2-1)^2] with Z ~ N(0, s) is 2s^2 + (s-1)^2
        let s1 = evo.covariance[1][1].clone();
        assert_eq!(s1, rat(1, 1));
        let s2 = evo.covariance[2][2].clone();
        assert_eq!(s2, rat(2, 1)); // 2*1 + 0
        let s3 = evo.covariance[3][3].clone();
        // E[(Z^2 - 1)^2], Z ~ N(0,2): 2*4 + (2-1)^2 = 9
        assert_eq!(s3, rat(9, 1));
    }

    fn exp_at(t: usize, e: u32) -> Vec<u32> {
        let mut v = vec![0u32; t + 1];
        v[t] = e;
        v
    }

    #[test]
    fn onsager_examples() {
        // identity f: b_{t,t} = 1
        let fs: Vec<HistoryPolynomial> = (0..3).map(HistoryPolynomial::var).collect();
        let evo = amp_state_evolution(&fs, &limits()).unwrap();
        let b = onsager_coefficients(&fs, &evo.states, &limits()).unwrap();
        for (t, row) in b.iter().enumerate() {
            assert_eq!(row[t], rat(1, 1));
            for s in 0..t {
                assert_eq!(row[s], rat(0, 1));
            }
        }
        // f(w) = w^2 at centered W: b = E[2W] = 0
        let fs = vec![
            HistoryPolynomial::var(0),
            HistoryPolynomial::from_terms(vec![(vec![0, 2], rat(1, 1))]),
        ];
        let evo = amp_state_evolution(&fs, &limits()).unwrap();
        let b = onsager_coefficients(&fs, &evo.states, &limits()).unwrap();
        assert_eq!(b[1][1], rat(0, 1));
    }

    #[test]
    fn iamp_constant_controls() {
        // u_t = 1: value = 2 (T - 1), W_t = t-path, depths exact
        let t_max = 5;
        let us: Vec<HistoryPolynomial> = (0..t_max).map(|_| HistoryPolynomial::constant(rat_int(1))).collect();
        let report = iamp_objective(&us, &limits()).unwrap();
        assert_eq!(report.value, rat(2 * (t_max as i64 - 1), 1));
        for t in 0..=t_max {
            assert_eq!(report.e_w2[t], rat(1, 1));
        }
        // T = 1: empty objective sum
        let report = iamp_objective(&us[..1], &limits()).unwrap();
        assert_eq!(report.value, rat(0, 1));
    }

    #[test]
    fn iamp_square_control() {
        // u_2(w_1) = w_1^2: E[U_2] = E[W_1^2] = 1
        let us = vec![
            HistoryPolynomial::constant(rat_int(1)),
            HistoryPolynomial::from_terms(vec![(vec![0, 2], rat(1, 1))]),
            HistoryPolynomial::constant(rat_int(1)),
        ];
        let report = iamp_objective(&us, &limits()).unwrap();
        assert_eq!(report.e_u[2], rat(1, 1));
        // W_2 = (U_1 W_1)+ = 2-path; E[W_2^2] = 1
        assert_eq!(report.e_w2[2], rat(1, 1));
        // E[W_3^2] = E[(U_2 W_2)^2] = E[W_1^4 W_2^2] with W_1, W_2 indep = 3
        assert_eq!(report.e_w2[3], rat(3, 1));
    }

    #[test]
    fn debiased_power_preset_matches_paths() {
        let program = presets::debiased_power(4);
        let states = gfom_asymptotic_run(&program, &limits()).unwrap();
        for (t, s) in states.iter().enumerate() {
            let path = canonicalize(&Diagram::rooted_path(t)).unwrap();
            assert_eq!(*s, TreeState::from_tree(path));
        }
    }
}
