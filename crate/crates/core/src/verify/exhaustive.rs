//! Exact oracle over exhaustively enumerated sign ensembles: zero-diagonal
//! matrices with entries ±scale, where scale = 1/sqrt(n) or the 1/sqrt(n-1)
//! variant. Values live in the quadratic extension Q[sqrt(base)] so everything
//! stays exact; when base is a perfect square the representation folds back to
//! the rationals.
//!
//! This module is deliberately independent of the floating-point evaluation
//! path: it re-derives injective sums by direct recursion over embeddings.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::coeff::{Coefficient, Rat};
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};
use crate::expr::DiagramExpression;

/// a + b sqrt(base), exact. base is fixed per computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSqrt {
    pub rat: Rat,
    pub irr: Rat,
    pub base: u64,
}

impl QSqrt {
    pub fn new(rat: Rat, irr: Rat, base: u64) -> Self {
        // fold perfect squares back into the rational part
        let r = (base as f64).sqrt().round() as u64;
        if r * r == base && !irr.is_zero() {
            let folded = rat + irr * Rat::from_integer(BigInt::from(r));
            return Self { rat: folded, irr: Rat::zero(), base };
        }
        Self { rat, irr, base }
    }

    pub fn zero(base: u64) -> Self {
        Self { rat: Rat::zero(), irr: Rat::zero(), base }
    }

    pub fn one(base: u64) -> Self {
        Self { rat: Rat::one(), irr: Rat::zero(), base }
    }

    pub fn from_rat(r: Rat, base: u64) -> Self {
        Self { rat: r, irr: Rat::zero(), base }
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.irr.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.base, o.base);
        Self::new(&self.rat + &o.rat, &self.irr + &o.irr, self.base)
    }

    pub fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.base, o.base);
        Self::new(&self.rat - &o.rat, &self.irr - &o.irr, self.base)
    }

    pub fn neg(&self) -> Self {
        Self { rat: -self.rat.clone(), irr: -self.irr.clone(), base: self.base }
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.base, o.base);
        let b = Rat::from_integer(BigInt::from(self.base));
        Self::new(
            &self.rat * &o.rat + (&self.irr * &o.irr) * &b,
            &self.rat * &o.irr + &self.irr * &o.rat,
            self.base,
        )
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Self { rat: &self.rat * r, irr: &self.irr * r, base: self.base }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one(self.base);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn to_f64(&self) -> f64 {
        crate::coeff::rat_to_f64(&self.rat)
            + crate::coeff::rat_to_f64(&self.irr) * (self.base as f64).sqrt()
    }

    /// The rational value, requiring the irrational part to vanish.
    pub fn expect_rational(&self) -> Result<Rat> {
        if self.irr.is_zero() {
            Ok(self.rat.clone())
        } else {
            Err(Error::Internal(format!(
                "value has a residual sqrt({}) component: {} + {} sqrt",
                self.base, self.rat, self.irr
            )))
        }
    }
}

/// Exact symmetric sign matrix: entries ±scale where scale^2 = 1/base.
pub struct ExactMatrix {
    pub n: usize,
    pub base: u64,
    /// sign[i][j] in {-1, 0, +1}; diagonal 0.
    signs: Vec<i8>,
}

impl ExactMatrix {
    pub fn entry(&self, i: usize, j: usize) -> QSqrt {
        let s = self.signs[i * self.n + j];
        if s == 0 {
            return QSqrt::zero(self.base);
        }
        // ±1/sqrt(base) = ±sqrt(base)/base
        let mag = Rat::new(BigInt::from(s), BigInt::from(self.base));
        QSqrt::new(Rat::zero(), mag, self.base)
    }

    /// Entry squared, always rational: 1/base off-diagonal.
    pub fn entry_sq(&self, i: usize, j: usize) -> Rat {
        if self.signs[i * self.n + j] == 0 {
            Rat::zero()
        } else {
            Rat::new(BigInt::one(), BigInt::from(self.base))
        }
    }

    pub fn matvec(&self, x: &[QSqrt]) -> Vec<QSqrt> {
        (0..self.n)
            .map(|i| {
                let mut acc = QSqrt::zero(self.base);
                for j in 0..self.n {
                    if self.signs[i * self.n + j] != 0 {
                        acc = acc.add(&self.entry(i, j).mul(&x[j]));
                    }
                }
                acc
            })
            .collect()
    }
}

/// Every zero-diagonal sign pattern at dimension n; scale per `variant`.
/// 2^(n(n-1)/2) matrices, so n <= 5 is enforced.
pub fn exhaustive_sign_matrices(n: usize, variant: bool) -> Result<Vec<ExactMatrix>> {
    if n > 5 {
        return Err(Error::BudgetExceeded {
            what: "exhaustive sign ensemble".into(),
            needed: n,
            limit: 5,
        });
    }
    let base = if variant { (n - 1) as u64 } else { n as u64 };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let mut out = Vec::with_capacity(1 << m);
    for mask in 0u32..(1 << m) {
        let mut signs = vec![0i8; n * n];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            let s: i8 = if mask >> b & 1 == 1 { 1 } else { -1 };
            signs[i * n + j] = s;
            signs[j * n + i] = s;
        }
        out.push(ExactMatrix { n, base, signs });
    }
    Ok(out)
}

/// Injective character of a diagram, exactly. Rooted diagrams evaluate at the
/// given coordinate; scalar diagrams ignore it.
pub fn exact_diagram_value(d: &Diagram, a: &ExactMatrix, coord: usize) -> QSqrt {
    let mut assignment = vec![usize::MAX; d.vertex_count()];
    if let Some(r) = d.root() {
        assignment[r] = coord;
    }
    exact_rec(d, a, &mut assignment, 0)
}

fn exact_rec(d: &Diagram, a: &ExactMatrix, assignment: &mut [usize], v: usize) -> QSqrt {
    let n = a.n;
    if v == assignment.len() {
        let mut p = QSqrt::one(a.base);
        let inv_n = Rat::new(BigInt::one(), BigInt::from(n));
        for e in d.edges() {
            let (x, y) = (assignment[e.u], assignment[e.v]);
            match e.label {
                EdgeLabel::Plain => p = p.mul(&a.entry(x, y).pow(e.multiplicity)),
                EdgeLabel::TwoLabeled => {
                    let sq = a.entry_sq(x, y) - &inv_n;
                    let f = QSqrt::from_rat(sq, a.base).pow(e.multiplicity);
                    p = p.mul(&f);
                }
            }
            if p.is_zero() {
                return p;
            }
        }
        return p;
    }
    if assignment[v] != usize::MAX {
        return exact_rec(d, a, assignment, v + 1);
    }
    let mut s = QSqrt::zero(a.base);
    'next: for cand in 0..n {
        for w in 0..assignment.len() {
            if assignment[w] == cand {
                continue 'next;
            }
        }
        assignment[v] = cand;
        s = s.add(&exact_rec(d, a, assignment, v + 1));
        assignment[v] = usize::MAX;
    }
    s
}

/// Exact evaluation of an expression at one coordinate (coefficients evaluated
/// exactly at n; half-integer exponents are rejected).
pub fn exact_expression_value(
    e: &DiagramExpression,
    a: &ExactMatrix,
    coord: usize,
) -> Result<QSqrt> {
    let mut acc = QSqrt::zero(a.base);
    for (cd, c) in e.iter() {
        let w = c.eval_exact(a.n as u64)?;
        let v = exact_diagram_value(cd.diagram(), a, coord);
        acc = acc.add(&v.scale(&w));
    }
    Ok(acc)
}

/// Exact ensemble average of `f` over every sign matrix.
pub fn exhaustive_expectation(
    n: usize,
    variant: bool,
    mut f: impl FnMut(&ExactMatrix) -> QSqrt,
) -> Result<QSqrt> {
    let mats = exhaustive_sign_matrices(n, variant)?;
    let count = mats.len();
    let base = mats[0].base;
    let mut acc = QSqrt::zero(base);
    for m in &mats {
        acc = acc.add(&f(m));
    }
    Ok(acc.scale(&Rat::new(BigInt::one(), BigInt::from(count))))
}

/// E[Z_expr at coordinate 0], exact, over the standard-scaling zero-diagonal
/// sign ensemble.
pub fn exhaustive_rademacher_expectation(e: &DiagramExpression, n: usize) -> Result<Rat> {
    let v = exhaustive_expectation(n, false, |m| {
        exact_expression_value(e, m, 0).expect("coefficients must be integral in n")
    })?;
    v.expect_rational()
}

/// Debiased power iteration x_{t+1} = A x_t - x_{t-1}, exactly.
pub fn exact_debiased_power(a: &ExactMatrix, t_max: usize) -> Vec<Vec<QSqrt>> {
    let n = a.n;
    let mut xs: Vec<Vec<QSqrt>> = vec![vec![QSqrt::one(a.base); n]];
    for t in 0..t_max {
        let mut next = a.matvec(&xs[t]);
        if t >= 1 {
            for (o, v) in next.iter_mut().zip(&xs[t - 1]) {
                *o = o.sub(v);
            }
        }
        xs.push(next);
    }
    xs
}

/// Power iteration on the non-backtracking walk matrix:
/// m_0 = 1, m_{t+1, k->i} = sum_{l != i} A_kl m_{t, l->k},
/// x_{t+1, i} = sum_k A_ik m_{t, k->i}. Exact.
pub fn exact_nonbacktracking_power(a: &ExactMatrix, t_max: usize) -> Vec<Vec<QSqrt>> {
    let n = a.n;
    let mut messages: Vec<Vec<QSqrt>> = vec![vec![QSqrt::one(a.base); n * n]];
    let mut xs: Vec<Vec<QSqrt>> = vec![vec![QSqrt::one(a.base); n]];
    for t in 0..t_max {
        let prev = &messages[t];
        // output first: x_{t+1, i} = sum_k A_ik m_{t, k->i}
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = QSqrt::zero(a.base);
            for k in 0..n {
                acc = acc.add(&a.entry(i, k).mul(&prev[k * n + i]));
            }
            x.push(acc);
        }
        xs.push(x);
        let mut next = vec![QSqrt::zero(a.base); n * n];
        for k in 0..n {
            for i in 0..n {
                if i == k {
                    continue;
                }
                let mut acc = QSqrt::zero(a.base);
                for l in 0..n {
                    if l == i {
                        continue;
                    }
                    acc = acc.add(&a.entry(k, l).mul(&prev[l * n + k]));
                }
                next[k * n + i] = acc;
            }
        }
        messages.push(next);
    }
    xs
}

/// The t-path character at one coordinate, exact.
pub fn exact_path_value(a: &ExactMatrix, t: usize, coord: usize) -> QSqrt {
    exact_diagram_value(&Diagram::rooted_path(t), a, coord)
}

/// Evaluates a Coefficient exactly at n, as a rational.
pub fn coefficient_at(c: &Coefficient, n: u64) -> Result<Rat> {
    c.eval_exact(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::exact_second_moment;
    use crate::canon::canonicalize;
    use crate::coeff::rat;
    use crate::diagram::EdgeLabel::Plain;

    #[test]
    fn qsqrt_arithmetic() {
        let a = QSqrt::new(rat(1, 2), rat(1, 3), 5);
        let b = QSqrt::new(rat(-1, 2), rat(2, 3), 5);
        let p = a.mul(&b);
        // (1/2 + 1/3 s)(-1/2 + 2/3 s) with s^2 = 5: rat = -1/4 + 10/9, irr = 1/3 - 1/6
        assert_eq!(p.rat, rat(-1, 4) + rat(10, 9));
        assert_eq!(p.irr, rat(1, 6));
        // perfect square folds
        let c = QSqrt::new(rat(0, 1), rat(1, 1), 4);
        assert!(c.is_rational());
        assert_eq!(c.rat, rat(2, 1));
    }

    #[test]
    fn ensemble_size_and_entries() {
        let mats = exhaustive_sign_matrices(4, false).unwrap();
        assert_eq!(mats.len(), 64);
        let m = &mats[17];
        assert!(m.entry(0, 0).is_zero());
        let e = m.entry(0, 1);
        // (±1/2)^2 = 1/4 at n = 4
        assert_eq!(e.mul(&e).rat, rat(1, 4));
        assert!(exhaustive_sign_matrices(6, false).is_err());
    }

    #[test]
    fn singleton_expectation_is_one() {
        let e = DiagramExpression::singleton();
        assert_eq!(exhaustive_rademacher_expectation(&e, 4).unwrap(), rat(1, 1));
    }

    #[test]
    fn orthogonality_examples() {
        // E[Z_edge Z_2path] = 0 at n = 4
        let edge = Diagram::rooted_path(1);
        let p2 = Diagram::rooted_path(2);
        let v = exhaustive_expectation(4, false, |m| {
            exact_diagram_value(&edge, m, 0).mul(&exact_diagram_value(&p2, m, 0))
        })
        .unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn variance_formula_vs_exhaustive() {
        // E[Z_edge^2] at n = 4 is exactly 3/4
        let edge = Diagram::rooted_path(1);
        let v = exhaustive_expectation(4, false, |m| {
            let z = exact_diagram_value(&edge, m, 0);
            z.mul(&z)
        })
        .unwrap();
        assert_eq!(v.expect_rational().unwrap(), rat(3, 4));
        let formula = exact_second_moment(&canonicalize(&edge).unwrap()).unwrap();
        assert_eq!(formula.eval_exact(4).unwrap(), rat(3, 4));
        // and at n = 5 (irrational entries, rational second moment)
        let v5 = exhaustive_expectation(5, false, |m| {
            let z = exact_diagram_value(&edge, m, 0);
            z.mul(&z)
        })
        .unwrap();
        assert_eq!(v5.expect_rational().unwrap(), formula.eval_exact(5).unwrap());
    }

    #[test]
    fn two_label_character_vanishes_for_signs() {
        // A_ij^2 - 1/n = 0 on the standard sign ensemble
        let lab = Diagram::new(2, Some(0), [(0, 1, 1, EdgeLabel::TwoLabeled)]).unwrap();
        let mats = exhaustive_sign_matrices(4, false).unwrap();
        for m in &mats {
            assert!(exact_diagram_value(&lab, m, 0).is_zero());
        }
        let _ = Plain;
    }

    #[test]
    fn debiased_equals_nonbacktracking_up_to_t2() {
        for m in exhaustive_sign_matrices(4, true).unwrap().iter().take(8) {
            let d = exact_debiased_power(m, 2);
            let nb = exact_nonbacktracking_power(m, 2);
            for t in 0..=2 {
                for i in 0..4 {
                    assert_eq!(d[t][i], nb[t][i], "t={t} i={i}");
                }
            }
        }
    }
}
