//! Traversals: tuples of equal-length walks from a common root, indexing the
//! moment expansion of the gap between non-backtracking power iteration and the
//! path character. Exact enumeration at tiny (q, t) cross-checked against the
//! exhaustive sign-ensemble oracle.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::coeff::Rat;
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};
use crate::verify::exhaustive::{
    exact_debiased_power, exact_nonbacktracking_power, exact_path_value, exhaustive_sign_matrices,
    QSqrt,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traversal {
    /// Vertex sequences over abstract ids; id 0 is the shared root and ids are
    /// normalized by first occurrence, so each abstract traversal appears once.
    pub walks: Vec<Vec<usize>>,
}

impl Traversal {
    pub fn vertex_count(&self) -> usize {
        self.walks.iter().flatten().copied().max().unwrap_or(0) + 1
    }

    /// Edge multiset of the union of the walks.
    pub fn edge_multiset(&self) -> std::collections::BTreeMap<(usize, usize), u32> {
        let mut out = std::collections::BTreeMap::new();
        for w in &self.walks {
            for pair in w.windows(2) {
                let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                *out.entry((a, b)).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn is_even(&self) -> bool {
        self.edge_multiset().values().all(|m| m % 2 == 0)
    }

    /// Every walk revisits some vertex.
    pub fn is_non_full_forward(&self) -> bool {
        self.walks.iter().all(|w| {
            let mut seen = std::collections::BTreeSet::new();
            w.iter().any(|v| !seen.insert(*v))
        })
    }

    /// The rooted diagram (V(gamma), E(gamma)).
    pub fn diagram(&self) -> Diagram {
        let edges: Vec<_> = self
            .edge_multiset()
            .into_iter()
            .map(|((u, v), m)| (u, v, m, EdgeLabel::Plain))
            .collect();
        Diagram::new(self.vertex_count(), Some(0), edges).expect("traversal diagram is valid")
    }

    /// E[Z_gamma] under the zero-diagonal sign ensemble with entries
    /// ±1/sqrt(n-1): the falling factorial over non-root vertices divided by
    /// (n-1)^{|E|/2}; zero unless even.
    pub fn expected_value(&self, n: u64) -> Rat {
        if !self.is_even() {
            return Rat::zero();
        }
        let v = self.vertex_count() as u64;
        let e: u32 = self.edge_multiset().values().sum();
        let mut num = Rat::one();
        for j in 1..v {
            num *= Rat::from_integer(BigInt::from(n - j));
        }
        let mut den = Rat::one();
        for _ in 0..(e / 2) {
            den *= Rat::from_integer(BigInt::from(n - 1));
        }
        num / den
    }
}

/// Complete enumeration of the traversal family: q walks of length t from a
/// shared root, non-backtracking at every interior position, no self-loops,
/// even edge union, and every walk revisiting a vertex.
pub fn enumerate_traversals(q: usize, t: usize) -> Result<Vec<Traversal>> {
    if q > 2 || t > 4 {
        return Err(Error::BudgetExceeded {
            what: format!("traversal enumeration at (q, t) = ({q}, {t})"),
            needed: q.max(t),
            limit: 4,
        });
    }
    let mut out = Vec::new();
    let mut walks: Vec<Vec<usize>> = Vec::new();
    gen_walks(q, t, &mut walks, &mut 1, &mut out);
    Ok(out)
}

fn gen_walks(q: usize, t: usize, walks: &mut Vec<Vec<usize>>, next_id: &mut usize, out: &mut Vec<Traversal>) {
    if walks.len() == q {
        let cand = Traversal { walks: walks.clone() };
        if cand.is_even() && cand.is_non_full_forward() {
            out.push(cand);
        }
        return;
    }
    let mut w = vec![0usize];
    gen_steps(q, t, walks, &mut w, next_id, out);
}

fn gen_steps(
    q: usize,
    t: usize,
    walks: &mut Vec<Vec<usize>>,
    w: &mut Vec<usize>,
    next_id: &mut usize,
    out: &mut Vec<Traversal>,
) {
    if w.len() == t + 1 {
        walks.push(w.clone());
        gen_walks(q, t, walks, next_id, out);
        walks.pop();
        return;
    }
    let cur = *w.last().unwrap();
    let prev2 = if w.len() >= 2 { Some(w[w.len() - 2]) } else { None };
    let fresh = *next_id;
    for cand in 0..=fresh {
        if cand == cur {
            continue; // no self-loops
        }
        if prev2 == Some(cand) {
            continue; // non-backtracking at every interior position
        }
        let used_fresh = cand == fresh;
        if used_fresh {
            *next_id += 1;
        }
        w.push(cand);
        gen_steps(q, t, walks, w, next_id, out);
        w.pop();
        if used_fresh {
            *next_id -= 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkDecomposition {
    /// E[(x_t - Z_{t-path})^q] from the non-backtracking power iteration, exact.
    pub lhs: Rat,
    /// Sum over the traversal family of E[Z_gamma], exact.
    pub rhs: Rat,
    pub equal: bool,
    /// The same moment for the debiased recursion x_{t+1} = A x_t - x_{t-1};
    /// agrees asymptotically but not identically at finite n beyond t = 2.
    pub debiased_lhs: Rat,
    pub traversal_count: usize,
}

/// Both sides of the walk decomposition from independent exact oracles.
pub fn walk_decomposition_check(q: usize, t: usize, n: usize) -> Result<WalkDecomposition> {
    let traversals = enumerate_traversals(q, t)?;
    let mut rhs = Rat::zero();
    for gamma in &traversals {
        rhs += gamma.expected_value(n as u64);
    }

    let mats = exhaustive_sign_matrices(n, true)?;
    let count = mats.len();
    let mut lhs_acc = QSqrt::zero((n - 1) as u64);
    let mut deb_acc = QSqrt::zero((n - 1) as u64);
    for m in &mats {
        let nb = exact_nonbacktracking_power(m, t);
        let deb = exact_debiased_power(m, t);
        let path = exact_path_value(m, t, 0);
        let gap = nb[t][0].sub(&path).pow(q as u32);
        let dgap = deb[t][0].sub(&path).pow(q as u32);
        lhs_acc = lhs_acc.add(&gap);
        deb_acc = deb_acc.add(&dgap);
    }
    let scale = Rat::new(BigInt::one(), BigInt::from(count));
    let lhs = lhs_acc.scale(&scale).expect_rational()?;
    let debiased_lhs = deb_acc.scale(&scale).expect_rational()?;
    Ok(WalkDecomposition {
        equal: lhs == rhs,
        lhs,
        rhs,
        debiased_lhs,
        traversal_count: traversals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;

    #[test]
    fn filters_definitions() {
        // any traversal with an odd edge is excluded
        let odd = Traversal { walks: vec![vec![0, 1, 2]] };
        assert!(!odd.is_even());
        // the t-path is full-forward, hence excluded
        let path = Traversal { walks: vec![vec![0, 1, 2, 3]] };
        assert!(!path.is_non_full_forward());
        // a doubled triangle pair
        let tri2 = Traversal { walks: vec![vec![0, 1, 2, 0], vec![0, 1, 2, 0]] };
        assert!(tri2.is_even() && tri2.is_non_full_forward());
    }

    #[test]
    fn q2_t2_is_empty() {
        // x_2 equals the 2-path exactly, so the family must be empty
        let ts = enumerate_traversals(2, 2).unwrap();
        assert!(ts.is_empty(), "unexpected traversals: {ts:?}");
    }

    #[test]
    fn q2_t3_is_two_triangle_pairs() {
        let ts = enumerate_traversals(2, 3).unwrap();
        assert_eq!(ts.len(), 2);
        for gamma in &ts {
            assert_eq!(gamma.vertex_count(), 3);
            assert_eq!(gamma.edge_multiset().values().sum::<u32>(), 6);
        }
    }

    #[test]
    fn decomposition_exact_small() {
        let d = walk_decomposition_check(2, 2, 4).unwrap();
        assert!(d.equal);
        assert_eq!(d.lhs, rat(0, 1));
        // the debiased recursion also matches at t = 2 (exact identity)
        assert_eq!(d.debiased_lhs, rat(0, 1));

        let d = walk_decomposition_check(2, 3, 4).unwrap();
        assert!(d.equal, "lhs {} vs rhs {}", d.lhs, d.rhs);
        // 2 (n-2)/(n-1)^2 at n = 4
        assert_eq!(d.rhs, rat(4, 9));
        // the debiased recursion differs by the exact 1/(n-1)^2 residue
        assert_eq!(d.debiased_lhs - d.lhs, rat(1, 9));
    }

    #[test]
    fn odd_moments_vanish() {
        let d = walk_decomposition_check(1, 3, 4).unwrap();
        assert_eq!(d.lhs, rat(0, 1));
        assert_eq!(d.rhs, rat(0, 1)); // odd-degree traversals are never even
        assert!(d.equal);
    }

    #[test]
    fn guard_enforced() {
        assert!(enumerate_traversals(3, 3).is_err());
        assert!(enumerate_traversals(2, 5).is_err());
    }
}
