//! The asymptotic Gaussian space: rational linear combinations of rooted trees,
//! read either as tree approximations (injective characters) or as Hermite
//! polynomials in one independent Gaussian per one-branch tree, with variance
//! equal to the branch's automorphism count.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::coeff::{rat_int, rat_to_f64, Rat};
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};
use crate::expr::{DiagramExpression, ExprKind};
use crate::hermite::{eval_poly_f64, hermite};
use crate::rng::{standard_normal, stream_rng, STREAM_STATE};
use crate::Limits;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreeState {
    terms: BTreeMap<CanonicalDiagram, Rat>,
}

impl TreeState {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The constant c (the singleton tree carries the constant part).
    pub fn constant(c: Rat) -> Self {
        let mut s = Self::zero();
        s.add_tree(canonicalize(&Diagram::singleton()).unwrap(), c);
        s
    }

    pub fn one() -> Self {
        Self::constant(rat_int(1))
    }

    pub fn from_tree(cd: CanonicalDiagram) -> Self {
        let mut s = Self::zero();
        s.add_tree(cd, rat_int(1));
        s
    }

    pub fn add_tree(&mut self, cd: CanonicalDiagram, c: Rat) {
        assert!(cd.is_tree(), "tree state keys must be rooted trees");
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(cd).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalDiagram, &Rat)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, cd: &CanonicalDiagram) -> Rat {
        self.terms.get(cd).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (cd, c) in other.iter() {
            out.add_tree(cd.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&rat_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(cd, v)| (cd.clone(), v * c)).collect() }
    }

    /// E[X]: the coefficient of the singleton diagram.
    pub fn expectation(&self) -> Rat {
        let singleton = canonicalize(&Diagram::singleton()).unwrap();
        self.coefficient(&singleton)
    }

    /// <X, Y> = E[XY] via orthogonality: sum over trees of x_t y_t |Aut(t)|.
    pub fn inner_product(&self, other: &Self) -> Rat {
        let mut acc = Rat::zero();
        for (cd, c) in self.iter() {
            let oc = other.coefficient(cd);
            if !oc.is_zero() {
                acc += c * oc * rat_int(cd.aut() as i64);
            }
        }
        acc
    }

    pub fn second_moment(&self) -> Rat {
        self.inner_product(self)
    }

    /// Maximum tree depth over the support (None when zero).
    pub fn depth(&self) -> Option<usize> {
        self.terms.keys().map(|cd| cd.tree().unwrap().depth).max()
    }

    /// True when every support tree has root degree 1 (a centered Gaussian).
    pub fn is_gaussian(&self) -> bool {
        self.terms.keys().all(|cd| cd.is_one_branch_tree())
    }

    /// Extends the root of every tree by one edge.
    pub fn plus(&self) -> Self {
        let mut out = Self::zero();
        for (cd, c) in self.iter() {
            out.add_tree(tau_plus(cd), c.clone());
        }
        out
    }

    /// Contracts the root of every one-branch tree; other trees are dropped
    /// (their contraction is 0).
    pub fn minus(&self) -> Self {
        let mut out = Self::zero();
        for (cd, c) in self.iter() {
            if let Some(m) = tau_minus(cd) {
                out.add_tree(m, c.clone());
            }
        }
        out
    }

    /// Product of two states via branch matchings, extended bilinearly.
    pub fn mul(&self, other: &Self, limits: &Limits) -> Result<Self> {
        let mut out = Self::zero();
        for (a, ca) in self.iter() {
            for (b, cb) in other.iter() {
                let prod = tree_product(&[a.clone(), b.clone()], limits)?;
                out = out.add(&prod.scale(&(ca * cb)));
            }
        }
        Ok(out)
    }

    /// The vector-expression view (coefficients lifted into the exponent ring).
    pub fn to_expression(&self) -> DiagramExpression {
        let mut e = DiagramExpression::zero(ExprKind::Vector);
        for (cd, c) in self.iter() {
            e.add_canonical(cd.clone(), crate::coeff::Coefficient::from_rat(c.clone()));
        }
        e
    }
}

/// tau+ : extend the root by one edge and re-root there.
pub fn tau_plus(cd: &CanonicalDiagram) -> CanonicalDiagram {
    let d = cd.diagram();
    let v = d.vertex_count();
    let root = d.root().expect("rooted tree");
    let mut edges: Vec<_> = d.edges().iter().map(|e| (e.u, e.v, e.multiplicity, e.label)).collect();
    edges.push((root, v, 1, EdgeLabel::Plain));
    canonicalize(&Diagram::new(v + 1, Some(v), edges).expect("valid tree")).expect("canonicalize")
}

/// tau- : remove the root of a one-branch tree; None for the singleton and for
/// roots of degree >= 2.
pub fn tau_minus(cd: &CanonicalDiagram) -> Option<CanonicalDiagram> {
    let info = cd.tree()?;
    if info.branches.iter().map(|b| b.count).sum::<usize>() != 1 {
        return None;
    }
    let d = cd.diagram();
    let root = d.root().unwrap();
    let (child, edge_idx) = d
        .edges()
        .iter()
        .enumerate()
        .find_map(|(i, e)| {
            if e.u == root {
                Some((e.v, i))
            } else if e.v == root {
                Some((e.u, i))
            } else {
                None
            }
        })
        .expect("root has one edge");
    let mut reduced = d.remove_vertex(root, &[edge_idx]).expect("valid");
    // re-root at the old child (indices shifted down past the root)
    let new_child = if child > root { child - 1 } else { child };
    reduced = Diagram::new(
        reduced.vertex_count(),
        Some(new_child),
        reduced.edges().iter().map(|e| (e.u, e.v, e.multiplicity, e.label)),
    )
    .expect("valid");
    Some(canonicalize(&reduced).expect("canonicalize"))
}

/// Product of rooted trees: sum over partial matchings of isomorphic branches
/// from distinct factors; each matched pair of branches sigma contributes a
/// factor |Aut(sigma)| and is removed, the rest merge at a common root.
pub fn tree_product(factors: &[CanonicalDiagram], limits: &Limits) -> Result<TreeState> {
    #[derive(Clone)]
    struct Instance {
        factor: usize,
        key: Vec<u8>,
        diagram: Diagram,
        aut: u64,
        nonroot_vertices: usize,
    }
    let mut instances: Vec<Instance> = Vec::new();
    for (fi, cd) in factors.iter().enumerate() {
        let info = cd
            .tree()
            .ok_or_else(|| Error::Internal(format!("tree product on non-tree {}", cd.diagram())))?;
        for b in &info.branches {
            for _ in 0..b.count {
                instances.push(Instance {
                    factor: fi,
                    key: b.key.clone(),
                    diagram: b.diagram.clone(),
                    aut: b.aut,
                    nonroot_vertices: b.diagram.vertex_count() - 1,
                });
            }
        }
    }
    let total_nonroot: usize = instances.iter().map(|i| i.nonroot_vertices).sum();
    if total_nonroot > limits.product_vertex_budget {
        return Err(Error::BudgetExceeded {
            what: format!("tree product of {} factors", factors.len()),
            needed: total_nonroot,
            limit: limits.product_vertex_budget,
        });
    }

    let mut out = TreeState::zero();
    let k = instances.len();
    let mut used = vec![false; k];
    fn rec(
        instances: &[Instance],
        used: &mut [bool],
        weight: Rat,
        out: &mut TreeState,
    ) {
        let Some(first) = used.iter().position(|u| !u) else {
            // merge all unmatched... none left: all matched
            emit(instances, used, weight, out);
            return;
        };
        // helper: emit needs to know the singles; handle by collecting at leaves
        used[first] = true;
        // option 1: first stays unmatched (kept in the merged tree)
        rec_keep(instances, used, weight.clone(), out, first);
        // option 2: match with a later compatible instance
        for j in (first + 1)..instances.len() {
            if used[j] || instances[j].factor == instances[first].factor || instances[j].key != instances[first].key
            {
                continue;
            }
            used[j] = true;
            let w = weight.clone() * rat_int(instances[first].aut as i64);
            rec_matched(instances, used, w, out, &[first, j]);
            used[j] = false;
        }
        used[first] = false;
    }
    // keep/matched bookkeeping: we track kept instances through a thread-local
    // stack to avoid allocating on every branch
    fn rec_keep(instances: &[Instance], used: &mut [bool], weight: Rat, out: &mut TreeState, kept: usize) {
        KEEP.with(|k| k.borrow_mut().push(kept));
        rec(instances, used, weight, out);
        KEEP.with(|k| {
            k.borrow_mut().pop();
        });
    }
    fn rec_matched(instances: &[Instance], used: &mut [bool], weight: Rat, out: &mut TreeState, _pair: &[usize]) {
        rec(instances, used, weight, out);
    }
    fn emit(instances: &[Instance], _used: &[bool], weight: Rat, out: &mut TreeState) {
        KEEP.with(|k| {
            let kept = k.borrow();
            let mut vcount = 1usize;
            let mut edges: Vec<(usize, usize, u32, EdgeLabel)> = Vec::new();
            for &i in kept.iter() {
                let b = &instances[i].diagram;
                let offset = vcount;
                // branch diagrams are canonical trees rooted at 0
                for e in b.edges() {
                    let m = |x: usize| if x == 0 { 0 } else { offset + x - 1 };
                    edges.push((m(e.u), m(e.v), e.multiplicity, e.label));
                }
                vcount += b.vertex_count() - 1;
            }
            let d = Diagram::new(vcount, Some(0), edges).expect("merged tree is valid");
            out.add_tree(canonicalize(&d).expect("canonicalize"), weight);
        });
    }
    thread_local! {
        static KEEP: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
    }

    rec(&instances, &mut used, rat_int(1), &mut out);
    Ok(out)
}

/// Applies a history polynomial to a list of states (index j = state j).
pub fn apply_polynomial(
    f: &crate::poly::HistoryPolynomial,
    history: &[TreeState],
    limits: &Limits,
) -> Result<TreeState> {
    if f.arity() > history.len() {
        return Err(Error::DimensionMismatch(format!(
            "polynomial references {} iterates, history has {}",
            f.arity(),
            history.len()
        )));
    }
    let mut out = TreeState::zero();
    for (exps, c) in f.terms() {
        let mut acc = TreeState::constant(c.clone());
        for (j, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                acc = acc.mul(&history[j], limits)?;
            }
        }
        out = out.add(&acc);
    }
    Ok(out)
}

/// The branch decomposition of a tree: (branch key, count d, branch aut).
pub fn branch_profile(cd: &CanonicalDiagram) -> Vec<(Vec<u8>, usize, u64)> {
    cd.tree()
        .map(|info| info.branches.iter().map(|b| (b.key.clone(), b.count, b.aut)).collect())
        .unwrap_or_default()
}

/// Draws samples of the asymptotic state: one independent N(0, |Aut(sigma)|)
/// per distinct branch in the support, combined through the Hermite products.
pub fn sample_state(state: &TreeState, seed: u64, count: usize) -> Vec<f64> {
    // stable list of distinct branches across the support
    let mut branches: Vec<(Vec<u8>, u64)> = Vec::new();
    for (cd, _) in state.iter() {
        for (key, _, aut) in branch_profile(cd) {
            if !branches.iter().any(|(k, _)| *k == key) {
                branches.push((key, aut));
            }
        }
    }
    let mut rng = stream_rng(seed, STREAM_STATE);
    let mut out = Vec::with_capacity(count);
    // cache hermite coefficient vectors per (branch slot, degree)
    let mut hcache: BTreeMap<(usize, usize), Vec<Rat>> = BTreeMap::new();
    for _ in 0..count {
        let draws: Vec<f64> = branches
            .iter()
            .map(|(_, aut)| (*aut as f64).sqrt() * standard_normal(&mut rng))
            .collect();
        let mut acc = 0.0;
        for (cd, c) in state.iter() {
            let mut term = rat_to_f64(c);
            for (key, d, aut) in branch_profile(cd) {
                let slot = branches.iter().position(|(k, _)| *k == key).unwrap();
                let coeffs = hcache
                    .entry((slot, d))
                    .or_insert_with(|| hermite(d, &rat_int(aut as i64)));
                term *= eval_poly_f64(coeffs, draws[slot]);
            }
            acc += term;
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;
    use crate::diagram::EdgeLabel::Plain;

    fn canon(d: &Diagram) -> CanonicalDiagram {
        canonicalize(d).unwrap()
    }

    fn edge_tree() -> CanonicalDiagram {
        canon(&Diagram::rooted_path(1))
    }

    #[test]
    fn plus_minus_examples() {
        let singleton = canon(&Diagram::singleton());
        let s = TreeState::from_tree(singleton.clone());
        assert_eq!(s.plus(), TreeState::from_tree(edge_tree()));
        assert_eq!(TreeState::from_tree(edge_tree()).minus(), s);
        // (2-star)- = 0
        let star = TreeState::from_tree(canon(&Diagram::root_star(2)));
        assert!(star.minus().is_zero());
        // singleton- = 0
        assert!(s.minus().is_zero());
    }

    #[test]
    fn plus_minus_cancel_and_project() {
        let limits = Limits::default();
        // X = 2·edge + 3·(2-star) + 1
        let mut x = TreeState::constant(rat(1, 1));
        x = x.add(&TreeState::from_tree(edge_tree()).scale(&rat(2, 1)));
        x = x.add(&TreeState::from_tree(canon(&Diagram::root_star(2))).scale(&rat(3, 1)));
        assert_eq!(x.plus().minus(), x);
        // (X-)+ keeps only the one-branch part
        let proj = x.minus().plus();
        assert_eq!(proj, TreeState::from_tree(edge_tree()).scale(&rat(2, 1)));
        let _ = limits;
    }

    #[test]
    fn aut_preserved_by_plus() {
        let t12 = canon(&Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap());
        let plussed = tau_plus(&t12);
        assert_eq!(t12.aut(), plussed.aut());
        assert_eq!(tau_minus(&plussed).unwrap(), t12);
    }

    #[test]
    fn edge_times_edge() {
        let limits = Limits::default();
        let e = TreeState::from_tree(edge_tree());
        let prod = e.mul(&e, &limits).unwrap();
        // = 2-star + 1
        assert_eq!(prod.coefficient(&canon(&Diagram::root_star(2))), rat(1, 1));
        assert_eq!(prod.expectation(), rat(1, 1));
        assert_eq!(prod.len(), 2);
    }

    #[test]
    fn power_of_single_branch_matches_matchings() {
        let limits = Limits::default();
        // sigma = the (1,2)-branch: aut = 2
        let sigma = canon(&Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap());
        assert_eq!(sigma.aut(), 2);
        let d = 3;
        let prod = tree_product(&vec![sigma.clone(); d], &limits).unwrap();
        // sum over matchings of 3 objects: |M|=0: one term (3 copies);
        // |M|=1: 3 matchings, each weight aut=2, leaving 1 copy
        let three = tree_product_merge_count(&sigma, 3);
        let one = tree_product_merge_count(&sigma, 1);
        assert_eq!(prod.coefficient(&three), rat(1, 1));
        assert_eq!(prod.coefficient(&one), rat(6, 1));
        assert_eq!(prod.len(), 2);
    }

    fn tree_product_merge_count(sigma: &CanonicalDiagram, copies: usize) -> CanonicalDiagram {
        let b = sigma.diagram();
        let mut vcount = 1;
        let mut edges = Vec::new();
        for _ in 0..copies {
            let offset = vcount;
            for e in b.edges() {
                let m = |x: usize| if x == 0 { 0 } else { offset + x - 1 };
                edges.push((m(e.u), m(e.v), e.multiplicity, e.label));
            }
            vcount += b.vertex_count() - 1;
        }
        canon(&Diagram::new(vcount, Some(0), edges).unwrap())
    }

    #[test]
    fn distinct_branches_do_not_match() {
        let limits = Limits::default();
        let e = canon(&Diagram::rooted_path(1));
        let p2 = canon(&Diagram::rooted_path(2));
        let prod = tree_product(&[e.clone(), p2.clone()], &limits).unwrap();
        assert_eq!(prod.len(), 1);
        let (merged, c) = prod.iter().next().unwrap();
        assert_eq!(*c, rat(1, 1));
        assert_eq!(merged.vertex_count(), 4);
        assert_eq!(merged.tree().unwrap().branches.len(), 2);
    }

    #[test]
    fn simultaneous_product_equals_pairwise() {
        let limits = Limits::default();
        let e = canon(&Diagram::rooted_path(1));
        let p2 = canon(&Diagram::rooted_path(2));
        let simultaneous = tree_product(&[e.clone(), e.clone(), p2.clone()], &limits).unwrap();
        let pairwise = TreeState::from_tree(e.clone())
            .mul(&TreeState::from_tree(e.clone()), &limits)
            .unwrap()
            .mul(&TreeState::from_tree(p2.clone()), &limits)
            .unwrap();
        assert_eq!(simultaneous, pairwise);
    }

    #[test]
    fn inner_products() {
        // <(1,2)-tree, (1,2)-tree> = 2
        let t12 = canon(&Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap());
        let x = TreeState::from_tree(t12);
        assert_eq!(x.second_moment(), rat(2, 1));
        // E of any non-singleton tree is 0
        assert_eq!(x.expectation(), rat(0, 1));
        // adjointness on a couple of states
        let y = TreeState::from_tree(edge_tree()).add(&TreeState::one());
        assert_eq!(x.plus().inner_product(&y), x.inner_product(&y.minus()));
    }

    #[test]
    fn apply_polynomial_examples() {
        let limits = Limits::default();
        // f(w) = w^2 on {edge: 1} -> {2-star: 1, singleton: 1}
        let f = crate::poly::HistoryPolynomial::from_terms(vec![(vec![2], rat(1, 1))]);
        let out = apply_polynomial(&f, &[TreeState::from_tree(edge_tree())], &limits).unwrap();
        assert_eq!(out.coefficient(&canon(&Diagram::root_star(2))), rat(1, 1));
        assert_eq!(out.expectation(), rat(1, 1));
        // f(w) = w^2 - 1 -> exactly the 2-star (h_2 of the edge)
        let g = crate::poly::HistoryPolynomial::from_terms(vec![(vec![2], rat(1, 1)), (vec![], rat(-1, 1))]);
        let out = apply_polynomial(&g, &[TreeState::from_tree(edge_tree())], &limits).unwrap();
        assert_eq!(out, TreeState::from_tree(canon(&Diagram::root_star(2))));
    }

    #[test]
    fn sampling_moments() {
        // constant state
        let c = TreeState::constant(rat(7, 2));
        assert!(sample_state(&c, 1, 10).iter().all(|&x| x == 3.5));
        // edge: N(0,1)
        let e = TreeState::from_tree(edge_tree());
        let xs = sample_state(&e, 2, 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
        // 2-star: h_2(g; 1), variance |Aut| = 2
        let s = TreeState::from_tree(canon(&Diagram::root_star(2)));
        let xs = sample_state(&s, 3, 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 2.0).abs() < 0.08, "var {var}");
    }
}
