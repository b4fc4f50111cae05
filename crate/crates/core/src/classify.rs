//! Combinatorial-order classification of coefficient-scaled diagrams, and the
//! structural characterization of the non-negligible connected diagrams.

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::coeff::Coefficient;
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombOrder {
    Negligible,
    Order1,
    /// Larger than order 1; signals a normalization bug upstream, since every
    /// expression produced by the implemented pipelines has order at most 1.
    SuperOrder1,
}

/// The exponent-free combinatorial quantity: |V|-1-|E|+|I| for vector diagrams,
/// |V|-|E|+|I| for scalar diagrams (|E| counts 2-labeled edges twice).
pub fn comb_quantity(cd: &CanonicalDiagram) -> i64 {
    let v = cd.vertex_count() as i64;
    let e = cd.weighted_edge_count() as i64;
    let i = cd.isolated_count() as i64;
    if cd.is_scalar() {
        v - e + i
    } else {
        v - 1 - e + i
    }
}

/// Classifies `coeff * Z_diagram`. The coefficient must carry a single exponent
/// `n^{-k}`; mixed-exponent coefficients must be split by the caller.
pub fn classify(cd: &CanonicalDiagram, coeff: &Coefficient) -> Result<CombOrder> {
    let Some(twice_k) = coeff.single_exponent()? else {
        return Ok(CombOrder::Negligible); // zero coefficient
    };
    Ok(classify_exponent(cd, twice_k))
}

/// Classification against a fixed exponent `2k` (the comparison is
/// quantity <= 2k-1 negligible, = 2k order 1, otherwise super-order-1).
pub fn classify_exponent(cd: &CanonicalDiagram, twice_k: i64) -> CombOrder {
    let q = comb_quantity(cd);
    if q <= twice_k - 1 {
        CombOrder::Negligible
    } else if q == twice_k {
        CombOrder::Order1
    } else {
        CombOrder::SuperOrder1
    }
}

/// Structural predicate for connected vector diagrams: order 1 at k = 0 iff
/// multiplicities are 1 or 2, the underlying simple graph is a tree, the
/// multiplicity-1 edges form a connected root-containing subgraph (or are
/// absent), and there are no self-loops or 2-labels. Returns `None` when the
/// diagram is scalar or disconnected.
pub fn connected_order1_structure(cd: &CanonicalDiagram) -> Option<bool> {
    let d = cd.diagram();
    if d.is_scalar() || !d.is_connected() {
        return None;
    }
    Some(order1_structure_inner(d))
}

fn order1_structure_inner(d: &Diagram) -> bool {
    if d.has_self_loop() || d.has_two_label() {
        return false;
    }
    if d.edges().iter().any(|e| e.multiplicity > 2) {
        return false;
    }
    // underlying simple graph must be a tree
    if d.edges().len() != d.vertex_count().saturating_sub(1) {
        return false;
    }
    // multiplicity-1 subgraph: empty, or connected and containing the root
    let singles: Vec<_> = d.edges().iter().filter(|e| e.multiplicity == 1).collect();
    if singles.is_empty() {
        return true;
    }
    let mut verts: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    for e in &singles {
        verts.insert(e.u);
        verts.insert(e.v);
    }
    let root = d.root().expect("vector diagram");
    if !verts.contains(&root) {
        return false;
    }
    // connectivity over multiplicity-1 edges only
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![root];
    seen.insert(root);
    while let Some(v) = stack.pop() {
        for e in &singles {
            let w = if e.u == v {
                e.v
            } else if e.v == v {
                e.u
            } else {
                continue;
            };
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == verts.len()
}

/// Removes hanging double edges structurally (no coefficient bookkeeping) and
/// reports the asymptotic identity class of a connected diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsymptoticForm {
    /// The constant 1 (reduces to the singleton).
    Constant,
    /// A one-branch tree: an independent Gaussian coordinate family with this
    /// variance.
    Gaussian { variance: u64, tree: CanonicalDiagram },
    /// A multi-branch tree: the Hermite product over its branches.
    HermiteTree { tree: CanonicalDiagram },
    Negligible,
}

pub fn asymptotic_form(cd: &CanonicalDiagram) -> Result<AsymptoticForm> {
    let reduced = strip_hanging_structure(cd.diagram())?;
    let r = canonicalize(&reduced)?;
    if !r.is_tree() {
        return Ok(AsymptoticForm::Negligible);
    }
    if r.is_singleton() {
        return Ok(AsymptoticForm::Constant);
    }
    if r.is_one_branch_tree() {
        Ok(AsymptoticForm::Gaussian { variance: r.aut(), tree: r })
    } else {
        Ok(AsymptoticForm::HermiteTree { tree: r })
    }
}

/// Repeatedly removes hanging double edges together with their hanging vertex.
pub fn strip_hanging_structure(d: &Diagram) -> Result<Diagram> {
    let mut cur = d.clone();
    while let Some((edge_idx, hang)) = cur.find_hanging_double_edge() {
        cur = cur.remove_vertex(hang, &[edge_idx])?;
    }
    Ok(cur)
}

/// Enumerates all rooted diagrams on at most `max_vertices` vertices built from
/// plain multiplicity-<=`max_mult` edges (no labels), up to isomorphism.
/// Intended for small exhaustive test batteries.
pub fn enumerate_rooted_diagrams(max_vertices: usize, max_mult: u32) -> Vec<CanonicalDiagram> {
    let mut out: Vec<CanonicalDiagram> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for v in 1..=max_vertices {
        let pairs: Vec<(usize, usize)> =
            (0..v).flat_map(|a| (a + 1..v).map(move |b| (a, b))).collect();
        let m = pairs.len();
        let choices = (max_mult as u64 + 1).pow(m as u32);
        for mask in 0..choices {
            let mut rem = mask;
            let mut edges = Vec::new();
            for &(a, b) in &pairs {
                let mult = (rem % (max_mult as u64 + 1)) as u32;
                rem /= max_mult as u64 + 1;
                if mult > 0 {
                    edges.push((a, b, mult, EdgeLabel::Plain));
                }
            }
            let Ok(d) = Diagram::new(v, Some(0), edges) else { continue };
            let c = canonicalize(&d).expect("valid diagram");
            if seen.insert(c.key().to_vec()) {
                out.push(c);
            }
        }
    }
    out
}
