//! Exact symbolic operations on diagram expressions: multiplication by the
//! matrix, componentwise and scalar products via intersection patterns,
//! hanging-double-edge removal, the repeated-label change of basis and its
//! inversion, unrooting, and exact second moments.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::classify::{classify_exponent, CombOrder};
use crate::coeff::{rat_int, Coefficient, Rat};
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};
use crate::expr::{DiagramExpression, ExprKind};
use crate::Limits;

// ---- multiplication by A --------------------------------------------------

/// Exact identity: evaluate(result) = A * evaluate(input) for every symmetric A
/// and every n. Contractions may create multiedges and self-loops.
pub fn multiply_by_a(e: &DiagramExpression) -> Result<DiagramExpression> {
    e.expect_kind(ExprKind::Vector)?;
    let mut out = DiagramExpression::zero(ExprKind::Vector);
    for (cd, c) in e.iter() {
        let d = cd.diagram();
        let v = d.vertex_count();
        let root = d.root().expect("vector diagram");
        // no intersection: extend the root by one edge
        let mut edges: Vec<_> = d.edges().iter().map(|e| (e.u, e.v, e.multiplicity, e.label)).collect();
        edges.push((root, v, 1, EdgeLabel::Plain));
        let plus = Diagram::new(v + 1, Some(v), edges)?;
        out.add_diagram(&plus, c.clone())?;
        // the new index lands on an existing vertex: re-root there and connect
        for target in 0..v {
            let mut edges: Vec<_> =
                d.edges().iter().map(|e| (e.u, e.v, e.multiplicity, e.label)).collect();
            edges.push((root, target, 1, EdgeLabel::Plain));
            let contracted = Diagram::new(v, Some(target), edges)?;
            out.add_diagram(&contracted, c.clone())?;
        }
    }
    Ok(out)
}

// ---- products via intersection patterns -----------------------------------

/// Componentwise product of vector expressions.
pub fn pointwise_product(factors: &[DiagramExpression], limits: &Limits) -> Result<DiagramExpression> {
    for f in factors {
        f.expect_kind(ExprKind::Vector)?;
    }
    product_impl(factors, limits)
}

/// Product of scalar and vector expressions; scalar factors join as floating
/// components. The result is a vector expression iff some factor is one.
pub fn scalar_product(factors: &[DiagramExpression], limits: &Limits) -> Result<DiagramExpression> {
    product_impl(factors, limits)
}

fn product_impl(factors: &[DiagramExpression], limits: &Limits) -> Result<DiagramExpression> {
    let any_vector = factors.iter().any(|f| f.kind() == ExprKind::Vector);
    let kind = if any_vector { ExprKind::Vector } else { ExprKind::Scalar };
    if factors.is_empty() {
        return Ok(DiagramExpression::scalar_one());
    }
    let mut out = DiagramExpression::zero(kind);
    let mut tuple: Vec<(&CanonicalDiagram, &Coefficient)> = Vec::with_capacity(factors.len());
    distribute(factors, 0, &mut tuple, &mut |terms| {
        let mut coeff = Coefficient::one();
        for (_, c) in terms {
            coeff = coeff.mul(c);
        }
        let diagrams: Vec<&Diagram> = terms.iter().map(|(cd, _)| cd.diagram()).collect();
        let joined = join_at_root(&diagrams, any_vector)?;
        if joined.items.len() > limits.product_vertex_budget {
            return Err(Error::BudgetExceeded {
                what: format!("product of {} diagrams", diagrams.len()),
                needed: joined.items.len(),
                limit: limits.product_vertex_budget,
            });
        }
        let mut res: Result<()> = Ok(());
        visit_partitions(&joined.factor_of, &mut |block_of_items, blocks| {
            if res.is_err() {
                return;
            }
            let contracted = joined.contract(block_of_items, blocks);
            match contracted.and_then(|d| out.add_diagram(&d, coeff.clone())) {
                Ok(()) => {}
                Err(e) => res = Err(e),
            }
        });
        res
    })?;
    Ok(out)
}

fn distribute<'a>(
    factors: &'a [DiagramExpression],
    idx: usize,
    tuple: &mut Vec<(&'a CanonicalDiagram, &'a Coefficient)>,
    f: &mut impl FnMut(&[(&'a CanonicalDiagram, &'a Coefficient)]) -> Result<()>,
) -> Result<()> {
    if idx == factors.len() {
        return f(tuple);
    }
    for (cd, c) in factors[idx].iter() {
        tuple.push((cd, c));
        distribute(factors, idx + 1, tuple, f)?;
        tuple.pop();
    }
    Ok(())
}

/// Disjoint union of factor diagrams, vector factors merged at a shared root.
struct Joined {
    diagram: Diagram,
    has_root: bool,
    /// Partitioned vertex ids (all non-root vertices).
    items: Vec<usize>,
    /// Factor id of each item, parallel to `items`.
    factor_of: Vec<usize>,
}

fn join_at_root(diagrams: &[&Diagram], has_root: bool) -> Result<Joined> {
    let mut vcount = usize::from(has_root);
    let mut edges: Vec<(usize, usize, u32, EdgeLabel)> = Vec::new();
    let mut items = Vec::new();
    let mut factor_of = Vec::new();
    for (fi, d) in diagrams.iter().enumerate() {
        let mut map = vec![usize::MAX; d.vertex_count()];
        if let Some(r) = d.root() {
            debug_assert!(has_root);
            map[r] = 0;
        }
        for v in 0..d.vertex_count() {
            if map[v] == usize::MAX {
                map[v] = vcount;
                items.push(vcount);
                factor_of.push(fi);
                vcount += 1;
            }
        }
        for e in d.edges() {
            edges.push((map[e.u], map[e.v], e.multiplicity, e.label));
        }
    }
    let diagram = Diagram::new(vcount, has_root.then_some(0), edges)?;
    Ok(Joined { diagram, has_root, items, factor_of })
}

impl Joined {
    fn contract(&self, block_of_items: &[usize], blocks: usize) -> Result<Diagram> {
        let offset = usize::from(self.has_root);
        let mut block_of = vec![0usize; self.diagram.vertex_count()];
        for (slot, &v) in self.items.iter().enumerate() {
            block_of[v] = offset + block_of_items[slot];
        }
        self.diagram.contract(&block_of, offset + blocks)
    }
}

/// Visits every partition of `0..factor_of.len()` such that no block contains
/// two items with the same factor id. The callback receives the block
/// assignment and the number of blocks.
pub fn visit_partitions(factor_of: &[usize], f: &mut impl FnMut(&[usize], usize)) {
    let k = factor_of.len();
    let mut assign = vec![0usize; k];
    let mut masks: Vec<u64> = Vec::with_capacity(k);
    fn rec(
        i: usize,
        k: usize,
        factor_of: &[usize],
        assign: &mut [usize],
        masks: &mut Vec<u64>,
        f: &mut impl FnMut(&[usize], usize),
    ) {
        if i == k {
            f(assign, masks.len());
            return;
        }
        let bit = 1u64 << factor_of[i];
        for b in 0..masks.len() {
            if masks[b] & bit == 0 {
                masks[b] |= bit;
                assign[i] = b;
                rec(i + 1, k, factor_of, assign, masks, f);
                masks[b] &= !bit;
            }
        }
        masks.push(bit);
        assign[i] = masks.len() - 1;
        rec(i + 1, k, factor_of, assign, masks, f);
        masks.pop();
    }
    rec(0, k, factor_of, &mut assign, &mut masks, f);
}

// ---- hanging double edges --------------------------------------------------

/// The exact three-term identity for one hanging double edge:
/// Z_a = Z_{a0} - ((|V|-1)/n) Z_{a0} + Z_{a2}, where a0 removes the hanging
/// edge and vertex and a2 replaces the double edge by a single 2-labeled edge.
pub fn remove_hanging_double_edge(
    cd: &CanonicalDiagram,
    coeff: &Coefficient,
) -> Result<DiagramExpression> {
    let d = cd.diagram();
    let Some((edge_idx, hang)) = d.find_hanging_double_edge() else {
        return Err(Error::NoHangingDoubleEdge);
    };
    let kind = if d.is_scalar() { ExprKind::Scalar } else { ExprKind::Vector };
    let vcount = d.vertex_count() as i64;

    let alpha0 = d.remove_vertex(hang, &[edge_idx])?;
    let alpha2 = {
        let edges = d.edges().iter().enumerate().map(|(j, e)| {
            if j == edge_idx {
                (e.u, e.v, 1, EdgeLabel::TwoLabeled)
            } else {
                (e.u, e.v, e.multiplicity, e.label)
            }
        });
        Diagram::new(d.vertex_count(), d.root(), edges)?
    };

    let mut out = DiagramExpression::zero(kind);
    out.add_diagram(&alpha0, coeff.clone())?;
    out.add_diagram(&alpha0, coeff.mul(&Coefficient::monomial(2, rat_int(-(vcount - 1)))))?;
    out.add_diagram(&alpha2, coeff.clone())?;
    Ok(out)
}

pub struct Stripped {
    /// Exact fixpoint of the three-term identity (2-labeled residues kept).
    pub exact: DiagramExpression,
    /// The exact expression with combinatorially negligible pieces dropped.
    pub asymptotic: DiagramExpression,
}

/// Applies the removal identity until no term has a hanging double edge, then
/// derives the asymptotic expression by dropping negligible coefficient pieces.
pub fn strip_hanging(e: &DiagramExpression) -> Result<Stripped> {
    let mut exact = e.clone();
    loop {
        let target = exact
            .iter()
            .find(|(cd, _)| cd.diagram().find_hanging_double_edge().is_some())
            .map(|(cd, c)| (cd.clone(), c.clone()));
        let Some((cd, c)) = target else { break };
        exact.add_canonical(cd.clone(), c.neg());
        let replacement = remove_hanging_double_edge(&cd, &c)?;
        exact = exact.add(&replacement)?;
    }
    let asymptotic = drop_negligible(&exact)?;
    Ok(Stripped { exact, asymptotic })
}

/// Keeps, per term, only the coefficient monomials that are not combinatorially
/// negligible. Super-order-1 pieces are an internal error.
pub fn drop_negligible(e: &DiagramExpression) -> Result<DiagramExpression> {
    let mut out = DiagramExpression::zero(e.kind());
    for (cd, c) in e.iter() {
        let mut kept = Coefficient::zero();
        for (twice_k, r) in c.terms() {
            match classify_exponent(cd, twice_k) {
                CombOrder::Negligible => {}
                CombOrder::Order1 => kept.add_term(twice_k, r.clone()),
                CombOrder::SuperOrder1 => {
                    return Err(Error::Internal(format!(
                        "super-order-1 term {} * n^-{}/2 for {}",
                        r,
                        twice_k,
                        cd.diagram()
                    )))
                }
            }
        }
        out.add_canonical(cd.clone(), kept);
    }
    Ok(out)
}

// ---- repeated-label basis ---------------------------------------------------

/// Expression over repeated-label characters (embeddings need not be
/// injective). Same storage as [`DiagramExpression`], different semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TildeExpression {
    pub kind: ExprKind,
    pub terms: BTreeMap<CanonicalDiagram, Coefficient>,
}

/// Exact expansion of the repeated-label character into injective characters:
/// sum over all partitions of the vertex set (root included) of the contracted
/// diagram.
pub fn repeated_label_expand(cd: &CanonicalDiagram) -> Result<DiagramExpression> {
    let d = cd.diagram();
    let kind = if d.is_scalar() { ExprKind::Scalar } else { ExprKind::Vector };
    let mut out = DiagramExpression::zero(kind);
    let factor_of: Vec<usize> = (0..d.vertex_count()).collect();
    let mut res: Result<()> = Ok(());
    visit_partitions(&factor_of, &mut |block_of, blocks| {
        if res.is_err() {
            return;
        }
        match d.contract(block_of, blocks).and_then(|c| out.add_diagram(&c, Coefficient::one())) {
            Ok(()) => {}
            Err(e) => res = Err(e),
        }
    });
    res?;
    Ok(out)
}

/// Moebius inversion on the partition lattice: expresses the injective
/// character as a signed sum of repeated-label characters,
/// mu(P) = prod over blocks (-1)^{|B|-1} (|B|-1)!.
pub fn injective_from_repeated(cd: &CanonicalDiagram) -> Result<TildeExpression> {
    let d = cd.diagram();
    let kind = if d.is_scalar() { ExprKind::Scalar } else { ExprKind::Vector };
    let mut terms: BTreeMap<CanonicalDiagram, Coefficient> = BTreeMap::new();
    let factor_of: Vec<usize> = (0..d.vertex_count()).collect();
    let mut res: Result<()> = Ok(());
    visit_partitions(&factor_of, &mut |block_of, blocks| {
        if res.is_err() {
            return;
        }
        let mut mu = BigInt::one();
        for b in 0..blocks {
            let size = block_of.iter().filter(|&&x| x == b).count() as i64;
            let mut f = BigInt::one();
            for j in 1..size {
                f *= BigInt::from(j);
            }
            if size % 2 == 0 {
                f = -f;
            }
            mu *= f;
        }
        match d.contract(block_of, blocks).and_then(|q| canonicalize(&q)) {
            Ok(c) => {
                let entry = terms.entry(c).or_insert_with(Coefficient::zero);
                *entry = entry.add(&Coefficient::from_rat(Rat::from_integer(mu)));
                if entry.is_zero() {
                    terms.retain(|_, v| !v.is_zero());
                }
            }
            Err(e) => res = Err(e),
        }
    });
    res?;
    Ok(TildeExpression { kind, terms })
}

/// Substitutes the injective expansion of each repeated-label character;
/// composing with [`injective_from_repeated`] returns the original term.
pub fn expand_tilde(t: &TildeExpression) -> Result<DiagramExpression> {
    let mut out = DiagramExpression::zero(t.kind);
    for (cd, c) in &t.terms {
        let ex = repeated_label_expand(cd)?;
        out = out.add(&ex.scale_coeff(c))?;
    }
    Ok(out)
}

// ---- unrooting ---------------------------------------------------------------

/// Exact identity (1/n) sum_i evaluate(e)_i = evaluate(result). Each diagram is
/// unrooted and the coefficient picks up n^{-1}; a root with no incident edge
/// is removed instead, with the exact (1 - (|V|-1)/n) count.
pub fn unroot_average(e: &DiagramExpression) -> Result<DiagramExpression> {
    e.expect_kind(ExprKind::Vector)?;
    let mut out = DiagramExpression::zero(ExprKind::Scalar);
    for (cd, c) in e.iter() {
        let d = cd.diagram();
        let root = d.root().expect("vector diagram");
        let root_isolated = !d.edges().iter().any(|e| e.u == root || e.v == root);
        if root_isolated {
            let v = d.vertex_count() as i64;
            let survivors = Coefficient::one().add(&Coefficient::monomial(2, rat_int(-(v - 1))));
            let reduced = if d.vertex_count() == 1 {
                Diagram::empty_scalar()
            } else {
                d.remove_vertex(root, &[])?.unrooted()?
            };
            out.add_diagram(&reduced, c.mul(&survivors))?;
        } else {
            out.add_diagram(&d.unrooted()?, c.shift(2))?;
        }
    }
    Ok(out)
}

// ---- exact second moments -----------------------------------------------------

/// Exact second moment of a proper diagram under any unit-variance ensemble:
/// |Aut| * (n-1)...(n-|V|+1) / n^{|E|} for rooted diagrams, with the falling
/// factorial starting at n for scalar diagrams. The mean is 0 except for the
/// singleton.
pub fn exact_second_moment(cd: &CanonicalDiagram) -> Result<Coefficient> {
    let d = cd.diagram();
    if !d.is_proper() {
        return Err(Error::ImproperDiagram(format!("{d}")));
    }
    let v = d.vertex_count() as i64;
    let e = d.weighted_edge_count() as i64;
    // falling factorial as a polynomial in n
    let start = if d.is_scalar() { 0 } else { 1 };
    let mut poly: Vec<BigInt> = vec![BigInt::one()]; // poly[m] = coefficient of n^m
    for j in start..v {
        // multiply by (n - j)
        let mut next = vec![BigInt::from(0); poly.len() + 1];
        for (m, c) in poly.iter().enumerate() {
            next[m + 1] += c;
            next[m] -= c * BigInt::from(j);
        }
        poly = next;
    }
    let aut = Rat::from_integer(BigInt::from(cd.aut()));
    let mut out = Coefficient::zero();
    for (m, c) in poly.into_iter().enumerate() {
        if c == BigInt::from(0) {
            continue;
        }
        let twice_k = 2 * (e - m as i64);
        out.add_term(twice_k, Rat::from_integer(c) * aut.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;
    use crate::diagram::EdgeLabel::{Plain, TwoLabeled};

    fn canon(d: &Diagram) -> CanonicalDiagram {
        canonicalize(d).unwrap()
    }

    fn term(d: &Diagram) -> DiagramExpression {
        DiagramExpression::from_diagram(d).unwrap()
    }

    #[test]
    fn matmul_on_singleton() {
        let out = multiply_by_a(&DiagramExpression::singleton()).unwrap();
        assert_eq!(out.len(), 2);
        let edge = canon(&Diagram::rooted_path(1));
        let selfloop = canon(&Diagram::new(1, Some(0), [(0, 0, 1, Plain)]).unwrap());
        assert_eq!(out.coefficient(&edge).as_rat().unwrap(), rat(1, 1));
        assert_eq!(out.coefficient(&selfloop).as_rat().unwrap(), rat(1, 1));
    }

    #[test]
    fn pointwise_square_of_edge() {
        let edge = term(&Diagram::rooted_path(1));
        let sq = pointwise_product(&[edge.clone(), edge], &Limits::default()).unwrap();
        // Z_edge ⊙ Z_edge = Z_{2-star} + Z_{double edge}
        assert_eq!(sq.len(), 2);
        let star = canon(&Diagram::root_star(2));
        let dbl = canon(&Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap());
        assert_eq!(sq.coefficient(&star).as_rat().unwrap(), rat(1, 1));
        assert_eq!(sq.coefficient(&dbl).as_rat().unwrap(), rat(1, 1));
    }

    #[test]
    fn pointwise_cube_of_edge() {
        let edge = term(&Diagram::rooted_path(1));
        let cube = pointwise_product(&[edge.clone(), edge.clone(), edge], &Limits::default()).unwrap();
        // 5 intersection patterns on 3 one-vertex factors:
        // Z_{3-star} + 3 Z_{double+single at root} + Z_{triple edge}
        let star3 = canon(&Diagram::root_star(3));
        let dbl_single = canon(
            &Diagram::new(3, Some(0), [(0, 1, 2, Plain), (0, 2, 1, Plain)]).unwrap(),
        );
        let triple = canon(&Diagram::new(2, Some(0), [(0, 1, 3, Plain)]).unwrap());
        assert_eq!(cube.len(), 3);
        assert_eq!(cube.coefficient(&star3).as_rat().unwrap(), rat(1, 1));
        assert_eq!(cube.coefficient(&dbl_single).as_rat().unwrap(), rat(3, 1));
        assert_eq!(cube.coefficient(&triple).as_rat().unwrap(), rat(1, 1));
    }

    #[test]
    fn singleton_is_pointwise_identity() {
        let one = DiagramExpression::singleton();
        let e = multiply_by_a(&term(&Diagram::rooted_path(1))).unwrap();
        let prod = pointwise_product(&[one, e.clone()], &Limits::default()).unwrap();
        assert_eq!(prod, e);
    }

    #[test]
    fn scalar_square_of_edge() {
        let sedge = term(&Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap());
        let sq = scalar_product(&[sedge.clone(), sedge], &Limits::default()).unwrap();
        // two floating edges + 4 single merges (2-path) + 2 double merges (double edge)
        let float2 = canon(&Diagram::new(4, None, [(0, 1, 1, Plain), (2, 3, 1, Plain)]).unwrap());
        let path2 = canon(&Diagram::new(3, None, [(0, 1, 1, Plain), (1, 2, 1, Plain)]).unwrap());
        let dbl = canon(&Diagram::new(2, None, [(0, 1, 2, Plain)]).unwrap());
        assert_eq!(sq.coefficient(&float2).as_rat().unwrap(), rat(1, 1));
        assert_eq!(sq.coefficient(&path2).as_rat().unwrap(), rat(4, 1));
        assert_eq!(sq.coefficient(&dbl).as_rat().unwrap(), rat(2, 1));
    }

    #[test]
    fn scalar_one_is_identity() {
        let e = term(&Diagram::rooted_path(2));
        let prod = scalar_product(&[DiagramExpression::scalar_one(), e.clone()], &Limits::default()).unwrap();
        assert_eq!(prod, e);
    }

    #[test]
    fn vector_times_scalar_keeps_floating_term() {
        let edge = term(&Diagram::rooted_path(1));
        let sedge = term(&Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap());
        let prod = scalar_product(&[edge, sedge], &Limits::default()).unwrap();
        assert_eq!(prod.kind(), ExprKind::Vector);
        let float = canon(
            &Diagram::new(4, Some(0), [(0, 1, 1, Plain), (2, 3, 1, Plain)]).unwrap(),
        );
        assert_eq!(prod.coefficient(&float).as_rat().unwrap(), rat(1, 1));
    }

    #[test]
    fn budget_is_enforced() {
        let mut limits = Limits::default();
        limits.product_vertex_budget = 3;
        let p2 = term(&Diagram::rooted_path(2));
        let err = pointwise_product(&[p2.clone(), p2], &limits).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn double_edge_removal_identity() {
        // rooted double edge -> singleton - (1/n) singleton + 2-labeled edge
        let dbl = canon(&Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap());
        let out = remove_hanging_double_edge(&dbl, &Coefficient::one()).unwrap();
        let singleton = canon(&Diagram::singleton());
        let labeled = canon(&Diagram::new(2, Some(0), [(0, 1, 1, TwoLabeled)]).unwrap());
        let c = out.coefficient(&singleton);
        assert_eq!(c, Coefficient::one().add(&Coefficient::monomial(2, rat(-1, 1))));
        assert_eq!(out.coefficient(&labeled).as_rat().unwrap(), rat(1, 1));
    }

    #[test]
    fn strip_hanging_chain_is_singleton_asymptotically() {
        for depth in 1..4 {
            let edges: Vec<_> = (0..depth).map(|i| (i, i + 1, 2, Plain)).collect();
            let chain = term(&Diagram::new(depth + 1, Some(0), edges).unwrap());
            let stripped = strip_hanging(&chain).unwrap();
            let mut expect = DiagramExpression::singleton();
            assert_eq!(stripped.asymptotic, expect);
            // exact expression has no hanging double edges left
            for (cd, _) in stripped.exact.iter() {
                assert!(cd.diagram().find_hanging_double_edge().is_none());
            }
            expect = stripped.asymptotic;
            let _ = expect;
        }
    }

    #[test]
    fn strip_edge_double_edge_path() {
        // root - a (single), a - b (double) reduces to the rooted edge
        let d = term(&Diagram::new(3, Some(0), [(0, 1, 1, Plain), (1, 2, 2, Plain)]).unwrap());
        let stripped = strip_hanging(&d).unwrap();
        assert_eq!(stripped.asymptotic, term(&Diagram::rooted_path(1)));
    }

    #[test]
    fn repeated_label_edge() {
        // Z~_edge = Z_edge + Z_selfloop
        let edge = canon(&Diagram::rooted_path(1));
        let ex = repeated_label_expand(&edge).unwrap();
        assert_eq!(ex.len(), 2);
        let selfloop = canon(&Diagram::new(1, Some(0), [(0, 0, 1, Plain)]).unwrap());
        assert_eq!(ex.coefficient(&selfloop).as_rat().unwrap(), rat(1, 1));
        // Z~_singleton = Z_singleton
        let s = canon(&Diagram::singleton());
        assert_eq!(repeated_label_expand(&s).unwrap(), DiagramExpression::singleton());
    }

    #[test]
    fn moebius_inverse_of_edge() {
        // Z_edge = Z~_edge - Z~_selfloop
        let edge = canon(&Diagram::rooted_path(1));
        let t = injective_from_repeated(&edge).unwrap();
        let selfloop = canon(&Diagram::new(1, Some(0), [(0, 0, 1, Plain)]).unwrap());
        assert_eq!(t.terms.len(), 2);
        assert_eq!(t.terms.get(&edge).unwrap().as_rat().unwrap(), rat(1, 1));
        assert_eq!(t.terms.get(&selfloop).unwrap().as_rat().unwrap(), rat(-1, 1));
    }

    #[test]
    fn moebius_round_trip_small_battery() {
        let battery = vec![
            Diagram::singleton(),
            Diagram::rooted_path(1),
            Diagram::rooted_path(2),
            Diagram::root_star(2),
            Diagram::rooted_cycle(3),
            Diagram::new(3, Some(0), [(0, 1, 2, Plain), (1, 2, 1, TwoLabeled)]).unwrap(),
            Diagram::new(3, None, [(0, 1, 1, Plain), (1, 2, 1, Plain)]).unwrap(),
            Diagram::rooted_path(4),
        ];
        for d in battery {
            let cd = canon(&d);
            let t = injective_from_repeated(&cd).unwrap();
            let back = expand_tilde(&t).unwrap();
            let expect = term(&d);
            assert_eq!(back, expect, "round trip failed for {d}");
        }
    }

    #[test]
    fn unroot_average_examples() {
        // singleton -> exactly 1
        let one = unroot_average(&DiagramExpression::singleton()).unwrap();
        assert_eq!(one, DiagramExpression::scalar_one());
        // edge -> n^{-1} * scalar edge
        let e = unroot_average(&term(&Diagram::rooted_path(1))).unwrap();
        let sedge = canon(&Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap());
        assert_eq!(e.coefficient(&sedge), Coefficient::monomial(2, rat(1, 1)));
        // root + floating edge: root isolated, exact (1 - 2/n) factor
        let float = term(&Diagram::new(3, Some(0), [(1, 2, 1, Plain)]).unwrap());
        let u = unroot_average(&float).unwrap();
        let expect = Coefficient::one().add(&Coefficient::monomial(2, rat(-2, 1)));
        assert_eq!(u.coefficient(&sedge), expect);
    }

    #[test]
    fn second_moment_formulas() {
        // edge: (n-1)/n = 1 - n^{-1}
        let edge = canon(&Diagram::rooted_path(1));
        let m = exact_second_moment(&edge).unwrap();
        assert_eq!(m, Coefficient::one().add(&Coefficient::monomial(2, rat(-1, 1))));
        // (1,2)-tree: 2 (n-1)(n-2)(n-3) / n^3
        let t12 = canon(&Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap());
        let m = exact_second_moment(&t12).unwrap();
        assert_eq!(m.eval_exact(4).unwrap(), rat(2 * 3 * 2 * 1, 64));
        assert_eq!(m.eval_exact(10).unwrap(), rat(2 * 9 * 8 * 7, 1000));
        // singleton: 1
        let s = canon(&Diagram::singleton());
        assert_eq!(exact_second_moment(&s).unwrap(), Coefficient::one());
        // improper input rejected
        let dbl = canon(&Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap());
        assert!(exact_second_moment(&dbl).is_err());
    }
}
