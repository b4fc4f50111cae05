//! Joint-moment verification: exact asymptotic predictions from the Gaussian
//! Hermite-tree model against Monte Carlo estimates over sampled ensembles.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::classify::strip_hanging_structure;
use crate::coeff::{rat_int, rat_to_f64, Rat};
use crate::diagram::Diagram;
use crate::ensemble::MatrixEnsemble;
use crate::error::Result;
use crate::eval::{all_quotients_forestlike, EvalMode, EvalSession};
use crate::hermite::hermite;
use crate::tree::branch_profile;
use crate::Limits;

/// Joint moment of diagram characters at a shared coordinate:
/// E[prod_j Z_{alpha_j, i} * prod_k n^{-c_k/2} Z_{beta_k}], with c_k the
/// component counts of the scalar factors and every vector factor normalized by
/// its floating-component count.
#[derive(Debug, Clone)]
pub struct MomentSpec {
    pub vector_factors: Vec<CanonicalDiagram>,
    pub scalar_factors: Vec<CanonicalDiagram>,
}

impl MomentSpec {
    pub fn vectors(diagrams: &[Diagram]) -> Result<Self> {
        Ok(Self {
            vector_factors: diagrams.iter().map(canonicalize).collect::<Result<_>>()?,
            scalar_factors: vec![],
        })
    }
}

/// The asymptotic limit of one factor: Hermite degrees per Gaussian variable.
/// Vector variables are branch keys; scalar variables are unrooted tree keys.
struct FactorLimit {
    /// (variable key, hermite degree, variance)
    vector_vars: Vec<(Vec<u8>, usize, u64)>,
    scalar_vars: Vec<(Vec<u8>, usize, u64)>,
}

fn factor_limit(cd: &CanonicalDiagram, rooted: bool) -> Result<Option<FactorLimit>> {
    let reduced = strip_hanging_structure(cd.diagram())?;
    // split into the root component and floating components
    let comps = reduced.components();
    let mut vector_vars = Vec::new();
    let mut scalar_vars: Vec<(Vec<u8>, usize, u64)> = Vec::new();
    for comp in comps {
        let contains_root = rooted && reduced.root().map_or(false, |r| comp.contains(&r));
        // extract the component as its own diagram
        let mut map = vec![usize::MAX; reduced.vertex_count()];
        for (idx, &v) in comp.iter().enumerate() {
            map[v] = idx;
        }
        let edges: Vec<_> = reduced
            .edges()
            .iter()
            .filter(|e| comp.contains(&e.u))
            .map(|e| (map[e.u], map[e.v], e.multiplicity, e.label))
            .collect();
        let root = if contains_root { reduced.root().map(|r| map[r]) } else { None };
        let sub = Diagram::new(comp.len(), root, edges)?;
        let sub_c = canonicalize(&sub)?;
        if contains_root {
            let Some(_) = sub_c.tree() else { return Ok(None) };
            for (key, d, aut) in branch_profile(&sub_c) {
                vector_vars.push((key, d, aut));
            }
        } else {
            // floating component: must be an unrooted tree
            if !sub.is_scalar() || sub.edges().len() != sub.vertex_count().saturating_sub(1)
                || !sub.is_proper()
            {
                return Ok(None);
            }
            match scalar_vars.iter_mut().find(|(k, _, _)| *k == sub_c.key()) {
                Some(slot) => slot.1 += 1,
                None => scalar_vars.push((sub_c.key().to_vec(), 1, sub_c.aut())),
            }
        }
    }
    Ok(Some(FactorLimit { vector_vars, scalar_vars }))
}

/// E[prod_j h_{k_j}(g; v)] for one Gaussian g of variance v, exactly.
fn hermite_product_expectation(degrees: &[usize], variance: u64) -> Rat {
    let v = rat_int(variance as i64);
    // multiply coefficient vectors, then integrate monomials
    let mut poly = vec![Rat::one()];
    for &k in degrees {
        let h = hermite(k, &v);
        let mut next = vec![Rat::zero(); poly.len() + h.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    let mut acc = Rat::zero();
    for (m, c) in poly.iter().enumerate() {
        if c.is_zero() || m % 2 == 1 {
            continue;
        }
        // E[g^m] = (m-1)!! v^{m/2}
        let mut moment = Rat::one();
        let mut j = m as i64 - 1;
        while j > 0 {
            moment *= rat_int(j);
            j -= 2;
        }
        for _ in 0..(m / 2) {
            moment *= &v;
        }
        acc += c * moment;
    }
    acc
}

/// The exact asymptotic joint moment from the Gaussian tree model.
pub fn predicted_moment(spec: &MomentSpec) -> Result<Rat> {
    let mut vector_degrees: Vec<(Vec<u8>, u64, Vec<usize>)> = Vec::new();
    let mut scalar_degrees: Vec<(Vec<u8>, u64, Vec<usize>)> = Vec::new();
    let push = |slot: &mut Vec<(Vec<u8>, u64, Vec<usize>)>, key: Vec<u8>, aut: u64, d: usize| {
        match slot.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, _, ds)) => ds.push(d),
            None => slot.push((key, aut, vec![d])),
        }
    };
    for cd in &spec.vector_factors {
        let Some(limit) = factor_limit(cd, true)? else { return Ok(Rat::zero()) };
        for (key, d, aut) in limit.vector_vars {
            push(&mut vector_degrees, key, aut, d);
        }
        for (key, d, aut) in limit.scalar_vars {
            push(&mut scalar_degrees, key, aut, d);
        }
    }
    for cd in &spec.scalar_factors {
        let Some(limit) = factor_limit(cd, false)? else { return Ok(Rat::zero()) };
        for (key, d, aut) in limit.scalar_vars {
            push(&mut scalar_degrees, key, aut, d);
        }
        debug_assert!(limit.vector_vars.is_empty());
    }
    let mut acc = Rat::one();
    for (_, aut, degrees) in vector_degrees.iter().chain(&scalar_degrees) {
        acc *= hermite_product_expectation(degrees, *aut);
        if acc.is_zero() {
            return Ok(acc);
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct McMomentResult {
    pub predicted: f64,
    pub predicted_exact: Rat,
    pub empirical: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Monte Carlo estimate of the joint moment over `reps` independent matrices.
/// Exchangeability over coordinates is exploited: factors whose Moebius
/// quotients are all forest-like are evaluated as full vectors and averaged
/// over every coordinate; the others are evaluated exactly at a fixed
/// coordinate subset.
pub fn mc_joint_moments(
    spec: &MomentSpec,
    ens: &MatrixEnsemble,
    reps: usize,
    coords_per_rep: usize,
    limits: &Limits,
) -> Result<McMomentResult> {
    let predicted_exact = predicted_moment(spec)?;
    let n = ens.n;
    let all_cheap = spec.vector_factors.iter().all(all_quotients_forestlike);
    let coords: Vec<usize> = if all_cheap {
        (0..n).collect()
    } else {
        let stride = (n / coords_per_rep.max(1)).max(1);
        (0..coords_per_rep.max(1)).map(|k| (k * stride) % n).collect()
    };

    let mut per_rep = Vec::with_capacity(reps);
    for rep in 0..reps {
        let m = ens.with_seed(ens.seed.wrapping_add(rep as u64)).sample()?;
        let mut session = EvalSession::new(&m, EvalMode::Moebius, limits.clone());
        // scalar factors (normalized)
        let mut scalar_part = 1.0;
        for cd in &spec.scalar_factors {
            let v = session
                .eval_diagram(cd)?
                .as_scalar()
                .ok_or_else(|| crate::error::Error::Internal("scalar factor".into()))?;
            let c = cd.diagram().components().len();
            scalar_part *= v * (n as f64).powf(-(c as f64) / 2.0);
        }
        // vector factors at the shared coordinates
        let mut prod = vec![scalar_part; coords.len()];
        for cd in &spec.vector_factors {
            let norm = (n as f64).powf(-(cd.diagram().floating_component_count() as f64) / 2.0);
            if all_cheap {
                let v = session.eval_diagram(cd)?;
                let v = v.as_vector().unwrap();
                for (slot, &i) in coords.iter().enumerate() {
                    prod[slot] *= v[i] * norm;
                }
            } else {
                let vals = session.eval_diagram_coords(cd, &coords)?;
                for (slot, v) in vals.into_iter().enumerate() {
                    prod[slot] *= v * norm;
                }
            }
        }
        per_rep.push(prod.iter().sum::<f64>() / prod.len() as f64);
    }
    let mean = per_rep.iter().sum::<f64>() / reps as f64;
    let var = per_rep.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps.max(2) - 1) as f64;
    Ok(McMomentResult {
        predicted: rat_to_f64(&predicted_exact),
        predicted_exact,
        empirical: mean,
        stderr: (var / reps as f64).sqrt(),
        reps,
    })
}

/// The fixed tree battery used by the classification checks.
pub fn tree_battery() -> Vec<(&'static str, Diagram)> {
    use crate::diagram::EdgeLabel::Plain;
    vec![
        ("edge", Diagram::rooted_path(1)),
        ("2-path", Diagram::rooted_path(2)),
        (
            "(1,2)-tree",
            Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap(),
        ),
        ("2-star", Diagram::root_star(2)),
        ("3-path", Diagram::rooted_path(3)),
    ]
}

/// Exact variances of the battery members in the asymptotic model.
pub fn battery_variances() -> Vec<(String, Rat)> {
    tree_battery()
        .into_iter()
        .map(|(name, d)| {
            let cd = canonicalize(&d).unwrap();
            (name.to_string(), Rat::from_integer(BigInt::from(cd.aut())))
        })
        .collect()
}
