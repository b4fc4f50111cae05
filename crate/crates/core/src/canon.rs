//! Canonical forms, automorphism counts, and cached structure for diagrams.
//!
//! Trees use bottom-up canonical sorting of subtree codes, which yields the
//! root-fixing automorphism count as a product over branch groups. General
//! multigraphs use iterated color refinement followed by an exhaustive search
//! over class-respecting vertex orderings; diagrams in scope stay small, so the
//! fallback cost is acceptable.
//!
//! The canonical key is a deterministic byte string over the canonical vertex
//! numbering (root first when present):
//!
//! ```text
//! byte 0: b'V' (rooted) or b'S' (scalar)
//! byte 1: vertex count
//! byte 2: root index (0 for rooted, 0xff for scalar)
//! then per edge, sorted: [u, v, label (1|2), multiplicity (u16 big-endian)]
//! ```
//!
//! Byte-equal keys hold exactly for isomorphic diagrams (root- and
//! label-preserving isomorphism).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};

/// One isomorphism class of root subtrees, for rooted trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchInfo {
    /// Canonical key of the branch (the subtree together with the root).
    pub key: Vec<u8>,
    /// Canonical branch diagram (a rooted tree whose root has degree 1).
    pub diagram: Diagram,
    /// Number of copies of this branch at the root.
    pub count: usize,
    /// Root-fixing automorphism count of the branch.
    pub aut: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeInfo {
    pub branches: Vec<BranchInfo>,
    pub depth: usize,
}

/// A diagram in canonical form with cached structural data.
#[derive(Debug, Clone)]
pub struct CanonicalDiagram {
    key: Vec<u8>,
    diagram: Diagram,
    aut: u64,
    isolated: usize,
    tree: Option<TreeInfo>,
}

impl PartialEq for CanonicalDiagram {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for CanonicalDiagram {}
impl PartialOrd for CanonicalDiagram {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for CanonicalDiagram {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}
impl std::hash::Hash for CanonicalDiagram {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl CanonicalDiagram {
    pub fn key(&self) -> &[u8] {
        &self.key
    }

    pub fn key_hex(&self) -> String {
        self.key.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    pub fn aut(&self) -> u64 {
        self.aut
    }

    pub fn vertex_count(&self) -> usize {
        self.diagram.vertex_count()
    }

    pub fn weighted_edge_count(&self) -> u64 {
        self.diagram.weighted_edge_count()
    }

    pub fn isolated_count(&self) -> usize {
        self.isolated
    }

    pub fn is_scalar(&self) -> bool {
        self.diagram.is_scalar()
    }

    pub fn is_tree(&self) -> bool {
        self.tree.is_some()
    }

    /// Branch multiset and depth; present exactly for rooted trees.
    pub fn tree(&self) -> Option<&TreeInfo> {
        self.tree.as_ref()
    }

    pub fn is_singleton(&self) -> bool {
        !self.is_scalar() && self.vertex_count() == 1
    }

    /// Root degree 1, i.e. membership in the family of one-branch trees.
    pub fn is_one_branch_tree(&self) -> bool {
        self.tree().map_or(false, |t| t.branches.iter().map(|b| b.count).sum::<usize>() == 1)
    }
}

impl Serialize for CanonicalDiagram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.diagram.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CanonicalDiagram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let d = Diagram::deserialize(deserializer)?;
        canonicalize(&d).map_err(serde::de::Error::custom)
    }
}

/// Process-wide interning cache, keyed by the raw (input-numbering) encoding.
/// Safe under concurrent reads and inserts.
fn cache() -> &'static Mutex<HashMap<Vec<u8>, CanonicalDiagram>> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<u8>, CanonicalDiagram>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Canonical form of `d`; idempotent and independent of the input numbering.
pub fn canonicalize(d: &Diagram) -> Result<CanonicalDiagram> {
    let raw = d.raw_encoding();
    if let Some(hit) = cache().lock().unwrap().get(&raw) {
        return Ok(hit.clone());
    }
    let out = canonicalize_uncached(d)?;
    cache().lock().unwrap().insert(raw, out.clone());
    Ok(out)
}

pub fn canonicalize_uncached(d: &Diagram) -> Result<CanonicalDiagram> {
    let (canon, aut, tree) = if d.is_rooted_tree() {
        let (canon, aut, info) = canonical_tree(d)?;
        (canon, aut, Some(info))
    } else {
        let (canon, aut) = canonical_general(d)?;
        (canon, aut, None)
    };
    let isolated = canon.isolated_set().len();
    let key = canon.raw_encoding();
    Ok(CanonicalDiagram { key, diagram: canon, aut, isolated, tree })
}

// ---- rooted trees -------------------------------------------------------

struct TreeScratch {
    children: Vec<Vec<usize>>,
}

fn canonical_tree(d: &Diagram) -> Result<(Diagram, u64, TreeInfo)> {
    let n = d.vertex_count();
    let root = d.root().expect("rooted tree");
    let mut adj = vec![Vec::new(); n];
    for e in d.edges() {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    // orient away from the root
    let mut children = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                children[v].push(w);
                stack.push(w);
            }
        }
    }
    let mut scratch = TreeScratch { children };
    let (_, aut, height) = sort_subtree(&mut scratch, root);

    // canonical numbering: preorder with children in sorted-code order
    let mut order = Vec::with_capacity(n);
    preorder(&scratch, root, &mut order);
    let mut new_id = vec![0usize; n];
    for (idx, &v) in order.iter().enumerate() {
        new_id[v] = idx;
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 0..n {
        for &c in &scratch.children[v] {
            edges.push((new_id[v], new_id[c], 1, EdgeLabel::Plain));
        }
    }
    let canon = Diagram::new(n, Some(0), edges)?;

    // branch classes at the root
    let mut branches: Vec<BranchInfo> = Vec::new();
    for &c in &scratch.children[root] {
        let branch = branch_diagram(&scratch, c);
        let bc = canonicalize(&branch)?;
        match branches.iter_mut().find(|b| b.key == bc.key()) {
            Some(b) => b.count += 1,
            None => branches.push(BranchInfo {
                key: bc.key().to_vec(),
                diagram: bc.diagram().clone(),
                count: 1,
                aut: bc.aut(),
            }),
        }
    }
    branches.sort_by(|a, b| a.key.cmp(&b.key));
    Ok((canon, aut, TreeInfo { branches, depth: height }))
}

/// Sorts children of `v` by canonical subtree code; returns (code, aut, height).
fn sort_subtree(scratch: &mut TreeScratch, v: usize) -> (Vec<u8>, u64, usize) {
    let kids = scratch.children[v].clone();
    let mut coded: Vec<(Vec<u8>, u64, usize, usize)> = kids
        .into_iter()
        .map(|c| {
            let (code, aut, h) = sort_subtree(scratch, c);
            (code, aut, h, c)
        })
        .collect();
    coded.sort();
    scratch.children[v] = coded.iter().map(|(_, _, _, c)| *c).collect();

    let mut code = vec![b'('];
    let mut aut: u64 = 1;
    let mut height = 0usize;
    let mut i = 0;
    while i < coded.len() {
        let mut j = i;
        while j < coded.len() && coded[j].0 == coded[i].0 {
            j += 1;
        }
        let group = (j - i) as u64;
        aut = aut
            .checked_mul(factorial(group))
            .and_then(|a| a.checked_mul(pow_u64(coded[i].1, group)))
            .expect("aut overflow");
        for k in i..j {
            code.extend_from_slice(&coded[k].0);
            height = height.max(coded[k].2 + 1);
        }
        i = j;
    }
    code.push(b')');
    (code, aut, height)
}

fn preorder(scratch: &TreeScratch, v: usize, out: &mut Vec<usize>) {
    out.push(v);
    for &c in &scratch.children[v] {
        preorder(scratch, c, out);
    }
}

/// The branch through child `c`: a fresh root attached to the subtree at `c`.
fn branch_diagram(scratch: &TreeScratch, c: usize) -> Diagram {
    let mut order = Vec::new();
    preorder(scratch, c, &mut order);
    let mut new_id = HashMap::new();
    for (idx, &v) in order.iter().enumerate() {
        new_id.insert(v, idx + 1);
    }
    let mut edges = vec![(0usize, 1usize, 1u32, EdgeLabel::Plain)];
    for &v in &order {
        for &w in &scratch.children[v] {
            edges.push((new_id[&v], new_id[&w], 1, EdgeLabel::Plain));
        }
    }
    Diagram::new(order.len() + 1, Some(0), edges).expect("branch is a valid tree")
}

fn factorial(k: u64) -> u64 {
    (2..=k).product::<u64>().max(1)
}

fn pow_u64(base: u64, exp: u64) -> u64 {
    let mut out = 1u64;
    for _ in 0..exp {
        out = out.checked_mul(base).expect("aut overflow");
    }
    out
}

// ---- general multigraphs -------------------------------------------------

const ORDERING_BUDGET: u64 = 10_000_000;

fn canonical_general(d: &Diagram) -> Result<(Diagram, u64)> {
    let n = d.vertex_count();
    if n == 0 {
        return Ok((d.clone(), 1));
    }
    let colors = refine_colors(d);

    // group vertices by color; colors are canonical across isomorphic inputs
    let class_count = colors.iter().max().unwrap() + 1;
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for v in 0..n {
        classes[colors[v]].push(v);
    }
    let mut budget: u64 = 1;
    for c in &classes {
        budget = budget.saturating_mul(factorial(c.len() as u64));
        if budget > ORDERING_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "canonical ordering search".into(),
                needed: usize::MAX,
                limit: ORDERING_BUDGET as usize,
            });
        }
    }

    let mut best: Option<Vec<u8>> = None;
    let mut best_count: u64 = 0;
    let mut best_perm: Vec<usize> = Vec::new();

    // iterate the cartesian product of per-class permutations
    let mut perms: Vec<Vec<usize>> = classes.clone();
    let starts: Vec<usize> = {
        let mut s = Vec::with_capacity(class_count);
        let mut acc = 0;
        for c in &classes {
            s.push(acc);
            acc += c.len();
        }
        s
    };
    let mut new_id = vec![0usize; n];
    loop {
        for (ci, perm) in perms.iter().enumerate() {
            for (off, &v) in perm.iter().enumerate() {
                new_id[v] = starts[ci] + off;
            }
        }
        let enc = encode_relabeled(d, &new_id);
        match &best {
            None => {
                best = Some(enc);
                best_count = 1;
                best_perm = new_id.clone();
            }
            Some(b) => match enc.cmp(b) {
                std::cmp::Ordering::Less => {
                    best = Some(enc);
                    best_count = 1;
                    best_perm = new_id.clone();
                }
                std::cmp::Ordering::Equal => best_count += 1,
                std::cmp::Ordering::Greater => {}
            },
        }
        if !next_perm_product(&mut perms) {
            break;
        }
    }

    let canon = d.relabeled(&best_perm)?;
    Ok((canon, best_count))
}

/// Iterated refinement: signature = (own color, sorted incident (mult, label,
/// self?, neighbor color) entries). The root, when present, seeds its own color.
fn refine_colors(d: &Diagram) -> Vec<usize> {
    let n = d.vertex_count();
    let mut colors: Vec<usize> = vec![0; n];
    if let Some(r) = d.root() {
        for (v, c) in colors.iter_mut().enumerate() {
            *c = if v == r { 0 } else { 1 };
        }
    }
    loop {
        let mut sigs: Vec<(usize, Vec<(u32, u8, bool, usize)>)> = (0..n)
            .map(|v| {
                let mut inc = Vec::new();
                for e in d.edges() {
                    if e.u == e.v {
                        if e.u == v {
                            inc.push((e.multiplicity, e.label.as_u8(), true, colors[v]));
                        }
                    } else if e.u == v {
                        inc.push((e.multiplicity, e.label.as_u8(), false, colors[e.v]));
                    } else if e.v == v {
                        inc.push((e.multiplicity, e.label.as_u8(), false, colors[e.u]));
                    }
                }
                inc.sort();
                (colors[v], inc)
            })
            .collect();
        let mut uniq: Vec<_> = sigs.clone();
        uniq.sort();
        uniq.dedup();
        let next: Vec<usize> =
            (0..n).map(|v| uniq.binary_search(&sigs[v]).unwrap()).collect();
        sigs.clear();
        if next == colors {
            return colors;
        }
        colors = next;
    }
}

fn encode_relabeled(d: &Diagram, new_id: &[usize]) -> Vec<u8> {
    let mut edges: Vec<(usize, usize, u8, u16)> = d
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = {
                let (x, y) = (new_id[e.u], new_id[e.v]);
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            };
            (a, b, e.label.as_u8(), e.multiplicity as u16)
        })
        .collect();
    edges.sort();
    let mut out = Vec::with_capacity(3 + 5 * edges.len());
    out.push(if d.root().is_some() { b'V' } else { b'S' });
    out.push(d.vertex_count() as u8);
    out.push(if d.root().is_some() { 0 } else { 0xff });
    for (u, v, l, m) in edges {
        out.push(u as u8);
        out.push(v as u8);
        out.push(l);
        out.extend_from_slice(&m.to_be_bytes());
    }
    out
}

/// Advances the product of per-class permutations; false when exhausted.
fn next_perm_product(perms: &mut [Vec<usize>]) -> bool {
    for p in perms.iter_mut() {
        if next_permutation(p) {
            return true;
        }
        p.sort_unstable();
    }
    false
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::EdgeLabel::*;

    /// Brute-force root- and label-preserving automorphism count; the
    /// independent oracle for `aut`.
    pub(crate) fn brute_force_aut(d: &Diagram) -> u64 {
        let n = d.vertex_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let reference = d.raw_encoding();
        let mut count = 0u64;
        loop {
            let ok = d.root().map_or(true, |r| perm[r] == r);
            if ok && d.relabeled(&perm).map(|r| r.raw_encoding()) == Ok(reference.clone()) {
                count += 1;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        count
    }

    pub(crate) fn brute_force_isomorphic(a: &Diagram, b: &Diagram) -> bool {
        if a.vertex_count() != b.vertex_count() || a.root().is_some() != b.root().is_some() {
            return false;
        }
        let n = a.vertex_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let target = b.raw_encoding();
        loop {
            let ok = match (a.root(), b.root()) {
                (Some(ra), Some(rb)) => perm[ra] == rb,
                _ => true,
            };
            if ok && a.relabeled(&perm).map(|r| r.raw_encoding()) == Ok(target.clone()) {
                return true;
            }
            if !next_permutation(&mut perm) {
                return false;
            }
        }
    }

    #[test]
    fn aut_examples() {
        // rooted single edge
        let edge = Diagram::rooted_path(1);
        assert_eq!(canonicalize(&edge).unwrap().aut(), 1);
        // (1,2)-tree: root - v; v has two leaf children
        let t12 = Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap();
        assert_eq!(canonicalize(&t12).unwrap().aut(), 2);
        // (3-star)+ : root - center with 3 leaves
        let s3 = Diagram::star_plus(3);
        assert_eq!(canonicalize(&s3).unwrap().aut(), 6);
    }

    #[test]
    fn canonical_key_invariant_under_relabeling() {
        let t12 = Diagram::new(4, Some(2), [(2, 1, 1, Plain), (1, 0, 1, Plain), (1, 3, 1, Plain)]).unwrap();
        let t12b = Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap();
        assert_eq!(canonicalize(&t12).unwrap().key(), canonicalize(&t12b).unwrap().key());
        // multigraph with labels
        let a = Diagram::new(3, Some(1), [(1, 0, 2, Plain), (0, 2, 1, TwoLabeled)]).unwrap();
        let b = Diagram::new(3, Some(2), [(2, 1, 2, Plain), (1, 0, 1, TwoLabeled)]).unwrap();
        assert_eq!(canonicalize(&a).unwrap().key(), canonicalize(&b).unwrap().key());
    }

    #[test]
    fn distinct_structures_distinct_keys() {
        let path = Diagram::rooted_path(2);
        let star = Diagram::root_star(2);
        assert_ne!(canonicalize(&path).unwrap().key(), canonicalize(&star).unwrap().key());
        // label distinguishes
        let dbl = Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap();
        let lab = Diagram::new(2, Some(0), [(0, 1, 1, TwoLabeled)]).unwrap();
        assert_ne!(canonicalize(&dbl).unwrap().key(), canonicalize(&lab).unwrap().key());
    }

    #[test]
    fn aut_matches_brute_force_battery() {
        let battery = vec![
            Diagram::singleton(),
            Diagram::rooted_path(3),
            Diagram::root_star(3),
            Diagram::star_plus(2),
            Diagram::rooted_cycle(4),
            Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 2, Plain), (1, 3, 1, TwoLabeled)]).unwrap(),
            Diagram::new(5, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain), (1, 4, 1, Plain)])
                .unwrap(),
            Diagram::new(3, None, [(0, 1, 1, Plain), (1, 2, 1, Plain)]).unwrap(),
            Diagram::new(4, None, [(0, 1, 1, Plain), (2, 3, 1, Plain)]).unwrap(),
            Diagram::new(2, Some(0), [(0, 1, 3, Plain), (1, 1, 1, Plain)]).unwrap(),
        ];
        for d in battery {
            let c = canonicalize(&d).unwrap();
            assert_eq!(c.aut(), brute_force_aut(&d), "aut mismatch for {d}");
            // idempotence
            let again = canonicalize(c.diagram()).unwrap();
            assert_eq!(again.key(), c.key());
        }
    }

    #[test]
    fn tree_structure_examples() {
        let single = canonicalize(&Diagram::singleton()).unwrap();
        let info = single.tree().unwrap();
        assert!(info.branches.is_empty());
        assert_eq!(info.depth, 0);

        let t12 = Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap();
        let c = canonicalize(&t12).unwrap();
        let info = c.tree().unwrap();
        assert_eq!(info.depth, 2);
        assert_eq!(info.branches.len(), 1);
        assert_eq!(info.branches[0].count, 1);

        let star2 = canonicalize(&Diagram::root_star(2)).unwrap();
        let info = star2.tree().unwrap();
        assert_eq!(info.depth, 1);
        assert_eq!(info.branches.len(), 1);
        assert_eq!(info.branches[0].count, 2);
        // branch is the rooted edge
        assert_eq!(info.branches[0].key, canonicalize(&Diagram::rooted_path(1)).unwrap().key());

        // non-trees have no tree info
        assert!(canonicalize(&Diagram::rooted_cycle(3)).unwrap().tree().is_none());
        let dbl = Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap();
        assert!(canonicalize(&dbl).unwrap().tree().is_none());
    }

    #[test]
    fn tree_aut_factorization() {
        // |Aut(tau)| = prod over branches d! * aut(branch)^d
        let trees = vec![
            Diagram::rooted_path(4),
            Diagram::root_star(4),
            Diagram::star_plus(4),
            Diagram::new(
                7,
                Some(0),
                [
                    (0, 1, 1, Plain),
                    (0, 2, 1, Plain),
                    (1, 3, 1, Plain),
                    (1, 4, 1, Plain),
                    (2, 5, 1, Plain),
                    (2, 6, 1, Plain),
                ],
            )
            .unwrap(),
        ];
        for t in trees {
            let c = canonicalize(&t).unwrap();
            let info = c.tree().unwrap();
            let mut expect = 1u64;
            for b in &info.branches {
                expect *= factorial(b.count as u64) * pow_u64(b.aut, b.count as u64);
            }
            assert_eq!(c.aut(), expect, "factorization mismatch for {t}");
            assert_eq!(c.aut(), brute_force_aut(&t));
        }
    }

    #[test]
    fn scalar_diagrams_canonicalize() {
        let e1 = Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap();
        let c = canonicalize(&e1).unwrap();
        assert_eq!(c.aut(), 2); // unrooted edge swap
        let empty = canonicalize(&Diagram::empty_scalar()).unwrap();
        assert_eq!(empty.aut(), 1);
        assert_eq!(empty.vertex_count(), 0);
    }
}
