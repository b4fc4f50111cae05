//! Rooted and scalar Fourier diagrams: unlabeled undirected multigraphs with
//! edge multiplicities, optional "2"-labels, and an optional root vertex.
//!
//! A rooted diagram denotes the vector whose i-th entry sums, over injective
//! vertex labelings sending the root to i, the product of one matrix entry per
//! edge. A scalar diagram (no root) denotes the analogous scalar sum. A
//! 2-labeled edge denotes the factor `A_uv^2 - 1/n` and counts twice toward the
//! weighted edge count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Plain,
    TwoLabeled,
}

impl EdgeLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            EdgeLabel::Plain => 1,
            EdgeLabel::TwoLabeled => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(EdgeLabel::Plain),
            2 => Ok(EdgeLabel::TwoLabeled),
            other => Err(Error::InvalidDiagram(format!("edge label must be 1 or 2, got {other}"))),
        }
    }
}

/// One multiedge, normalized so `u <= v`. `u == v` is a self-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub multiplicity: u32,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagram {
    vertex_count: usize,
    root: Option<usize>,
    edges: Vec<Edge>,
}

impl Diagram {
    /// Builds a diagram and checks the structural invariants: indices in range,
    /// multiplicities >= 1, and no isolated vertex except possibly the root.
    pub fn new(
        vertex_count: usize,
        root: Option<usize>,
        edges: impl IntoIterator<Item = (usize, usize, u32, EdgeLabel)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize, EdgeLabel), u64> = BTreeMap::new();
        for (u, v, m, label) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidDiagram(format!(
                    "edge ({u},{v}) out of range for {vertex_count} vertices"
                )));
            }
            if m == 0 {
                return Err(Error::InvalidDiagram("edge multiplicity must be >= 1".into()));
            }
            let (a, b) = if u <= v { (u, v) } else { (v, u) };
            *merged.entry((a, b, label)).or_insert(0) += m as u64;
        }
        if let Some(r) = root {
            if r >= vertex_count {
                return Err(Error::InvalidDiagram(format!(
                    "root {r} out of range for {vertex_count} vertices"
                )));
            }
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v, label), m)| {
                let multiplicity = u32::try_from(m)
                    .map_err(|_| Error::InvalidDiagram("edge multiplicity overflow".into()))?;
                Ok(Edge { u, v, multiplicity, label })
            })
            .collect::<Result<_>>()?;

        let d = Self { vertex_count, root, edges };
        for v in 0..vertex_count {
            if Some(v) != root && !d.edges.iter().any(|e| e.u == v || e.v == v) {
                return Err(Error::InvalidDiagram(format!("vertex {v} is isolated and not the root")));
            }
        }
        if root.is_none() {
            // Scalar diagrams allow no isolated vertices at all; the loop above
            // already covered every vertex in that case.
        }
        Ok(d)
    }

    /// The one-vertex rooted diagram (the all-ones vector).
    pub fn singleton() -> Self {
        Self { vertex_count: 1, root: Some(0), edges: vec![] }
    }

    /// The empty scalar diagram (the constant 1).
    pub fn empty_scalar() -> Self {
        Self { vertex_count: 0, root: None, edges: vec![] }
    }

    /// Rooted path with `len` edges; `len = 0` gives the singleton.
    pub fn rooted_path(len: usize) -> Self {
        let edges = (0..len).map(|i| (i, i + 1, 1, EdgeLabel::Plain));
        Self::new(len + 1, Some(0), edges).expect("path is valid")
    }

    /// Root attached to a center which carries `d` leaves: the (d-star)+ diagram.
    pub fn star_plus(d: usize) -> Self {
        let mut edges = vec![(0usize, 1usize, 1u32, EdgeLabel::Plain)];
        for leaf in 0..d {
            edges.push((1, 2 + leaf, 1, EdgeLabel::Plain));
        }
        Self::new(d + 2, Some(0), edges).expect("star is valid")
    }

    /// Root with `d` leaf children (the root-centered star).
    pub fn root_star(d: usize) -> Self {
        let edges = (0..d).map(|leaf| (0, 1 + leaf, 1, EdgeLabel::Plain));
        Self::new(d + 1, Some(0), edges).expect("star is valid")
    }

    /// Rooted cycle through `len` vertices (len >= 3 for a proper cycle).
    pub fn rooted_cycle(len: usize) -> Self {
        let edges = (0..len).map(|i| (i, (i + 1) % len, 1, EdgeLabel::Plain));
        Self::new(len, Some(0), edges).expect("cycle is valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn is_scalar(&self) -> bool {
        self.root.is_none()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// |E(α)| with 2-labeled edges counted twice.
    pub fn weighted_edge_count(&self) -> u64 {
        self.edges
            .iter()
            .map(|e| e.multiplicity as u64 * if e.label == EdgeLabel::TwoLabeled { 2 } else { 1 })
            .sum()
    }

    /// I(α): non-root vertices whose incident edges all have multiplicity >= 2 or
    /// are self-loops; 2-labeled edges are treated like plain edges here.
    pub fn isolated_set(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        'vertex: for v in 0..self.vertex_count {
            if Some(v) == self.root {
                continue;
            }
            let mut incident = false;
            for e in &self.edges {
                if e.u == v || e.v == v {
                    incident = true;
                    if e.u != e.v && e.multiplicity < 2 {
                        continue 'vertex;
                    }
                }
            }
            if incident {
                out.insert(v);
            }
        }
        out
    }

    /// Connected components as sorted vertex lists (edges of any label connect).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.vertex_count {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Components not containing the root (0 for scalar diagrams).
    pub fn floating_component_count(&self) -> usize {
        match self.root {
            None => 0,
            Some(r) => self.components().iter().filter(|c| !c.contains(&r)).count(),
        }
    }

    /// Rooted tree: connected, all edges plain with multiplicity 1, no self-loops,
    /// and exactly |V|-1 edges.
    pub fn is_rooted_tree(&self) -> bool {
        self.root.is_some()
            && self.edges.iter().all(|e| e.label == EdgeLabel::Plain && e.multiplicity == 1 && e.u != e.v)
            && self.edges.len() == self.vertex_count - 1
            && self.is_connected()
    }

    /// Proper: no multiedges, no self-loops, no 2-labels.
    pub fn is_proper(&self) -> bool {
        self.edges.iter().all(|e| e.label == EdgeLabel::Plain && e.multiplicity == 1 && e.u != e.v)
    }

    pub fn has_self_loop(&self) -> bool {
        self.edges.iter().any(|e| e.u == e.v)
    }

    pub fn has_two_label(&self) -> bool {
        self.edges.iter().any(|e| e.label == EdgeLabel::TwoLabeled)
    }

    /// Sum of edge multiplicities at `v` (each self-loop endpoint counted twice,
    /// 2-labeled edges counted twice per multiplicity).
    pub fn degree(&self, v: usize) -> u64 {
        let mut deg = 0u64;
        for e in &self.edges {
            let w = e.multiplicity as u64 * if e.label == EdgeLabel::TwoLabeled { 2 } else { 1 };
            if e.u == v {
                deg += w;
            }
            if e.v == v {
                deg += w;
            }
        }
        deg
    }

    /// A hanging double edge: a plain multiplicity-2 edge whose non-root endpoint
    /// carries no other edge. Returns (edge index, hanging vertex).
    pub fn find_hanging_double_edge(&self) -> Option<(usize, usize)> {
        for (idx, e) in self.edges.iter().enumerate() {
            if e.label != EdgeLabel::Plain || e.multiplicity != 2 || e.u == e.v {
                continue;
            }
            for hang in [e.u, e.v] {
                if Some(hang) == self.root {
                    continue;
                }
                let solo = self
                    .edges
                    .iter()
                    .enumerate()
                    .all(|(j, f)| j == idx || (f.u != hang && f.v != hang));
                if solo {
                    return Some((idx, hang));
                }
            }
        }
        None
    }

    /// Removes vertex `v` (which must have no incident edges after `drop_edges`
    /// are removed) and renumbers the remaining vertices.
    pub fn remove_vertex(&self, v: usize, drop_edges: &[usize]) -> Result<Diagram> {
        let remap = |x: usize| if x > v { x - 1 } else { x };
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(j, _)| !drop_edges.contains(j))
            .map(|(_, e)| {
                debug_assert!(e.u != v && e.v != v);
                (remap(e.u), remap(e.v), e.multiplicity, e.label)
            })
            .collect();
        let root = self.root.map(|r| {
            debug_assert_ne!(r, v);
            remap(r)
        });
        Diagram::new(self.vertex_count - 1, root, edges)
    }

    /// Contracts vertices according to `block_of` (vertex -> block id in 0..blocks).
    /// The root's block becomes the new root.
    pub fn contract(&self, block_of: &[usize], blocks: usize) -> Result<Diagram> {
        debug_assert_eq!(block_of.len(), self.vertex_count);
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| (block_of[e.u], block_of[e.v], e.multiplicity, e.label))
            .collect();
        Diagram::new(blocks, self.root.map(|r| block_of[r]), edges)
    }

    /// Same structure without the root marker.
    pub fn unrooted(&self) -> Result<Diagram> {
        Diagram::new(self.vertex_count, None, self.edges.iter().map(|e| (e.u, e.v, e.multiplicity, e.label)))
    }

    /// Applies a vertex permutation (new index = perm[old index]); test helper for
    /// canonicalization invariance.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Diagram> {
        Diagram::new(
            self.vertex_count,
            self.root.map(|r| perm[r]),
            self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.multiplicity, e.label)),
        )
    }

    /// Stable byte encoding of the *current* numbering (not canonical).
    pub fn raw_encoding(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 + 5 * self.edges.len());
        out.push(if self.root.is_some() { b'V' } else { b'S' });
        out.push(self.vertex_count as u8);
        out.push(self.root.map(|r| r as u8).unwrap_or(0xff));
        let mut es: Vec<&Edge> = self.edges.iter().collect();
        es.sort();
        for e in es {
            out.push(e.u as u8);
            out.push(e.v as u8);
            out.push(e.label.as_u8());
            out.extend_from_slice(&(e.multiplicity as u16).to_be_bytes());
        }
        out
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.root {
            Some(r) => write!(f, "V{}(root={r};", self.vertex_count)?,
            None => write!(f, "S{}(", self.vertex_count)?,
        }
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " {}-{}", e.u, e.v)?;
            if e.multiplicity > 1 {
                write!(f, "x{}", e.multiplicity)?;
            }
            if e.label == EdgeLabel::TwoLabeled {
                write!(f, "[2]")?;
            }
        }
        write!(f, ")")
    }
}

// JSON schema: {"vertices": int, "root": int|null, "edges": [[u, v, multiplicity, label], ...]}
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramJson {
    vertices: usize,
    root: Option<usize>,
    edges: Vec<(usize, usize, u32, u8)>,
}

impl Serialize for Diagram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DiagramJson {
            vertices: self.vertex_count,
            root: self.root,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.multiplicity, e.label.as_u8())).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Diagram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DiagramJson::deserialize(deserializer)?;
        let edges: Vec<_> = raw
            .edges
            .into_iter()
            .map(|(u, v, m, l)| Ok((u, v, m, EdgeLabel::from_u8(l).map_err(D::Error::custom)?)))
            .collect::<std::result::Result<_, D::Error>>()?;
        Diagram::new(raw.vertices, raw.root, edges).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_rejected() {
        // isolated non-root vertex
        assert!(Diagram::new(2, Some(0), []).is_err());
        // isolated vertex in a scalar diagram
        assert!(Diagram::new(1, None, []).is_err());
        // zero multiplicity
        assert!(Diagram::new(2, Some(0), [(0, 1, 0, EdgeLabel::Plain)]).is_err());
        // out of range
        assert!(Diagram::new(2, Some(0), [(0, 2, 1, EdgeLabel::Plain)]).is_err());
        assert!(Diagram::new(2, Some(2), [(0, 1, 1, EdgeLabel::Plain)]).is_err());
    }

    #[test]
    fn edges_merge_and_normalize() {
        let d = Diagram::new(2, Some(0), [(1, 0, 1, EdgeLabel::Plain), (0, 1, 1, EdgeLabel::Plain)]).unwrap();
        assert_eq!(d.edges().len(), 1);
        assert_eq!(d.edges()[0].multiplicity, 2);
        assert_eq!(d.weighted_edge_count(), 2);
        let l = Diagram::new(2, Some(0), [(0, 1, 1, EdgeLabel::TwoLabeled)]).unwrap();
        assert_eq!(l.weighted_edge_count(), 2);
    }

    #[test]
    fn isolated_set_definition() {
        // rooted double edge: the far endpoint is insulated by multiplicity 2
        let dbl = Diagram::new(2, Some(0), [(0, 1, 2, EdgeLabel::Plain)]).unwrap();
        assert_eq!(dbl.isolated_set().into_iter().collect::<Vec<_>>(), vec![1]);
        // rooted 4-path, all multiplicity 1: empty
        let path = Diagram::rooted_path(4);
        assert!(path.isolated_set().is_empty());
        // a 2-labeled single edge counts like a plain edge
        let lab = Diagram::new(2, Some(0), [(0, 1, 1, EdgeLabel::TwoLabeled)]).unwrap();
        assert!(lab.isolated_set().is_empty());
        // self-loops keep a vertex isolated
        let with_loop =
            Diagram::new(2, Some(0), [(0, 1, 2, EdgeLabel::Plain), (1, 1, 1, EdgeLabel::Plain)]).unwrap();
        assert_eq!(with_loop.isolated_set().len(), 1);
    }

    #[test]
    fn hanging_double_edge_detection() {
        let dbl = Diagram::new(2, Some(0), [(0, 1, 2, EdgeLabel::Plain)]).unwrap();
        assert_eq!(dbl.find_hanging_double_edge(), Some((0, 1)));
        // triple edge: endpoint has degree 3, not hanging
        let triple = Diagram::new(2, Some(0), [(0, 1, 3, EdgeLabel::Plain)]).unwrap();
        assert_eq!(triple.find_hanging_double_edge(), None);
        // edge then double edge: vertex 2 hangs
        let chain = Diagram::new(
            3,
            Some(0),
            [(0, 1, 1, EdgeLabel::Plain), (1, 2, 2, EdgeLabel::Plain)],
        )
        .unwrap();
        assert_eq!(chain.find_hanging_double_edge(), Some((1, 2)));
    }

    #[test]
    fn json_round_trip() {
        let d = Diagram::new(
            3,
            Some(0),
            [(0, 1, 1, EdgeLabel::Plain), (1, 2, 2, EdgeLabel::TwoLabeled)],
        )
        .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: Diagram = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        // unknown keys rejected
        assert!(serde_json::from_str::<Diagram>(
            r#"{"vertices":1,"root":0,"edges":[],"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn components_and_floating() {
        let d = Diagram::new(
            4,
            Some(0),
            [(0, 1, 1, EdgeLabel::Plain), (2, 3, 1, EdgeLabel::Plain)],
        )
        .unwrap();
        assert_eq!(d.components().len(), 2);
        assert_eq!(d.floating_component_count(), 1);
        assert!(!d.is_connected());
    }
}
