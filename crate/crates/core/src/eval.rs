//! Numeric evaluation of diagram expressions on a concrete symmetric matrix.
//!
//! Naive mode sums over injective embeddings directly (cost n^|V|, reserved for
//! tiny n). Moebius mode expands the injective character over the partition
//! lattice, Z = sum over partitions of mu(P) * Ztilde(quotient), and evaluates
//! each repeated-label character by vertex-elimination tensor contraction.
//! Eliminations that keep one free index cost O(n^2); eliminations bridging two
//! free indices materialize a matrix product (O(n^3), cached per session by a
//! structural symbol); wider contractions fall back to a brute-force
//! homomorphism sum at small n and are an error at large n.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Mutex;

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::diagram::{Diagram, EdgeLabel};
use crate::error::{Error, Result};
use crate::expr::{DiagramExpression, ExprKind};
use crate::matrix::SymMatrix;
use crate::Limits;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Naive for n <= 8, moebius otherwise.
    Auto,
    Naive,
    Moebius,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Vector(Vec<f64>),
    Scalar(f64),
}

impl Value {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Value::Vector(v) => Some(v),
            Value::Scalar(_) => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(s) => Some(*s),
            Value::Vector(_) => None,
        }
    }
}

/// Evaluates one expression; convenience wrapper over [`EvalSession`].
pub fn evaluate(expr: &DiagramExpression, a: &SymMatrix, mode: EvalMode, limits: &Limits) -> Result<Value> {
    EvalSession::new(a, mode, limits.clone()).eval_expression(expr)
}

// ---- moebius symbolic preprocessing (matrix-independent, cached globally) ----

struct QuotientClasses {
    terms: Vec<(Diagram, i128)>,
}

fn quotient_classes(cd: &CanonicalDiagram) -> Rc<QuotientClasses> {
    thread_local! {
        static CACHE: std::cell::RefCell<HashMap<Vec<u8>, Rc<QuotientClasses>>> =
            std::cell::RefCell::new(HashMap::new());
    }
    // also a process-wide copy of the symbolic sums, so worker threads share work
    static GLOBAL: Mutex<Option<HashMap<Vec<u8>, Vec<(Diagram, i128)>>>> = Mutex::new(None);

    let key = cd.key().to_vec();
    if let Some(hit) = CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return hit;
    }
    if let Some(found) = GLOBAL
        .lock()
        .unwrap()
        .get_or_insert_with(HashMap::new)
        .get(&key)
        .map(|v| Rc::new(QuotientClasses { terms: v.clone() }))
    {
        CACHE.with(|c| c.borrow_mut().insert(key, found.clone()));
        return found;
    }

    let d = cd.diagram();
    let mut sums: HashMap<Vec<u8>, (Diagram, i128)> = HashMap::new();
    let factor_of: Vec<usize> = (0..d.vertex_count()).collect();
    crate::algebra::visit_partitions(&factor_of, &mut |block_of, blocks| {
        let mut mu: i128 = 1;
        for b in 0..blocks {
            let size = block_of.iter().filter(|&&x| x == b).count() as i128;
            let mut f: i128 = 1;
            for j in 1..size {
                f *= j;
            }
            mu *= if size % 2 == 0 { -f } else { f };
        }
        let q = d.contract(block_of, blocks).expect("contraction is valid");
        let c = canonicalize(&q).expect("canonicalization");
        let entry = sums.entry(c.key().to_vec()).or_insert_with(|| (c.diagram().clone(), 0));
        entry.1 += mu;
    });
    let terms: Vec<(Diagram, i128)> = sums.into_values().filter(|(_, m)| *m != 0).collect();
    GLOBAL.lock().unwrap().as_mut().unwrap().insert(key.clone(), terms.clone());
    let out = Rc::new(QuotientClasses { terms });
    CACHE.with(|c| c.borrow_mut().insert(key, out.clone()));
    out
}

/// The distinct canonical quotients of a diagram with their Moebius-summed
/// integer weights.
pub fn moebius_classes(cd: &CanonicalDiagram) -> Vec<(Diagram, i128)> {
    quotient_classes(cd).terms.clone()
}

/// True when every Moebius quotient's simple graph (self-loops ignored) is a
/// forest, i.e. full-vector evaluation runs in O(|V| n^2).
pub fn all_quotients_forestlike(cd: &CanonicalDiagram) -> bool {
    quotient_classes(cd).terms.iter().all(|(q, _)| {
        let mut parent: Vec<usize> = (0..q.vertex_count()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in q.edges() {
            if e.u == e.v {
                continue;
            }
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    })
}

// ---- factor graph engine ----------------------------------------------------

type Sym = Vec<u8>;

#[derive(Clone)]
enum FKind {
    Const(f64),
    /// Entrywise transform of A over two vertices: A^pm * (A^2 - 1/n)^tm.
    Ent { pm: u32, tm: u32 },
    VecF(Rc<Vec<f64>>),
    /// Row-major table, rows indexed by vars[0].
    MatF(Rc<Vec<f64>>),
}

#[derive(Clone)]
struct Factor {
    vars: Vec<usize>,
    kind: FKind,
    sym: Sym,
}

pub struct EvalSession<'a> {
    a: &'a SymMatrix,
    mode: EvalMode,
    limits: Limits,
    /// materialized vectors/matrices keyed by structural symbol
    tables: HashMap<Sym, Rc<Vec<f64>>>,
    table_bytes: usize,
    class_vals: HashMap<Vec<u8>, Rc<Value>>,
    inj_vals: HashMap<Vec<u8>, Rc<Value>>,
}

impl<'a> EvalSession<'a> {
    pub fn new(a: &'a SymMatrix, mode: EvalMode, limits: Limits) -> Self {
        Self {
            a,
            mode,
            limits,
            tables: HashMap::new(),
            table_bytes: 0,
            class_vals: HashMap::new(),
            inj_vals: HashMap::new(),
        }
    }

    fn n(&self) -> usize {
        self.a.n()
    }

    fn naive_selected(&self) -> bool {
        matches!(self.mode, EvalMode::Naive) || (matches!(self.mode, EvalMode::Auto) && self.n() <= 8)
    }

    /// Evaluates a full expression to a vector or scalar.
    pub fn eval_expression(&mut self, expr: &DiagramExpression) -> Result<Value> {
        match expr.kind() {
            ExprKind::Vector => {
                let mut out = vec![0.0; self.n()];
                for (cd, c) in expr.iter() {
                    let w = c.eval_f64(self.n());
                    let v = self.eval_diagram(cd)?;
                    let Value::Vector(v) = &*v else {
                        return Err(Error::Internal("vector term evaluated to scalar".into()));
                    };
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += w * x;
                    }
                }
                Ok(Value::Vector(out))
            }
            ExprKind::Scalar => {
                let mut out = 0.0;
                for (cd, c) in expr.iter() {
                    let w = c.eval_f64(self.n());
                    let v = self.eval_diagram(cd)?;
                    let Value::Scalar(s) = &*v else {
                        return Err(Error::Internal("scalar term evaluated to vector".into()));
                    };
                    out += w * s;
                }
                Ok(Value::Scalar(out))
            }
        }
    }

    /// Evaluates one injective character Z_d.
    pub fn eval_diagram(&mut self, cd: &CanonicalDiagram) -> Result<Rc<Value>> {
        if let Some(hit) = self.inj_vals.get(cd.key()) {
            return Ok(hit.clone());
        }
        let n = self.n();
        let val = if cd.vertex_count() > n {
            // injective embeddings need |V| distinct labels
            if cd.is_scalar() {
                Value::Scalar(0.0)
            } else {
                Value::Vector(vec![0.0; n])
            }
        } else if self.naive_selected() {
            self.eval_naive(cd.diagram())?
        } else {
            self.eval_moebius(cd)?
        };
        let rc = Rc::new(val);
        self.inj_vals.insert(cd.key().to_vec(), rc.clone());
        Ok(rc)
    }

    /// Z_{d,i} at selected coordinates only. Pins the root, which turns every
    /// quotient contraction into chains of matrix-vector products.
    pub fn eval_diagram_coords(&mut self, cd: &CanonicalDiagram, coords: &[usize]) -> Result<Vec<f64>> {
        let d = cd.diagram();
        let root = d
            .root()
            .ok_or_else(|| Error::Internal("coordinate evaluation needs a rooted diagram".into()))?;
        if cd.vertex_count() > self.n() {
            return Ok(vec![0.0; coords.len()]);
        }
        if self.naive_selected() {
            let mut out = Vec::with_capacity(coords.len());
            for &i in coords {
                out.push(naive_vector_coord(d, self.a, i));
            }
            return Ok(out);
        }
        let classes = quotient_classes(cd);
        let mut out = vec![0.0; coords.len()];
        for (q, mu) in &classes.terms {
            for (slot, &i) in coords.iter().enumerate() {
                let v = self.hom_pinned(q, root_of(q), i)?;
                out[slot] += *mu as f64 * v;
            }
        }
        let _ = root;
        Ok(out)
    }

    pub fn eval_expression_coords(&mut self, expr: &DiagramExpression, coords: &[usize]) -> Result<Vec<f64>> {
        expr.expect_kind(ExprKind::Vector)?;
        let mut out = vec![0.0; coords.len()];
        for (cd, c) in expr.iter() {
            let w = c.eval_f64(self.n());
            let vals = self.eval_diagram_coords(cd, coords)?;
            for (o, v) in out.iter_mut().zip(vals) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    // ---- naive injective -----------------------------------------------------

    fn eval_naive(&self, d: &Diagram) -> Result<Value> {
        let n = self.n();
        let cost = (n as u64).checked_pow(d.vertex_count() as u32).unwrap_or(u64::MAX);
        if cost > self.limits.naive_cost {
            return Err(Error::BudgetExceeded {
                what: format!("naive evaluation of {d}"),
                needed: cost.min(usize::MAX as u64) as usize,
                limit: self.limits.naive_cost as usize,
            });
        }
        match d.root() {
            Some(root) => {
                let out: Vec<f64> = (0..n).map(|i| naive_vector_coord_at(d, self.a, root, i)).collect();
                Ok(Value::Vector(out))
            }
            None => {
                let mut assignment = vec![usize::MAX; d.vertex_count()];
                let s = naive_rec(d, self.a, &mut assignment, 0);
                Ok(Value::Scalar(s))
            }
        }
    }

    // ---- moebius --------------------------------------------------------------

    fn eval_moebius(&mut self, cd: &CanonicalDiagram) -> Result<Value> {
        let classes = quotient_classes(cd);
        if cd.is_scalar() {
            let mut out = 0.0;
            for (q, mu) in &classes.terms {
                out += *mu as f64 * self.hom_scalar_cached(q)?;
            }
            Ok(Value::Scalar(out))
        } else {
            let n = self.n();
            let mut out = vec![0.0; n];
            for (q, mu) in &classes.terms {
                let v = self.hom_vector_cached(q)?;
                let Value::Vector(v) = &*v else {
                    return Err(Error::Internal("rooted quotient gave scalar".into()));
                };
                let m = *mu as f64;
                for (o, x) in out.iter_mut().zip(v) {
                    *o += m * x;
                }
            }
            Ok(Value::Vector(out))
        }
    }

    fn hom_vector_cached(&mut self, q: &Diagram) -> Result<Rc<Value>> {
        let key = q.raw_encoding();
        if let Some(hit) = self.class_vals.get(&key) {
            return Ok(hit.clone());
        }
        let val = self.hom_eval(q)?;
        let rc = Rc::new(val);
        self.class_vals.insert(key, rc.clone());
        Ok(rc)
    }

    fn hom_scalar_cached(&mut self, q: &Diagram) -> Result<f64> {
        let v = self.hom_vector_cached(q)?;
        v.as_scalar().ok_or_else(|| Error::Internal("scalar quotient gave vector".into()))
    }

    /// Repeated-label character of `q` by vertex elimination.
    fn hom_eval(&mut self, q: &Diagram) -> Result<Value> {
        let mut fg = self.build_factors(q, None)?;
        self.eliminate_all(&mut fg, q.root())?;
        self.finish(fg, q.root().is_some())
    }

    /// Hom value with the root pinned to concrete index `i` (scalar result).
    fn hom_pinned(&mut self, q: &Diagram, root: Option<usize>, i: usize) -> Result<f64> {
        let Some(r) = root else {
            return self.hom_scalar_cached(q);
        };
        let mut fg = self.build_factors(q, Some((r, i)))?;
        self.eliminate_all(&mut fg, Some(r))?;
        // root contributes no summation; collect constants and vec values at i
        let mut out = 1.0;
        for f in fg.factors {
            match f.kind {
                FKind::Const(c) => out *= c,
                FKind::VecF(v) => out *= v[i],
                _ => return Err(Error::Internal("unexpected factor after pinned elimination".into())),
            }
        }
        Ok(out)
    }

    fn build_factors(&mut self, q: &Diagram, pin: Option<(usize, usize)>) -> Result<FGraph> {
        let n = self.n();
        let mut factors: Vec<Factor> = Vec::new();
        for e in q.edges() {
            let (pm, tm) = match e.label {
                EdgeLabel::Plain => (e.multiplicity, 0),
                EdgeLabel::TwoLabeled => (0, e.multiplicity),
            };
            if e.u == e.v {
                // self-loop: unary factor on the diagonal
                let sym = vec![b'D', pm as u8, tm as u8, b'@', e.u as u8];
                let mut t = Vec::with_capacity(n);
                let inv_n = 1.0 / n as f64;
                for x in 0..n {
                    t.push(ent_value(self.a.get(x, x), pm, tm, inv_n));
                }
                factors.push(Factor { vars: vec![e.u], kind: FKind::VecF(Rc::new(t)), sym });
            } else {
                match pin {
                    Some((r, i)) if e.u == r || e.v == r => {
                        let other = if e.u == r { e.v } else { e.u };
                        let inv_n = 1.0 / n as f64;
                        let mut t = Vec::with_capacity(n);
                        for y in 0..n {
                            t.push(ent_value(self.a.get(i, y), pm, tm, inv_n));
                        }
                        // pinned rows are cheap; no cross-coordinate caching
                        let sym = vec![b'#'];
                        factors.push(Factor { vars: vec![other], kind: FKind::VecF(Rc::new(t)), sym });
                    }
                    _ => {
                        let sym = vec![b'E', pm as u8, tm as u8];
                        factors.push(Factor { vars: vec![e.u, e.v], kind: FKind::Ent { pm, tm }, sym });
                    }
                }
            }
        }
        // merge factors that became parallel (e.g. plain + 2-labeled same pair)
        let mut fg = FGraph { vcount: q.vertex_count(), factors };
        self.merge_parallel(&mut fg)?;
        Ok(fg)
    }

    fn eliminate_all(&mut self, fg: &mut FGraph, root: Option<usize>) -> Result<()> {
        let mut alive: Vec<bool> = (0..fg.vcount).map(|v| Some(v) != root).collect();
        loop {
            self.merge_parallel(fg)?;
            // pick the alive vertex with the fewest distinct co-variables
            let mut pick: Option<(usize, usize)> = None;
            for v in 0..fg.vcount {
                if !alive[v] {
                    continue;
                }
                let mut nbrs: Vec<usize> = Vec::new();
                for f in &fg.factors {
                    if f.vars.contains(&v) {
                        for &w in &f.vars {
                            if w != v && !nbrs.contains(&w) {
                                nbrs.push(w);
                            }
                        }
                    }
                }
                let deg = nbrs.len();
                if pick.map_or(true, |(_, best)| deg < best) {
                    pick = Some((v, deg));
                }
            }
            let Some((v, _)) = pick else { return Ok(()) };
            self.eliminate_vertex(fg, v)?;
            alive[v] = false;
        }
    }

    fn merge_parallel(&mut self, fg: &mut FGraph) -> Result<()> {
        let n = self.n();
        // group binary factors by unordered pair, unary by vertex
        loop {
            let mut change: Option<(usize, usize)> = None;
            'outer: for i in 0..fg.factors.len() {
                for j in (i + 1)..fg.factors.len() {
                    let a = &fg.factors[i];
                    let b = &fg.factors[j];
                    let same = match (a.vars.len(), b.vars.len()) {
                        (1, 1) => a.vars == b.vars,
                        (2, 2) => {
                            (a.vars[0] == b.vars[0] && a.vars[1] == b.vars[1])
                                || (a.vars[0] == b.vars[1] && a.vars[1] == b.vars[0])
                        }
                        (0, 0) => true,
                        _ => false,
                    };
                    if same {
                        change = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((i, j)) = change else { return Ok(()) };
            let b = fg.factors.remove(j);
            let a = fg.factors.remove(i);
            let merged = match (a.vars.len(), &a.kind, &b.kind) {
                (0, FKind::Const(x), FKind::Const(y)) => Factor {
                    vars: vec![],
                    kind: FKind::Const(x * y),
                    sym: vec![],
                },
                (1, _, _) => {
                    let va = self.as_vec(&a)?;
                    let vb = self.as_vec(&b)?;
                    let mut t = Vec::with_capacity(n);
                    for x in 0..n {
                        t.push(va[x] * vb[x]);
                    }
                    let mut sym = vec![b'v', b'*'];
                    let (s1, s2) = order_syms(&a.sym, &b.sym);
                    sym.extend_from_slice(s1);
                    sym.push(b',');
                    sym.extend_from_slice(s2);
                    Factor { vars: a.vars.clone(), kind: FKind::VecF(Rc::new(t)), sym }
                }
                (2, _, _) => {
                    // orient b to a's var order, multiply entrywise
                    let ta = self.as_mat(&a, a.vars[0])?;
                    let tb = self.as_mat(&b, a.vars[0])?;
                    debug_assert_eq!(mat_cols(&b, a.vars[0]), a.vars[1]);
                    let mut sym = vec![b'h', b'*'];
                    let (s1, s2) = order_syms(&a.sym, &b.sym);
                    sym.extend_from_slice(s1);
                    sym.push(b',');
                    sym.extend_from_slice(s2);
                    let t = if let Some(hit) = self.tables.get(&sym) {
                        hit.clone()
                    } else {
                        let mut t = Vec::with_capacity(n * n);
                        for k in 0..n * n {
                            t.push(ta[k] * tb[k]);
                        }
                        self.store_table(sym.clone(), Rc::new(t))
                    };
                    Factor { vars: a.vars.clone(), kind: FKind::MatF(t), sym }
                }
                _ => unreachable!(),
            };
            fg.factors.push(merged);
        }
    }

    fn eliminate_vertex(&mut self, fg: &mut FGraph, v: usize) -> Result<()> {
        let n = self.n();
        let mine: Vec<Factor> = {
            let (mine, rest): (Vec<_>, Vec<_>) = fg.factors.drain(..).partition(|f| f.vars.contains(&v));
            fg.factors = rest;
            mine
        };
        let mut unary: Option<Factor> = None;
        let mut binary: Vec<Factor> = Vec::new();
        for f in mine {
            if f.vars.len() == 1 {
                debug_assert!(unary.is_none(), "parallel unaries already merged");
                unary = Some(f);
            } else {
                binary.push(f);
            }
        }
        let uvec: Option<Rc<Vec<f64>>> = match &unary {
            Some(f) => Some(self.as_vec(f)?),
            None => None,
        };
        let usym: Sym = unary.as_ref().map(|f| f.sym.clone()).unwrap_or_else(|| vec![b'1']);

        match binary.len() {
            0 => {
                let c = match uvec {
                    Some(u) => u.iter().sum::<f64>(),
                    None => n as f64,
                };
                fg.factors.push(Factor { vars: vec![], kind: FKind::Const(c), sym: vec![] });
            }
            1 => {
                let f = &binary[0];
                let w = other_var(f, v);
                let mut sym = vec![b'a', b'('];
                sym.extend_from_slice(&f.sym);
                sym.push(b'|');
                sym.extend_from_slice(&usym);
                sym.push(b')');
                let cached = if sym.contains(&b'#') { None } else { self.tables.get(&sym).cloned() };
                let t = if let Some(hit) = cached {
                    hit
                } else {
                    let out = self.apply_to_vec(f, v, uvec.as_ref().map(|u| u.as_slice()))?;
                    let rc = Rc::new(out);
                    if !sym.contains(&b'#') {
                        self.store_table(sym.clone(), rc.clone())
                    } else {
                        rc
                    }
                };
                fg.factors.push(Factor { vars: vec![w], kind: FKind::VecF(t), sym });
            }
            2 => {
                let w1 = other_var(&binary[0], v);
                let w2 = other_var(&binary[1], v);
                debug_assert_ne!(w1, w2, "parallel binaries already merged");
                // table over (w1, w2): sum_y M1[w1=x, y] u[y] M2[y, w2=z]
                let m1 = self.as_mat(&binary[0], w1)?;
                let m2 = self.as_mat(&binary[1], v)?;
                let cost = (n as u64).pow(3);
                if cost > self.limits.contraction_cost {
                    return Err(Error::ContractionWidth { width: 2, n });
                }
                let mut sym = vec![b'p', b'('];
                sym.extend_from_slice(&oriented_sym(&binary[0], w1));
                sym.push(b'|');
                sym.extend_from_slice(&usym);
                sym.push(b'|');
                sym.extend_from_slice(&oriented_sym(&binary[1], v));
                sym.push(b')');
                let t = if let Some(hit) = self.tables.get(&sym) {
                    hit.clone()
                } else {
                    let out = matmul_diag(&m1, uvec.as_ref().map(|u| u.as_slice()), &m2, n);
                    self.store_table(sym.clone(), Rc::new(out))
                };
                fg.factors.push(Factor { vars: vec![w1, w2], kind: FKind::MatF(t), sym });
            }
            _ => {
                return Err(Error::ContractionWidth { width: binary.len(), n });
            }
        }
        Ok(())
    }

    fn finish(&mut self, fg: FGraph, rooted: bool) -> Result<Value> {
        let n = self.n();
        if rooted {
            let mut out = vec![1.0; n];
            for f in fg.factors {
                match f.kind {
                    FKind::Const(c) => {
                        for o in &mut out {
                            *o *= c;
                        }
                    }
                    FKind::VecF(v) => {
                        for (o, x) in out.iter_mut().zip(v.iter()) {
                            *o *= x;
                        }
                    }
                    _ => return Err(Error::Internal("non-unary factor left at root".into())),
                }
            }
            Ok(Value::Vector(out))
        } else {
            let mut out = 1.0;
            for f in fg.factors {
                match f.kind {
                    FKind::Const(c) => out *= c,
                    _ => return Err(Error::Internal("non-constant factor left in scalar diagram".into())),
                }
            }
            Ok(Value::Scalar(out))
        }
    }

    // ---- factor materialization ------------------------------------------------

    fn as_vec(&self, f: &Factor) -> Result<Rc<Vec<f64>>> {
        match &f.kind {
            FKind::VecF(v) => Ok(v.clone()),
            _ => Err(Error::Internal("expected vector factor".into())),
        }
    }

    /// Materializes a binary factor as a row-major table with rows indexed by
    /// `rows` (one of its two variables).
    fn as_mat(&mut self, f: &Factor, rows: usize) -> Result<Rc<Vec<f64>>> {
        let n = self.n();
        match &f.kind {
            FKind::Ent { pm, tm } => {
                let sym = vec![b'E', *pm as u8, *tm as u8];
                if let Some(hit) = self.tables.get(&sym) {
                    return Ok(hit.clone());
                }
                let inv_n = 1.0 / n as f64;
                let mut t = Vec::with_capacity(n * n);
                for x in 0..n {
                    for y in 0..n {
                        t.push(ent_value(self.a.get(x, y), *pm, *tm, inv_n));
                    }
                }
                Ok(self.store_table(sym, Rc::new(t)))
            }
            FKind::MatF(t) => {
                if f.vars[0] == rows {
                    Ok(t.clone())
                } else {
                    let mut sym = vec![b't', b'('];
                    sym.extend_from_slice(&f.sym);
                    sym.push(b')');
                    if let Some(hit) = self.tables.get(&sym) {
                        return Ok(hit.clone());
                    }
                    let mut out = vec![0.0; n * n];
                    for x in 0..n {
                        for y in 0..n {
                            out[y * n + x] = t[x * n + y];
                        }
                    }
                    Ok(self.store_table(sym, Rc::new(out)))
                }
            }
            _ => Err(Error::Internal("expected binary factor".into())),
        }
    }

    /// out[x] = sum_y F(x, y) u(y), specialised per factor kind.
    fn apply_to_vec(&mut self, f: &Factor, summed: usize, u: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.n();
        match &f.kind {
            FKind::Ent { pm, tm } => {
                let inv_n = 1.0 / n as f64;
                let a = self.a;
                let mut out = Vec::with_capacity(n);
                match (pm, tm, u) {
                    (1, 0, Some(u)) => {
                        for x in 0..n {
                            let row = a.row(x);
                            out.push(row.iter().zip(u).map(|(v, w)| v * w).sum());
                        }
                    }
                    (1, 0, None) => {
                        for x in 0..n {
                            out.push(a.row(x).iter().sum());
                        }
                    }
                    (2, 0, Some(u)) => {
                        for x in 0..n {
                            let row = a.row(x);
                            out.push(row.iter().zip(u).map(|(v, w)| v * v * w).sum());
                        }
                    }
                    (2, 0, None) => {
                        for x in 0..n {
                            out.push(a.row(x).iter().map(|v| v * v).sum());
                        }
                    }
                    _ => {
                        for x in 0..n {
                            let row = a.row(x);
                            let mut s = 0.0;
                            for y in 0..n {
                                let e = ent_value(row[y], *pm, *tm, inv_n);
                                s += e * u.map_or(1.0, |u| u[y]);
                            }
                            out.push(s);
                        }
                    }
                }
                Ok(out)
            }
            FKind::MatF(t) => {
                // rows of the table correspond to vars[0]
                let keep = other_var(f, summed);
                let rows_are_keep = f.vars[0] == keep;
                let mut out = vec![0.0; n];
                if rows_are_keep {
                    for x in 0..n {
                        let row = &t[x * n..(x + 1) * n];
                        out[x] = match u {
                            Some(u) => row.iter().zip(u).map(|(v, w)| v * w).sum(),
                            None => row.iter().sum(),
                        };
                    }
                } else {
                    for y in 0..n {
                        let row = &t[y * n..(y + 1) * n];
                        let w = u.map_or(1.0, |u| u[y]);
                        if w != 0.0 {
                            for (o, v) in out.iter_mut().zip(row) {
                                *o += w * v;
                            }
                        }
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Internal("expected binary factor".into())),
        }
    }

    fn store_table(&mut self, sym: Sym, t: Rc<Vec<f64>>) -> Rc<Vec<f64>> {
        self.table_bytes += t.len() * 8;
        // keep the cache bounded; evaluation correctness does not depend on hits
        if self.table_bytes > 1_600_000_000 {
            self.tables.clear();
            self.table_bytes = t.len() * 8;
        }
        self.tables.insert(sym, t.clone());
        t
    }
}

struct FGraph {
    vcount: usize,
    factors: Vec<Factor>,
}

fn root_of(d: &Diagram) -> Option<usize> {
    d.root()
}

fn other_var(f: &Factor, v: usize) -> usize {
    if f.vars[0] == v {
        f.vars[1]
    } else {
        f.vars[0]
    }
}

fn mat_cols(f: &Factor, rows: usize) -> usize {
    other_var(f, rows)
}

fn oriented_sym(f: &Factor, rows: usize) -> Sym {
    let mut s = f.sym.clone();
    match &f.kind {
        FKind::Ent { .. } => s, // symmetric
        _ => {
            s.push(if f.vars[0] == rows { b'>' } else { b'<' });
            s
        }
    }
}

fn order_syms<'x>(a: &'x Sym, b: &'x Sym) -> (&'x Sym, &'x Sym) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[inline]
fn ent_value(a: f64, pm: u32, tm: u32, inv_n: f64) -> f64 {
    let mut v = 1.0;
    for _ in 0..pm {
        v *= a;
    }
    let l = a * a - inv_n;
    for _ in 0..tm {
        v *= l;
    }
    v
}

/// C[x, z] = sum_y M1[x, y] u[y] M2[y, z]; saxpy form over contiguous rows.
fn matmul_diag(m1: &[f64], u: Option<&[f64]>, m2: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for x in 0..n {
        let orow = &mut out[x * n..(x + 1) * n];
        let m1row = &m1[x * n..(x + 1) * n];
        for y in 0..n {
            let a = m1row[y] * u.map_or(1.0, |u| u[y]);
            if a == 0.0 {
                continue;
            }
            let m2row = &m2[y * n..(y + 1) * n];
            for (o, b) in orow.iter_mut().zip(m2row) {
                *o += a * b;
            }
        }
    }
    out
}

// naive injective evaluation helpers

fn naive_vector_coord(d: &Diagram, a: &SymMatrix, i: usize) -> f64 {
    naive_vector_coord_at(d, a, d.root().expect("rooted"), i)
}

fn naive_vector_coord_at(d: &Diagram, a: &SymMatrix, root: usize, i: usize) -> f64 {
    let mut assignment = vec![usize::MAX; d.vertex_count()];
    assignment[root] = i;
    naive_rec(d, a, &mut assignment, 0)
}

fn naive_rec(d: &Diagram, a: &SymMatrix, assignment: &mut [usize], v: usize) -> f64 {
    let n = a.n();
    if v == assignment.len() {
        let inv_n = 1.0 / n as f64;
        let mut p = 1.0;
        for e in d.edges() {
            let (pm, tm) = match e.label {
                EdgeLabel::Plain => (e.multiplicity, 0),
                EdgeLabel::TwoLabeled => (0, e.multiplicity),
            };
            p *= ent_value(a.get(assignment[e.u], assignment[e.v]), pm, tm, inv_n);
        }
        return p;
    }
    if assignment[v] != usize::MAX {
        return naive_rec(d, a, assignment, v + 1);
    }
    let mut s = 0.0;
    'next: for cand in 0..n {
        for w in 0..assignment.len() {
            if assignment[w] == cand {
                continue 'next;
            }
        }
        assignment[v] = cand;
        s += naive_rec(d, a, assignment, v + 1);
        assignment[v] = usize::MAX;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::EdgeLabel::{Plain, TwoLabeled};
    use crate::ensemble::MatrixEnsemble;

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn edge_on_tiny_matrix() {
        // n = 2, zero diagonal: Z_edge = (a, a)
        let a = SymMatrix::from_fn(2, |i, j| if i != j { 0.7 } else { 0.0 });
        let e = DiagramExpression::from_diagram(&Diagram::rooted_path(1)).unwrap();
        let v = evaluate(&e, &a, EvalMode::Naive, &limits()).unwrap();
        assert_eq!(v, Value::Vector(vec![0.7, 0.7]));
        // 2-path needs 3 distinct labels: zero at n = 2
        let p2 = DiagramExpression::from_diagram(&Diagram::rooted_path(2)).unwrap();
        let v = evaluate(&p2, &a, EvalMode::Auto, &limits()).unwrap();
        assert_eq!(v, Value::Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn naive_and_moebius_agree() {
        let ens = MatrixEnsemble::rademacher_zero_diag(20, 5);
        let a = ens.sample().unwrap();
        let battery = vec![
            Diagram::rooted_path(1),
            Diagram::rooted_path(2),
            Diagram::rooted_path(3),
            Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap(),
            Diagram::root_star(2),
            Diagram::rooted_cycle(3),
            Diagram::rooted_cycle(4),
            Diagram::new(2, Some(0), [(0, 1, 2, Plain)]).unwrap(),
            Diagram::new(2, Some(0), [(0, 1, 1, TwoLabeled)]).unwrap(),
            Diagram::new(3, Some(0), [(0, 1, 1, Plain), (1, 2, 2, Plain)]).unwrap(),
            Diagram::new(1, Some(0), [(0, 0, 1, Plain)]).unwrap(),
            Diagram::new(3, Some(0), [(1, 2, 1, Plain)]).unwrap(),
            Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap(),
            Diagram::new(3, None, [(0, 1, 1, Plain), (1, 2, 1, Plain)]).unwrap(),
        ];
        for d in battery {
            let e = DiagramExpression::from_diagram(&d).unwrap();
            let naive = evaluate(&e, &a, EvalMode::Naive, &limits()).unwrap();
            let moebius = evaluate(&e, &a, EvalMode::Moebius, &limits()).unwrap();
            match (&naive, &moebius) {
                (Value::Vector(x), Value::Vector(y)) => {
                    let d2 = crate::matrix::linf_dist(x, y);
                    assert!(d2 <= 1e-10, "diagram {d}: naive vs moebius gap {d2}");
                }
                (Value::Scalar(x), Value::Scalar(y)) => {
                    assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "diagram {d}: {x} vs {y}");
                }
                _ => panic!("kind mismatch for {d}"),
            }
        }
    }

    #[test]
    fn coordinate_evaluation_matches_full() {
        let ens = MatrixEnsemble::gaussian_zero_diag(30, 11);
        let a = ens.sample().unwrap();
        let coords = vec![0usize, 7, 29];
        for d in [
            Diagram::rooted_path(2),
            Diagram::rooted_path(3),
            Diagram::rooted_cycle(4),
            Diagram::new(4, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain), (1, 3, 1, Plain)]).unwrap(),
        ] {
            let cd = canonicalize(&d).unwrap();
            let mut s = EvalSession::new(&a, EvalMode::Moebius, limits());
            let full = s.eval_diagram(&cd).unwrap();
            let full = full.as_vector().unwrap().to_vec();
            let sub = s.eval_diagram_coords(&cd, &coords).unwrap();
            for (slot, &i) in coords.iter().enumerate() {
                assert!(
                    (full[i] - sub[slot]).abs() <= 1e-9 * (1.0 + full[i].abs()),
                    "coord {i} of {d}: {} vs {}",
                    full[i],
                    sub[slot]
                );
            }
        }
    }

    #[test]
    fn width_guard_fires_at_large_n() {
        // a K4 rooted quotient cannot be eliminated at width <= 2, so moebius
        // evaluation must fail cleanly once nested loops are unaffordable
        let k4 = Diagram::new(
            4,
            Some(0),
            [
                (0, 1, 1, Plain),
                (0, 2, 1, Plain),
                (0, 3, 1, Plain),
                (1, 2, 1, Plain),
                (1, 3, 1, Plain),
                (2, 3, 1, Plain),
            ],
        )
        .unwrap();
        let mut limits = limits();
        limits.contraction_cost = 10; // force the guard
        let a = SymMatrix::from_fn(40, |i, j| ((i * 13 + j * 7) % 5) as f64 / 10.0 * if i == j { 0.0 } else { 1.0 });
        let e = DiagramExpression::from_diagram(&k4).unwrap();
        let err = evaluate(&e, &a, EvalMode::Moebius, &limits).unwrap_err();
        assert!(matches!(err, Error::ContractionWidth { .. }), "got {err}");
    }
}
