//! Linear combinations of canonical diagrams with coefficients in the exponent
//! ring. Vector and scalar diagrams never mix in one expression.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::{canonicalize, CanonicalDiagram};
use crate::coeff::{Coefficient, Rat};
use crate::diagram::Diagram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExprKind {
    Vector,
    Scalar,
}

impl ExprKind {
    fn name(self) -> &'static str {
        match self {
            ExprKind::Vector => "vector",
            ExprKind::Scalar => "scalar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramExpression {
    kind: ExprKind,
    terms: BTreeMap<CanonicalDiagram, Coefficient>,
}

impl DiagramExpression {
    pub fn zero(kind: ExprKind) -> Self {
        Self { kind, terms: BTreeMap::new() }
    }

    /// The all-ones vector: 1 * Z_singleton.
    pub fn singleton() -> Self {
        let mut e = Self::zero(ExprKind::Vector);
        e.add_canonical(canonicalize(&Diagram::singleton()).unwrap(), Coefficient::one());
        e
    }

    /// The scalar constant 1: the empty scalar diagram.
    pub fn scalar_one() -> Self {
        let mut e = Self::zero(ExprKind::Scalar);
        e.add_canonical(canonicalize(&Diagram::empty_scalar()).unwrap(), Coefficient::one());
        e
    }

    pub fn from_diagram(d: &Diagram) -> Result<Self> {
        let cd = canonicalize(d)?;
        let kind = if cd.is_scalar() { ExprKind::Scalar } else { ExprKind::Vector };
        let mut e = Self::zero(kind);
        e.add_canonical(cd, Coefficient::one());
        Ok(e)
    }

    pub fn kind(&self) -> ExprKind {
        self.kind
    }

    pub fn expect_kind(&self, kind: ExprKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch { expected: kind.name(), found: self.kind.name() });
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalDiagram, &Coefficient)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, cd: &CanonicalDiagram) -> Coefficient {
        self.terms.get(cd).cloned().unwrap_or_else(Coefficient::zero)
    }

    pub fn add_canonical(&mut self, cd: CanonicalDiagram, c: Coefficient) {
        debug_assert_eq!(cd.is_scalar(), self.kind == ExprKind::Scalar);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(cd).or_insert_with(Coefficient::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            let key = self.terms.iter().find(|(_, v)| v.is_zero()).map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add_diagram(&mut self, d: &Diagram, c: Coefficient) -> Result<()> {
        let cd = canonicalize(d)?;
        let is_scalar = cd.is_scalar();
        if is_scalar != (self.kind == ExprKind::Scalar) {
            return Err(Error::KindMismatch {
                expected: self.kind.name(),
                found: if is_scalar { "scalar" } else { "vector" },
            });
        }
        self.add_canonical(cd, c);
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        other.expect_kind(self.kind)?;
        let mut out = self.clone();
        for (cd, c) in other.iter() {
            out.add_canonical(cd.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale_coeff(&Coefficient::from_rat(Rat::from_integer((-1).into()))))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self {
            kind: self.kind,
            terms: self
                .terms
                .iter()
                .filter_map(|(cd, v)| {
                    let s = v.scale(c);
                    (!s.is_zero()).then(|| (cd.clone(), s))
                })
                .collect(),
        }
    }

    pub fn scale_coeff(&self, c: &Coefficient) -> Self {
        Self {
            kind: self.kind,
            terms: self
                .terms
                .iter()
                .filter_map(|(cd, v)| {
                    let s = v.mul(c);
                    (!s.is_zero()).then(|| (cd.clone(), s))
                })
                .collect(),
        }
    }

    /// Removes all terms whose diagram has a self-loop; the evaluation semantics
    /// of a zero-diagonal ensemble.
    pub fn drop_self_loops(&self) -> Self {
        Self {
            kind: self.kind,
            terms: self
                .terms
                .iter()
                .filter(|(cd, _)| !cd.diagram().has_self_loop())
                .map(|(cd, c)| (cd.clone(), c.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for DiagramExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (cd, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·Z[{}]", cd.diagram())?;
        }
        Ok(())
    }
}

// Serialization: {"kind": "...", "terms": [{"diagram": {...}, "coefficient": [[2k, num, den], ...]}]}
// Numerator/denominator are i64; the symbolic layers use arbitrary precision
// internally, but serialized artifacts stay within i64 by construction.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    diagram: Diagram,
    coefficient: Vec<(i64, i64, i64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExprJson {
    kind: ExprKind,
    terms: Vec<TermJson>,
}

impl Serialize for DiagramExpression {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use num_traits::ToPrimitive;
        use serde::ser::Error as _;
        let mut terms = Vec::new();
        for (cd, c) in self.iter() {
            let mut coefficient = Vec::new();
            for (k, r) in c.terms() {
                let num = r.numer().to_i64().ok_or_else(|| S::Error::custom("numerator exceeds i64"))?;
                let den = r.denom().to_i64().ok_or_else(|| S::Error::custom("denominator exceeds i64"))?;
                coefficient.push((k, num, den));
            }
            terms.push(TermJson { diagram: cd.diagram().clone(), coefficient });
        }
        ExprJson { kind: self.kind, terms }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiagramExpression {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ExprJson::deserialize(d)?;
        let mut out = DiagramExpression::zero(raw.kind);
        for t in raw.terms {
            let mut c = Coefficient::zero();
            for (k, num, den) in t.coefficient {
                if den == 0 {
                    return Err(D::Error::custom("zero denominator"));
                }
                c.add_term(k, crate::coeff::rat(num, den));
            }
            out.add_diagram(&t.diagram, c).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;
    use crate::diagram::EdgeLabel::Plain;

    #[test]
    fn kinds_do_not_mix() {
        let mut v = DiagramExpression::singleton();
        let scalar_edge = Diagram::new(2, None, [(0, 1, 1, Plain)]).unwrap();
        assert!(v.add_diagram(&scalar_edge, Coefficient::one()).is_err());
        let s = DiagramExpression::scalar_one();
        assert!(v.add(&s).is_err());
    }

    #[test]
    fn canonical_keys_merge() {
        let mut e = DiagramExpression::zero(ExprKind::Vector);
        let a = Diagram::new(3, Some(0), [(0, 1, 1, Plain), (1, 2, 1, Plain)]).unwrap();
        let b = Diagram::new(3, Some(2), [(2, 1, 1, Plain), (1, 0, 1, Plain)]).unwrap();
        e.add_diagram(&a, Coefficient::from_rat(rat(1, 2))).unwrap();
        e.add_diagram(&b, Coefficient::from_rat(rat(1, 2))).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.iter().next().unwrap().1.as_rat().unwrap(), rat(1, 1));
        // cancellation prunes
        e.add_diagram(&a, Coefficient::from_rat(rat(-1, 1))).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn json_round_trip() {
        let mut e = DiagramExpression::singleton();
        let edge = Diagram::rooted_path(1);
        e.add_diagram(&edge, Coefficient::monomial(1, rat(-3, 7))).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: DiagramExpression = serde_json::from_str(&s).unwrap();
        assert_eq!(e, back);
    }
}
