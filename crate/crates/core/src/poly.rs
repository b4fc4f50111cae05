//! Multivariate polynomials over the iterate history (variable j stands for the
//! j-th iterate, chronologically).

use serde::{Deserialize, Serialize};

use crate::coeff::{rat, rat_int, rat_to_f64, Rat};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryPolynomial {
    /// (exponent tuple, coefficient); tuples are trimmed of trailing zeros and
    /// kept sorted for canonical comparison.
    terms: Vec<(Vec<u32>, Rat)>,
}

impl HistoryPolynomial {
    pub fn zero() -> Self {
        Self { terms: vec![] }
    }

    pub fn constant(c: Rat) -> Self {
        Self::from_terms(vec![(vec![], c)])
    }

    /// The single variable w_j.
    pub fn var(j: usize) -> Self {
        let mut e = vec![0u32; j + 1];
        e[j] = 1;
        Self::from_terms(vec![(e, rat_int(1))])
    }

    pub fn from_terms(terms: Vec<(Vec<u32>, Rat)>) -> Self {
        let mut out = Self::zero();
        for (e, c) in terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn add_term(&mut self, mut exps: Vec<u32>, c: Rat) {
        if c.is_zero() {
            return;
        }
        while exps.last() == Some(&0) {
            exps.pop();
        }
        match self.terms.binary_search_by(|(e, _)| e.cmp(&exps)) {
            Ok(i) => {
                self.terms[i].1 += c;
                if self.terms[i].1.is_zero() {
                    self.terms.remove(i);
                }
            }
            Err(i) => self.terms.insert(i, (exps, c)),
        }
    }

    pub fn terms(&self) -> &[(Vec<u32>, Rat)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of history slots referenced (max variable index + 1).
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|(e, _)| e.len()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self::from_terms(self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let len = ea.len().max(eb.len());
                let mut e = vec![0u32; len];
                for (i, v) in ea.iter().enumerate() {
                    e[i] += v;
                }
                for (i, v) in eb.iter().enumerate() {
                    e[i] += v;
                }
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Multiplies by the variable w_j.
    pub fn mul_var(&self, j: usize) -> Self {
        self.mul(&Self::var(j))
    }

    /// Partial derivative with respect to w_s.
    pub fn partial(&self, s: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let k = e.get(s).copied().unwrap_or(0);
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[s] -= 1;
            out.add_term(e2, c * rat_int(k as i64));
        }
        out
    }

    /// Evaluates on one coordinate's history values (index j = iterate j).
    pub fn eval_f64(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = rat_to_f64(c);
            for (j, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    m *= values[j];
                }
            }
            acc += m;
        }
        acc
    }
}

// JSON: [[[e0, ..., ek], num, den], ...]
#[derive(Serialize, Deserialize)]
struct PolyJson(Vec<(Vec<u32>, i64, i64)>);

impl Serialize for HistoryPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use num_traits::ToPrimitive;
        use serde::ser::Error as _;
        let mut out = Vec::new();
        for (e, c) in &self.terms {
            let num = c.numer().to_i64().ok_or_else(|| S::Error::custom("numerator exceeds i64"))?;
            let den = c.denom().to_i64().ok_or_else(|| S::Error::custom("denominator exceeds i64"))?;
            out.push((e.clone(), num, den));
        }
        PolyJson(out).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HistoryPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolyJson::deserialize(d)?;
        let mut out = HistoryPolynomial::zero();
        for (e, num, den) in raw.0 {
            if den == 0 {
                return Err(D::Error::custom("zero denominator"));
            }
            out.add_term(e, rat(num, den));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        // f(w0, w1) = w1^2 - 2 w0
        let f = HistoryPolynomial::var(1).mul(&HistoryPolynomial::var(1)).add(
            &HistoryPolynomial::var(0).scale(&rat(-2, 1)),
        );
        assert_eq!(f.arity(), 2);
        assert_eq!(f.degree(), 2);
        assert_eq!(f.eval_f64(&[3.0, 4.0]), 16.0 - 6.0);
        let df1 = f.partial(1);
        assert_eq!(df1.eval_f64(&[3.0, 4.0]), 8.0);
        let df0 = f.partial(0);
        assert_eq!(df0.eval_f64(&[3.0, 4.0]), -2.0);
        assert!(f.partial(5).is_zero());
    }

    #[test]
    fn json_round_trip() {
        let f = HistoryPolynomial::from_terms(vec![
            (vec![0, 2], rat(1, 1)),
            (vec![], rat(-1, 3)),
            (vec![1, 1], rat(5, 7)),
        ]);
        let s = serde_json::to_string(&f).unwrap();
        let back: HistoryPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }
}
