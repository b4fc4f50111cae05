//! The coefficient ring: finite rational combinations of half-integer powers of 1/n.
//!
//! A [`Coefficient`] stores a map from the doubled exponent `2k` (so half-integer
//! exponents stay integral) to a rational value `c`, and denotes `Σ c · n^{-k}`.
//! Exponents may be negative, which encodes positive powers of `n`; these arise in
//! exact finite-`n` identities such as the second-moment formula of disconnected
//! diagrams. Classification treats a negative leading exponent as a normalization
//! error upstream.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar used across every symbolic layer.
pub type Rat = BigRational;

/// Shorthand for small rational literals.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rat {
    BigRational::from(BigInt::from(v))
}

/// Element of ℚ[n^{1/2}, n^{-1/2}], keyed by `2k` where each term is `c · n^{-k}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Coefficient {
    terms: BTreeMap<i64, Rat>,
}

impl Coefficient {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::from_rat(Rat::one())
    }

    /// A plain rational, i.e. exponent 0.
    pub fn from_rat(c: Rat) -> Self {
        let mut s = Self::zero();
        s.add_term(0, c);
        s
    }

    /// The single term `c · n^{-k}` with `2k = twice_k`.
    pub fn monomial(twice_k: i64, c: Rat) -> Self {
        let mut s = Self::zero();
        s.add_term(twice_k, c);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Rat)> {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    pub fn add_term(&mut self, twice_k: i64, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(twice_k).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&twice_k);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.add_term(k, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.add_term(k, -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero();
        for (k, c) in self.terms() {
            out.add_term(k, -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ka, ca) in self.terms() {
            for (kb, cb) in other.terms() {
                out.add_term(ka + kb, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero();
        for (k, v) in self.terms() {
            out.add_term(k, v * c);
        }
        out
    }

    /// Multiply by `n^{-k}` with `2k = twice_k`.
    pub fn shift(&self, twice_k: i64) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (k + twice_k, c.clone())).collect() }
    }

    /// The term that dominates as n → ∞: smallest exponent `2k`.
    pub fn leading(&self) -> Option<(i64, &Rat)> {
        self.terms.iter().next().map(|(k, c)| (*k, c))
    }

    /// The single exponent `2k`, or an error when the coefficient mixes exponents.
    pub fn single_exponent(&self) -> Result<Option<i64>> {
        match self.terms.len() {
            0 => Ok(None),
            1 => Ok(Some(*self.terms.keys().next().unwrap())),
            _ => Err(Error::MixedExponent),
        }
    }

    /// Exact evaluation at a concrete n. Only valid when every exponent is integral.
    pub fn eval_exact(&self, n: u64) -> Result<Rat> {
        let mut acc = Rat::zero();
        let n_rat = Rat::from(BigInt::from(n));
        for (twice_k, c) in self.terms() {
            if twice_k % 2 != 0 {
                return Err(Error::Internal(format!(
                    "half-integer exponent 2k = {twice_k} cannot be evaluated exactly"
                )));
            }
            let k = twice_k / 2;
            let p = pow_rat(&n_rat, -k);
            acc += c * p;
        }
        Ok(acc)
    }

    /// Floating-point evaluation at a concrete n (half-integer exponents allowed).
    pub fn eval_f64(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.terms()
            .map(|(twice_k, c)| rat_to_f64(c) * nf.powf(-(twice_k as f64) / 2.0))
            .sum()
    }

    /// The plain rational value when the coefficient is a single exponent-0 term
    /// (or zero).
    pub fn as_rat(&self) -> Option<Rat> {
        if self.is_zero() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&0) {
                return Some(c.clone());
            }
        }
        None
    }
}

fn pow_rat(base: &Rat, exp: i64) -> Rat {
    if exp >= 0 {
        num_traits::pow::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow::pow(base.recip(), (-exp) as usize)
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a division of leading digits; only hit for huge integers.
        let num = r.numer().to_f64().unwrap_or(f64::NAN);
        let den = r.denom().to_f64().unwrap_or(f64::NAN);
        num / den
    })
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (twice_k, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if twice_k == 0 {
                write!(f, "{c}")?;
            } else if twice_k % 2 == 0 {
                write!(f, "{c}·n^{}", -twice_k / 2)?;
            } else {
                write!(f, "{c}·n^{}", -(twice_k as f64) / 2.0)?;
            }
        }
        Ok(())
    }
}

impl From<Rat> for Coefficient {
    fn from(c: Rat) -> Self {
        Self::from_rat(c)
    }
}

/// Checks `|r|` against a tolerance; used by statistical suites when exact
/// comparison is not available.
pub fn rat_abs_le(r: &Rat, tol: &Rat) -> bool {
    r.abs() <= *tol
}
