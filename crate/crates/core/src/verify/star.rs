//! Star-diagram combinatorics: constrained perfect matchings of four d-blocks
//! and the second/fourth-moment structure of the (d-star)+ diagram.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::algebra::exact_second_moment;
use crate::canon::canonicalize;
use crate::coeff::Rat;
use crate::diagram::Diagram;
use crate::error::{Error, Result};

/// |M(d,d,d,d)|: perfect matchings of 4d objects in four groups of d with no
/// intra-group pair, by dynamic programming over the six inter-group counts.
pub fn star_matching_count(d: usize) -> Result<BigInt> {
    if d > 10 {
        return Err(Error::BudgetExceeded { what: "star matching DP".into(), needed: d, limit: 10 });
    }
    if d == 0 {
        return Ok(BigInt::one());
    }
    let fact: Vec<BigInt> = {
        let mut f = vec![BigInt::one()];
        for k in 1..=d {
            let last = f.last().unwrap() * BigInt::from(k);
            f.push(last);
        }
        f
    };
    let mut total = BigInt::zero();
    // m[g][h] = matches between groups g < h
    for m12 in 0..=d {
        for m13 in 0..=(d - m12) {
            let m14 = d - m12 - m13;
            for m23 in 0..=(d - m12) {
                let m24 = d - m12 - m23;
                // group 3: m13 + m23 + m34 = d
                if m13 + m23 > d {
                    continue;
                }
                let m34 = d - m13 - m23;
                // group 4 consistency: m14 + m24 + m34 = d
                if m14 + m24 + m34 != d {
                    continue;
                }
                // choose the partition of each group into destination classes,
                // then bijections within each class pair
                let part = |a: usize, b: usize, c: usize| -> BigInt {
                    &fact[d] / (&fact[a] * &fact[b] * &fact[c])
                };
                let ways = part(m12, m13, m14)
                    * part(m12, m23, m24)
                    * part(m13, m23, m34)
                    * part(m14, m24, m34)
                    * &fact[m12]
                    * &fact[m13]
                    * &fact[m14]
                    * &fact[m23]
                    * &fact[m24]
                    * &fact[m34];
                total += ways;
            }
        }
    }
    Ok(total)
}

/// Brute-force oracle: enumerate every perfect matching of 4d labeled objects
/// and keep the cross-group ones. d <= 3.
pub fn star_matching_count_brute(d: usize) -> Result<BigInt> {
    if d > 3 {
        return Err(Error::BudgetExceeded { what: "star matching brute force".into(), needed: d, limit: 3 });
    }
    let total = 4 * d;
    let mut matched = vec![false; total];
    fn rec(matched: &mut [bool], d: usize, count: &mut u64) {
        let Some(first) = matched.iter().position(|m| !m) else {
            *count += 1;
            return;
        };
        matched[first] = true;
        for j in (first + 1)..matched.len() {
            if matched[j] || j / d == first / d {
                continue;
            }
            matched[j] = true;
            rec(matched, d, count);
            matched[j] = false;
        }
        matched[first] = false;
    }
    let mut count = 0u64;
    if d > 0 {
        rec(&mut matched, d, &mut count);
    } else {
        count = 1;
    }
    Ok(BigInt::from(count))
}

#[derive(Debug, Clone)]
pub struct StarMoments {
    /// Exact E[Z^2] of the (d-star)+ diagram at the given n.
    pub m2: Rat,
    /// |Aut| = d! (the leading variance).
    pub aut: BigInt,
    /// Dominant-structure prediction for E[Z^4]: 3 (d!)^2 + |M(d,d,d,d)|/n.
    pub m4_prediction: Rat,
}

pub fn star_moments(d: usize, n: u64) -> Result<StarMoments> {
    let star = canonicalize(&Diagram::star_plus(d))?;
    let m2 = exact_second_moment(&star)?.eval_exact(n)?;
    let aut = BigInt::from(star.aut());
    let matchings = star_matching_count(d)?;
    let m4 = Rat::from_integer(3 * &aut * &aut)
        + Rat::new(matchings, BigInt::from(n));
    Ok(StarMoments { m2, aut, m4_prediction: m4 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_counts() {
        assert_eq!(star_matching_count(1).unwrap(), BigInt::from(3));
        assert_eq!(star_matching_count_brute(1).unwrap(), BigInt::from(3));
        assert_eq!(star_matching_count(0).unwrap(), BigInt::one());
    }

    #[test]
    fn dp_matches_brute_force() {
        for d in 0..=3 {
            assert_eq!(
                star_matching_count(d).unwrap(),
                star_matching_count_brute(d).unwrap(),
                "d = {d}"
            );
        }
    }

    #[test]
    fn growth_against_reference_scale() {
        // log(|M| / (3^d (d!)^2)) grows at most logarithmically in d
        let mut ratios = Vec::new();
        for d in 1..=8 {
            let m = star_matching_count(d).unwrap();
            let mut denom = Rat::from_integer(BigInt::from(3).pow(d as u32));
            let mut f = BigInt::one();
            for k in 1..=d {
                f *= BigInt::from(k);
            }
            denom *= Rat::from_integer(&f * &f);
            let ratio = Rat::from_integer(m) / denom;
            ratios.push(crate::coeff::rat_to_f64(&ratio).ln());
        }
        for w in ratios.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "log-ratio not monotone: {ratios:?}");
        }
        // growth per step shrinks like a log: compare increments
        let incr: Vec<f64> = ratios.windows(2).map(|w| w[1] - w[0]).collect();
        for w in incr.windows(1).skip(2) {
            assert!(w[0] < 1.0, "increment too large: {incr:?}");
        }
    }

    #[test]
    fn star_moment_values() {
        let s = star_moments(3, 100).unwrap();
        assert_eq!(s.aut, BigInt::from(6));
        // m2 = 6 * (99*98*97*96)/100^4
        let expect = Rat::new(BigInt::from(6i64 * 99 * 98 * 97 * 96), BigInt::from(100_000_000u64));
        assert_eq!(s.m2, expect);
    }
}
