//! Generalized monic Hermite polynomials h_k(x; sigma^2): the orthogonal family
//! for N(0, sigma^2), with the matching-number expansions used by the tree
//! calculus.

use num_traits::{One, Zero};

use crate::coeff::{rat_int, Rat};

/// Coefficient vector of h_k(x; sigma2), index = power of x, via the recurrence
/// h_{k+1} = x h_k - k sigma2 h_{k-1}.
pub fn hermite(k: usize, sigma2: &Rat) -> Vec<Rat> {
    let mut prev: Vec<Rat> = vec![Rat::one()]; // h_0 = 1
    if k == 0 {
        return prev;
    }
    let mut cur: Vec<Rat> = vec![Rat::zero(), Rat::one()]; // h_1 = x
    for deg in 1..k {
        let mut next = vec![Rat::zero(); deg + 2];
        for (p, c) in cur.iter().enumerate() {
            next[p + 1] += c;
        }
        let factor = rat_int(deg as i64) * sigma2;
        for (p, c) in prev.iter().enumerate() {
            next[p] -= c * &factor;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Same polynomial via the matching formula: sum over partial matchings of k
/// objects of (-1)^{|M|} sigma^{2|M|} x^{k-2|M|}. Used as a cross-check.
pub fn hermite_matching_form(k: usize, sigma2: &Rat) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); k + 1];
    for m in 0..=(k / 2) {
        // number of partial matchings with m pairs: k! / ((k-2m)! m! 2^m)
        let mut count = Rat::one();
        for j in 0..(2 * m) {
            count *= rat_int((k - j) as i64);
        }
        let mut denom = Rat::one();
        for j in 1..=m {
            denom *= rat_int(2 * j as i64);
        }
        count /= denom;
        let mut term = count;
        if m % 2 == 1 {
            term = -term;
        }
        for _ in 0..m {
            term *= sigma2;
        }
        out[k - 2 * m] = term;
    }
    out
}

pub fn eval_poly_f64(coeffs: &[Rat], x: f64) -> f64 {
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * x + crate::coeff::rat_to_f64(c);
    }
    acc
}

/// Counts partial matchings of objects grouped into blocks of the given sizes,
/// with no two objects from the same block matched, indexed by the number of
/// pairs.
pub fn cross_matching_counts(block_sizes: &[usize]) -> Vec<u64> {
    let total: usize = block_sizes.iter().sum();
    let mut counts = vec![0u64; total / 2 + 1];
    let mut blocks: Vec<usize> = block_sizes.to_vec();
    fn rec(blocks: &mut Vec<usize>, pairs: usize, counts: &mut [u64]) {
        // first object of the first nonempty block either stays single or
        // matches an object from a later... any other block
        let Some(first) = blocks.iter().position(|&b| b > 0) else {
            counts[pairs] += 1;
            return;
        };
        blocks[first] -= 1;
        // unmatched
        rec(blocks, pairs, counts);
        // matched with an object from a different block
        for j in 0..blocks.len() {
            if j == first || blocks[j] == 0 {
                continue;
            }
            let ways = blocks[j] as u64;
            blocks[j] -= 1;
            let before: Vec<u64> = counts.to_vec();
            rec(blocks, pairs + 1, counts);
            // scale the newly added counts by the number of partner choices
            for (slot, b) in counts.iter_mut().zip(before) {
                *slot = b + (*slot - b) * ways;
            }
            blocks[j] += 1;
        }
        blocks[first] += 1;
    }
    rec(&mut blocks, 0, &mut counts);
    counts
}

/// Linearization of a product of Hermite polynomials in one Gaussian:
/// h_{k1} ... h_{kl} = sum over cross-block matchings M of
/// sigma^{2|M|} h_{k - 2|M|}. Returns (degree, coefficient) pairs.
pub fn hermite_product_expand(ks: &[usize], sigma2: &Rat) -> Vec<(usize, Rat)> {
    let total: usize = ks.iter().sum();
    let counts = cross_matching_counts(ks);
    let mut out = Vec::new();
    for (m, count) in counts.into_iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut c = rat_int(count as i64);
        for _ in 0..m {
            c *= sigma2;
        }
        out.push((total - 2 * m, c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;

    #[test]
    fn low_degree_polynomials() {
        // h_2(x; s) = x^2 - s
        let s = rat(3, 2);
        assert_eq!(hermite(2, &s), vec![-s.clone(), rat(0, 1), rat(1, 1)]);
        // h_3(x; 1) = x^3 - 3x
        assert_eq!(hermite(3, &rat(1, 1)), vec![rat(0, 1), rat(-3, 1), rat(0, 1), rat(1, 1)]);
    }

    #[test]
    fn matching_form_agrees() {
        for k in 0..8 {
            for s in [rat(1, 1), rat(2, 1), rat(5, 3)] {
                assert_eq!(hermite(k, &s), hermite_matching_form(k, &s), "k={k} s={s}");
            }
        }
    }

    #[test]
    fn product_h1_h1() {
        // h_1 h_1 at sigma^2 = 2 -> h_2 + 2
        let e = hermite_product_expand(&[1, 1], &rat(2, 1));
        assert_eq!(e, vec![(0, rat(2, 1)), (2, rat(1, 1))]);
    }

    #[test]
    fn product_expansion_is_consistent_with_polynomials() {
        // multiply coefficient vectors directly and compare against the
        // linearized combination
        for (ks, s) in [(vec![2usize, 3], rat(1, 1)), (vec![2, 2, 1], rat(2, 1)), (vec![4, 1], rat(3, 1))] {
            let mut direct = vec![rat(1, 1)];
            for &k in &ks {
                let h = hermite(k, &s);
                let mut next = vec![rat(0, 1); direct.len() + h.len() - 1];
                for (i, a) in direct.iter().enumerate() {
                    for (j, b) in h.iter().enumerate() {
                        next[i + j] += a * b;
                    }
                }
                direct = next;
            }
            let mut recombined = vec![rat(0, 1); direct.len()];
            for (deg, c) in hermite_product_expand(&ks, &s) {
                for (p, hc) in hermite(deg, &s).into_iter().enumerate() {
                    recombined[p] += hc * &c;
                }
            }
            assert_eq!(direct, recombined, "ks={ks:?} s={s}");
        }
    }

    #[test]
    fn gaussian_moments_from_matchings() {
        // perfect matchings of q objects in one block of size q are forbidden;
        // split into q blocks of one object each to count (q-1)!!
        let counts = cross_matching_counts(&[1, 1, 1, 1]);
        assert_eq!(counts[2], 3); // 3 perfect matchings of 4 objects
        let counts = cross_matching_counts(&[1; 6]);
        assert_eq!(counts[3], 15);
    }
}
