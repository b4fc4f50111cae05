//! Dense symmetric matrices with deterministic parallel kernels.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // row-major, full storage
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Builds a symmetric matrix from `f(i, j)` evaluated on i <= j.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.data[i * self.n + j] != self.data[j * self.n + i] {
                    return false;
                }
            }
        }
        true
    }

    /// y = A x. Each output row is reduced sequentially, so the result does not
    /// depend on the thread count.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        if self.n >= 512 {
            (0..self.n)
                .into_par_iter()
                .map(|i| dot(self.row(i), x))
                .collect()
        } else {
            (0..self.n).map(|i| dot(self.row(i), x)).collect()
        }
    }

    /// C = A * B, both n x n dense. Used by cyclic-diagram contractions at
    /// moderate n.
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        });
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn linf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn dot_product(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_small() {
        let a = SymMatrix::from_fn(2, |i, j| if i != j { 3.0 } else { 0.0 });
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 3.0]);
        assert!(a.is_symmetric());
    }

    #[test]
    fn matmul_matches_matvec() {
        let a = SymMatrix::from_fn(5, |i, j| (i * 7 + j * 3) as f64 / 10.0);
        let b = SymMatrix::from_fn(5, |i, j| ((i + 2) * (j + 1)) as f64 / 7.0);
        let c = a.matmul(&b);
        let e1 = vec![0.0, 1.0, 0.0, 0.0, 0.0];
        let be1: Vec<f64> = (0..5).map(|i| b.get(i, 1)).collect();
        let expect = a.matvec(&be1);
        for i in 0..5 {
            let got: f64 = (0..5).map(|k| c[i * 5 + k] * e1[k]).sum();
            assert!((got - expect[i]).abs() < 1e-12);
        }
    }
}
