//! Wigner matrix ensembles: symmetric matrices whose scaled entries are i.i.d.
//! mean-0 variance-1, with configurable off-diagonal and diagonal laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rng::{rademacher, standard_normal, stream_rng, uniform_sym, STREAM_MATRIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffDiagLaw {
    /// ±1 signs.
    Rademacher,
    /// Standard normal.
    Gaussian,
    /// Uniform on [-sqrt(3), sqrt(3)] (variance 1).
    UniformCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagLaw {
    Zero,
    SameAsOffdiag,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEnsemble {
    pub n: usize,
    pub offdiag: OffDiagLaw,
    pub diag: DiagLaw,
    /// Scale entries by 1/sqrt(n-1) instead of 1/sqrt(n).
    #[serde(default)]
    pub variant_scaling: bool,
    pub seed: u64,
}

impl MatrixEnsemble {
    pub fn rademacher_zero_diag(n: usize, seed: u64) -> Self {
        Self { n, offdiag: OffDiagLaw::Rademacher, diag: DiagLaw::Zero, variant_scaling: false, seed }
    }

    pub fn gaussian_zero_diag(n: usize, seed: u64) -> Self {
        Self { n, offdiag: OffDiagLaw::Gaussian, diag: DiagLaw::Zero, variant_scaling: false, seed }
    }

    /// Uniform over ±1/sqrt(n-1) off the diagonal, zero diagonal.
    pub fn rademacher_variant(n: usize, seed: u64) -> Self {
        Self { n, offdiag: OffDiagLaw::Rademacher, diag: DiagLaw::Zero, variant_scaling: true, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn scale(&self) -> f64 {
        if self.variant_scaling {
            1.0 / ((self.n - 1) as f64).sqrt()
        } else {
            1.0 / (self.n as f64).sqrt()
        }
    }

    /// Samples the symmetric matrix. Entries are drawn row-major over i <= j
    /// from stream `STREAM_MATRIX` of the ensemble seed, so results are
    /// reproducible bit-for-bit.
    pub fn sample(&self) -> Result<SymMatrix> {
        if self.n == 0 {
            return Err(Error::Config("ensemble dimension must be >= 1".into()));
        }
        if self.variant_scaling && self.n < 2 {
            return Err(Error::Config("variant scaling needs n >= 2".into()));
        }
        let mut rng = stream_rng(self.seed, STREAM_MATRIX);
        let s = self.scale();
        let mut m = SymMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = if i == j {
                    match self.diag {
                        DiagLaw::Zero => 0.0,
                        DiagLaw::SameAsOffdiag => s * draw(self.offdiag, &mut rng),
                        DiagLaw::Gaussian => s * standard_normal(&mut rng),
                    }
                } else {
                    s * draw(self.offdiag, &mut rng)
                };
                m.set_sym(i, j, v);
            }
        }
        Ok(m)
    }
}

fn draw(law: OffDiagLaw, rng: &mut impl rand::RngCore) -> f64 {
    match law {
        OffDiagLaw::Rademacher => rademacher(rng),
        OffDiagLaw::Gaussian => standard_normal(rng),
        OffDiagLaw::UniformCentered => 3f64.sqrt() * uniform_sym(rng),
    }
}
