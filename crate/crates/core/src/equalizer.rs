//! Linear equalizers: LMMSE with colored noise and zero forcing.
//!
//! `H` may be tall (all received bins, scheduled symbols); the LMMSE
//! solve is carried out in the `rows x rows` observation space.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::CMatrix;

/// `x_hat = Es H^H (Es H H^H + R_w)^{-1} y`, with the filter precomputed.
#[derive(Debug, Clone)]
pub struct Lmmse {
    filter: CMatrix,
}

impl Lmmse {
    pub fn new(h: &CMatrix, r_w: &CMatrix, es: f64) -> Result<Self> {
        let n = h.nrows();
        if r_w.nrows() != n || r_w.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} noise covariance"),
                found: format!("{}x{}", r_w.nrows(), r_w.ncols()),
            });
        }
        let a = h * h.adjoint() * Complex64::new(es, 0.0) + r_w;
        // A Z = H, then filter = Es Z^H since A is Hermitian
        let z = match a.clone().cholesky() {
            Some(ch) => ch.solve(h),
            None => a
                .lu()
                .solve(h)
                .ok_or(Error::SolveFailure("LMMSE system is singular"))?,
        };
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SolveFailure("LMMSE system is singular"));
        }
        Ok(Self {
            filter: z.adjoint() * Complex64::new(es, 0.0),
        })
    }

    pub fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.filter.ncols());
        (&self.filter * DVector::from_column_slice(y)).iter().copied().collect()
    }

    pub fn filter(&self) -> &CMatrix {
        &self.filter
    }
}

pub fn lmmse_equalize(y: &[Complex64], h: &CMatrix, r_w: &CMatrix, es: f64) -> Result<Vec<Complex64>> {
    Ok(Lmmse::new(h, r_w, es)?.apply(y))
}

/// Least-squares inverse `(H^H H)^{-1} H^H y`.
pub fn zf_equalize(y: &[Complex64], h: &CMatrix) -> Result<Vec<Complex64>> {
    let g = h.adjoint() * h;
    let rhs = h.adjoint() * DVector::from_column_slice(y);
    let x = match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => g.lu().solve(&rhs).ok_or(Error::SolveFailure("ZF system is singular"))?,
    };
    Ok(x.iter().copied().collect())
}
