use core::f64::consts::FRAC_PI_2;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{position_matrix, Mode, ModeOperator, Space};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Spectral family of truncated displacement operators on one mode.
///
/// The generator `f a^dag - f^* a` equals `-i |f| R x R^dag` with
/// `x = a + a^dag` and `R = exp(i (arg f + pi/2) N)`, so a single
/// eigendecomposition of the real tridiagonal `x` exponentiates every
/// displacement on the same truncation exactly.
#[derive(Debug, Clone)]
pub struct Displacer {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl Displacer {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        let eig = SymmetricEigen::new(position_matrix(dim));
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn rotation(&self, f: C64) -> Vec<C64> {
        let phi = f.arg() + FRAC_PI_2;
        (0..self.dim()).map(|m| C64::from_polar(1.0, phi * m as f64)).collect()
    }

    /// Dense truncated `exp(f a^dag - f^* a)`.
    pub fn matrix(&self, f: C64) -> CMatrix {
        let n = self.dim();
        if f.norm() == 0.0 {
            return CMatrix::identity(n, n);
        }
        let r = f.norm();
        let phases: Vec<C64> = self.values.iter().map(|&l| C64::from_polar(1.0, -r * l)).collect();
        let rot = self.rotation(f);
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for col in 0..n {
            for row in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..n {
                    acc += phases[p] * (v[(row, p)] * v[(col, p)]);
                }
                out[(row, col)] = rot[row] * acc * rot[col].conj();
            }
        }
        out
    }

    /// `exp(f a^dag - f^* a) v` without forming the matrix.
    pub fn apply(&self, f: C64, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.dim(), "vector length must match the displacer dimension");
        if f.norm() == 0.0 {
            return v.clone();
        }
        let r = f.norm();
        let rot = self.rotation(f);
        let n = self.dim();
        let mut re = DVector::<f64>::zeros(n);
        let mut im = DVector::<f64>::zeros(n);
        for m in 0..n {
            let w = rot[m].conj() * v[m];
            re[m] = w.re;
            im[m] = w.im;
        }
        let re_t = self.vectors.tr_mul(&re);
        let im_t = self.vectors.tr_mul(&im);
        for p in 0..n {
            let w = C64::new(re_t[p], im_t[p]) * C64::from_polar(1.0, -r * self.values[p]);
            re[p] = w.re;
            im[p] = w.im;
        }
        let re_o = &self.vectors * &re;
        let im_o = &self.vectors * &im;
        CVector::from_fn(n, |m, _| rot[m] * C64::new(re_o[m], im_o[m]))
    }
}

/// Truncated displacement operator `exp(f a^dag - f^* a)` by exact
/// exponentiation of its anti-Hermitian generator.
pub fn displacement_operator(mode: Mode, f: C64, dim: usize) -> Result<ModeOperator> {
    let d = Displacer::new(dim)?;
    Ok(ModeOperator::from_parts(d.matrix(f), Space::single(mode, dim)))
}
