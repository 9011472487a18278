use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use super::{Mode, ModeOperator, Space, TruncationSpec};
use crate::specfun::{coherent_amplitude, ln_factorial};
use crate::{CMatrix, CVector, Error, Result, C64, ONE, ZERO};

/// Pure state on the joint cavity (x) mirror space.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    amplitudes: CVector,
    truncation: TruncationSpec,
}

impl BipartiteState {
    pub fn new(amplitudes: CVector, truncation: TruncationSpec) -> Result<Self> {
        if amplitudes.len() != truncation.joint_dim() {
            return Err(Error::DimensionMismatch { left: amplitudes.len(), right: truncation.joint_dim() });
        }
        Ok(Self { amplitudes, truncation })
    }

    /// `|k>_c |j>_m`.
    pub fn basis(k: usize, j: usize, truncation: TruncationSpec) -> Result<Self> {
        if k >= truncation.dim_cavity() {
            return Err(Error::DimensionMismatch { left: k + 1, right: truncation.dim_cavity() });
        }
        if j >= truncation.dim_mirror() {
            return Err(Error::DimensionMismatch { left: j + 1, right: truncation.dim_mirror() });
        }
        let mut amplitudes = CVector::zeros(truncation.joint_dim());
        amplitudes[truncation.index(k, j)] = ONE;
        Ok(Self { amplitudes, truncation })
    }

    pub fn product(cavity: &CVector, mirror: &CVector, truncation: TruncationSpec) -> Result<Self> {
        if cavity.len() != truncation.dim_cavity() {
            return Err(Error::DimensionMismatch { left: cavity.len(), right: truncation.dim_cavity() });
        }
        if mirror.len() != truncation.dim_mirror() {
            return Err(Error::DimensionMismatch { left: mirror.len(), right: truncation.dim_mirror() });
        }
        Ok(Self { amplitudes: cavity.kronecker(mirror), truncation })
    }

    /// Product of two coherent states, each renormalized on its truncated mode.
    pub fn coherent_product(alpha: C64, gamma: C64, truncation: TruncationSpec) -> Result<Self> {
        let c = coherent_state(alpha, truncation.dim_cavity(), truncation.tail_tol())?;
        let m = coherent_state(gamma, truncation.dim_mirror(), truncation.tail_tol()).map_err(|e| match e {
            Error::TruncationInsufficient { population, suggested_dim, .. } => {
                Error::TruncationInsufficient { mode: Mode::Mirror, population, suggested_dim }
            }
            other => other,
        })?;
        Self::product(&c.vector, &m.vector, truncation)
    }

    /// Reinterpret a `dim_cavity x dim_mirror` coefficient matrix.
    pub fn from_coefficients(coefficients: &CMatrix, truncation: TruncationSpec) -> Result<Self> {
        if coefficients.nrows() != truncation.dim_cavity() || coefficients.ncols() != truncation.dim_mirror() {
            return Err(Error::DimensionMismatch {
                left: coefficients.nrows() * coefficients.ncols(),
                right: truncation.joint_dim(),
            });
        }
        let dm = truncation.dim_mirror();
        let amplitudes = CVector::from_fn(truncation.joint_dim(), |i, _| coefficients[(i / dm, i % dm)]);
        Ok(Self { amplitudes, truncation })
    }

    /// Coefficient matrix `psi[k, j]` (rows: photons, columns: phonons).
    pub fn coefficients(&self) -> CMatrix {
        let dm = self.truncation.dim_mirror();
        CMatrix::from_fn(self.truncation.dim_cavity(), dm, |k, j| self.amplitudes[k * dm + j])
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.truncation
    }

    pub fn amplitude(&self, k: usize, j: usize) -> C64 {
        self.amplitudes[self.truncation.index(k, j)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.unscale_mut(n);
        }
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &BipartiteState) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch { left: self.amplitudes.len(), right: other.amplitudes.len() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<C64> {
        if op.space() != self.truncation.joint_space() {
            return Err(Error::SpaceMismatch { expected: crate::error::SpaceLabel::Joint, found: op.space().label() });
        }
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)))
    }

    /// Marginal number distribution of one mode.
    pub fn populations(&self, mode: Mode) -> Vec<f64> {
        let tr = &self.truncation;
        let mut out = alloc::vec![0.0; tr.dim(mode)];
        for k in 0..tr.dim_cavity() {
            for j in 0..tr.dim_mirror() {
                let p = self.amplitudes[tr.index(k, j)].norm_sqr();
                match mode {
                    Mode::Cavity => out[k] += p,
                    Mode::Mirror => out[j] += p,
                }
            }
        }
        out
    }

    pub fn mean_number(&self, mode: Mode) -> f64 {
        self.populations(mode).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Population in the highest retained level of `mode`.
    pub fn edge_population(&self, mode: Mode) -> f64 {
        *self.populations(mode).last().expect("dims >= 2")
    }

    /// Fails when either mode puts `tail_tol` or more into its top level.
    pub fn check_truncation(&self) -> Result<()> {
        for mode in [Mode::Cavity, Mode::Mirror] {
            let population = self.edge_population(mode);
            if population >= self.truncation.tail_tol() {
                let dim = self.truncation.dim(mode);
                return Err(Error::TruncationInsufficient { mode, population, suggested_dim: dim + dim / 2 + 8 });
            }
        }
        Ok(())
    }

    /// Zero-pad (or cut) into another truncation; returns the state and the
    /// discarded squared norm.
    pub fn resized(&self, truncation: TruncationSpec) -> (BipartiteState, f64) {
        let mut amplitudes = CVector::zeros(truncation.joint_dim());
        let mut dropped = 0.0;
        for k in 0..self.truncation.dim_cavity() {
            for j in 0..self.truncation.dim_mirror() {
                let v = self.amplitude(k, j);
                if k < truncation.dim_cavity() && j < truncation.dim_mirror() {
                    amplitudes[truncation.index(k, j)] = v;
                } else {
                    dropped += v.norm_sqr();
                }
            }
        }
        (BipartiteState { amplitudes, truncation }, dropped)
    }
}

/// Truncated coherent state with the Poisson mass that did not fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    pub vector: CVector,
    pub tail_mass: f64,
}

/// Poisson mass `sum_{n >= dim} e^{-m} m^n / n!` for mean `m`.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    let mut total = 0.0;
    let mut n = dim;
    loop {
        let p = (-mean + n as f64 * ln_mean - ln_factorial(n)).exp();
        total += p;
        // Past the mode the terms decay at least geometrically.
        if n as f64 > mean && p <= total * 1e-17 {
            break;
        }
        if p == 0.0 && n as f64 > mean {
            break;
        }
        n += 1;
    }
    total
}

/// `|alpha>` on `dim` levels, renormalized after truncation.
pub fn coherent_state(amplitude: C64, dim: usize, tail_tol: f64) -> Result<CoherentState> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mean = amplitude.norm_sqr();
    let tail_mass = poisson_tail(mean, dim);
    if tail_mass >= tail_tol {
        let mut suggested_dim = dim;
        while poisson_tail(mean, suggested_dim) >= tail_tol {
            suggested_dim += 1;
        }
        return Err(Error::TruncationInsufficient { mode: Mode::Cavity, population: tail_mass, suggested_dim });
    }
    let mut vector = CVector::from_fn(dim, |n, _| coherent_amplitude(amplitude, n));
    let norm = vector.norm();
    vector.unscale_mut(norm);
    Ok(CoherentState { vector, tail_mass })
}

/// Reduced state of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    mode: Mode,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, mode: Mode) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { left: matrix.nrows(), right: matrix.ncols() });
        }
        let deviation = super::hermiticity_defect(&matrix);
        if deviation > 1e-10 {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter { name: "trace", value: trace, reason: "density matrix trace must be 1" });
        }
        let min_eig = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidParameter {
                name: "eigenvalue",
                value: min_eig,
                reason: "density matrix must be positive semidefinite",
            });
        }
        Ok(Self { matrix, mode })
    }

    pub fn pure(vector: &CVector, mode: Mode) -> Self {
        let n = vector.norm();
        let v = vector.unscale(n);
        Self { matrix: &v * v.adjoint(), mode }
    }

    /// Geometric number distribution with mean `nbar`, renormalized on `dim` levels.
    pub fn thermal(nbar: f64, dim: usize, mode: Mode) -> Self {
        let ratio = nbar / (1.0 + nbar);
        let mut diag: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32) / (1.0 + nbar)).collect();
        let total: f64 = diag.iter().sum();
        diag.iter_mut().for_each(|p| *p /= total);
        Self {
            matrix: CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO }),
            mode,
        }
    }

    pub fn maximally_mixed(dim: usize, mode: Mode) -> Self {
        Self { matrix: CMatrix::identity(dim, dim).unscale(dim as f64), mode }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn space(&self) -> Space {
        Space::single(self.mode, self.dim())
    }
}

/// Partial trace keeping `keep`.
pub fn reduced_density(psi: &BipartiteState, keep: Mode) -> DensityMatrix {
    let m = psi.coefficients();
    let matrix = match keep {
        Mode::Cavity => &m * m.adjoint(),
        Mode::Mirror => m.transpose() * m.map(|v| v.conj()),
    };
    DensityMatrix { matrix, mode: keep }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_coherent_state() {
        let c = coherent_state(ZERO, 5, 1e-8).unwrap();
        assert_eq!(c.vector[0], ONE);
        assert!(c.vector.iter().skip(1).all(|v| *v == ZERO));
        assert_eq!(c.tail_mass, 0.0);
    }

    #[test]
    fn coherent_state_truncation_error() {
        let err = coherent_state(C64::new(2.0, 0.0), 10, 1e-10).unwrap_err();
        match err {
            Error::TruncationInsufficient { population, suggested_dim, .. } => {
                // Poisson(4) mass beyond n = 9
                let oracle: f64 = 1.0 - (0..10).map(|n| (-4.0f64).exp() * 4f64.powi(n) / (1..=n).product::<i32>() as f64).sum::<f64>();
                assert!((population - oracle).abs() < 1e-12);
                assert!(poisson_tail(4.0, suggested_dim) < 1e-10);
                assert!(poisson_tail(4.0, suggested_dim - 1) >= 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
        let ok = coherent_state(C64::new(2.0, 0.0), 30, 1e-10).unwrap();
        assert!((ok.vector.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let tr = TruncationSpec::new(4, 5).unwrap();
        let psi = BipartiteState::basis(2, 3, tr).unwrap();
        let rho = reduced_density(&psi, Mode::Mirror);
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == 3 && j == 3 { 1.0 } else { 0.0 };
                assert!((rho.matrix()[(i, j)].re - expected).abs() < 1e-15);
            }
        }
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_state_reduces_to_mixed() {
        let tr = TruncationSpec::new(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let mut v = CVector::zeros(4);
        v[tr.index(0, 0)] = C64::new(s, 0.0);
        v[tr.index(1, 1)] = C64::new(s, 0.0);
        let psi = BipartiteState::new(v, tr).unwrap();
        let rho = reduced_density(&psi, Mode::Cavity);
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-15);
        assert!((rho.purity() - 0.5).abs() < 1e-15);
        let rho_m = reduced_density(&psi, Mode::Mirror);
        assert!((rho_m.purity() - rho.purity()).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(2, 2), Mode::Cavity).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m, Mode::Cavity).is_err());
        let mixed = DensityMatrix::maximally_mixed(3, Mode::Mirror);
        assert!(DensityMatrix::new(mixed.matrix().clone(), Mode::Mirror).is_ok());
    }

    #[test]
    fn truncation_check_flags_edge_population() {
        let tr = TruncationSpec::new(3, 3).unwrap();
        let psi = BipartiteState::basis(2, 0, tr).unwrap();
        assert!(matches!(psi.check_truncation(), Err(Error::TruncationInsufficient { mode: Mode::Cavity, .. })));
        let psi = BipartiteState::basis(1, 1, tr).unwrap();
        assert!(psi.check_truncation().is_ok());
    }
}
