use alloc::vec::Vec;

use nalgebra::{DVector, SymmetricEigen};

use super::{BipartiteState, Mode, ModeOperator, Space, HERMITIAN_TOL};
use crate::error::SpaceLabel;
use crate::{CMatrix, CVector, Error, Result, C64, ZERO};

/// `max |H_ij - conj(H_ji)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { left: m.nrows(), right: m.ncols() });
    }
    let deviation = hermiticity_defect(m);
    if deviation > HERMITIAN_TOL * m.camax().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Spectral decomposition of a Hermitian generator, `exp(-i H t) = V e^{-i L t} V^dag`.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: DVector<f64>,
    vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        check_hermitian(h)?;
        let eig = SymmetricEigen::new(h.clone());
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn apply(&self, t: f64, v: &CVector) -> CVector {
        let mut coeffs = self.vectors.ad_mul(v);
        for (c, &l) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= C64::from_polar(1.0, -l * t);
        }
        &self.vectors * coeffs
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (p, &l) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -l * t);
            scaled.column_mut(p).iter_mut().for_each(|v| *v *= phase);
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(-i H t) psi0` on the joint space.
///
/// Fails with a truncation diagnostic when the evolved state reaches the
/// top level of either mode.
pub fn propagate_numeric(h: &ModeOperator, psi0: &BipartiteState, t: f64) -> Result<BipartiteState> {
    let tr = psi0.truncation();
    if h.space() != tr.joint_space() {
        return Err(Error::SpaceMismatch { expected: SpaceLabel::Joint, found: h.space().label() });
    }
    let p = Propagator::new(h.matrix())?;
    let out = BipartiteState::new(p.apply(t, psi0.amplitudes()), *tr)?;
    out.check_truncation()?;
    Ok(out)
}

/// Operator `sum_c |c><c| (x) B_c` that is block diagonal in the number
/// basis of the `control` mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    control: Mode,
    blocks: Vec<CMatrix>,
}

impl Conditioned {
    pub fn new(control: Mode, blocks: Vec<CMatrix>) -> Result<Self> {
        let dim = blocks.first().map(|b| b.nrows()).ok_or(Error::InvalidDimension { dim: 0 })?;
        for b in &blocks {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch { left: b.nrows(), right: dim });
            }
        }
        Ok(Self { control, blocks })
    }

    pub fn control(&self) -> Mode {
        self.control
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn truncation_dims(&self) -> (usize, usize) {
        let target = self.blocks[0].nrows();
        match self.control {
            Mode::Cavity => (self.blocks.len(), target),
            Mode::Mirror => (target, self.blocks.len()),
        }
    }

    fn check_state(&self, psi: &BipartiteState) -> Result<()> {
        let (dc, dm) = self.truncation_dims();
        let tr = psi.truncation();
        if tr.dim_cavity() != dc || tr.dim_mirror() != dm {
            return Err(Error::DimensionMismatch { left: tr.joint_dim(), right: dc * dm });
        }
        Ok(())
    }

    pub fn to_operator(&self) -> ModeOperator {
        let (dc, dm) = self.truncation_dims();
        let mut m = CMatrix::zeros(dc * dm, dc * dm);
        for (c, b) in self.blocks.iter().enumerate() {
            for r in 0..b.nrows() {
                for s in 0..b.ncols() {
                    let (row, col) = match self.control {
                        Mode::Cavity => (c * dm + r, c * dm + s),
                        Mode::Mirror => (r * dm + c, s * dm + c),
                    };
                    m[(row, col)] = b[(r, s)];
                }
            }
        }
        ModeOperator::from_parts(m, Space::Joint { cavity: dc, mirror: dm })
    }

    pub fn apply(&self, psi: &BipartiteState) -> Result<BipartiteState> {
        self.check_state(psi)?;
        let tr = *psi.truncation();
        let coeffs = psi.coefficients();
        let out = match self.control {
            Mode::Cavity => {
                let mut out = coeffs.clone();
                for (k, b) in self.blocks.iter().enumerate() {
                    let row = coeffs.row(k).transpose();
                    out.set_row(k, &(b * row).transpose());
                }
                out
            }
            Mode::Mirror => {
                let mut out = coeffs.clone();
                for (j, b) in self.blocks.iter().enumerate() {
                    let col = coeffs.column(j).into_owned();
                    out.set_column(j, &(b * col));
                }
                out
            }
        };
        BipartiteState::from_coefficients(&out, tr)
    }

    pub fn adjoint(&self) -> Self {
        Self { control: self.control, blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    /// `U^dagger H U` for this operator `U`, one pair of control blocks at a
    /// time. Vanishing blocks of `H` are skipped.
    pub fn conjugate(&self, h: &ModeOperator) -> Result<ModeOperator> {
        let (dc, dm) = self.truncation_dims();
        let space = Space::Joint { cavity: dc, mirror: dm };
        if h.space() != space {
            return Err(Error::SpaceMismatch { expected: SpaceLabel::Joint, found: h.space().label() });
        }
        let n = self.blocks.len();
        let t = self.blocks[0].nrows();
        let index = |c: usize, r: usize| match self.control {
            Mode::Cavity => c * dm + r,
            Mode::Mirror => r * dm + c,
        };
        let m = h.matrix();
        let mut out = CMatrix::zeros(dc * dm, dc * dm);
        for c in 0..n {
            for c2 in 0..n {
                let block = CMatrix::from_fn(t, t, |r, s| m[(index(c, r), index(c2, s))]);
                if block.iter().all(|v| *v == ZERO) {
                    continue;
                }
                let conj = self.blocks[c].ad_mul(&block) * &self.blocks[c2];
                for r in 0..t {
                    for s in 0..t {
                        out[(index(c, r), index(c2, s))] = conj[(r, s)];
                    }
                }
            }
        }
        Ok(ModeOperator::from_parts(out, space))
    }

    /// Blockwise `exp(-i B_c t)`; every block must be Hermitian.
    pub fn evolution(&self, t: f64) -> Result<Self> {
        let blocks = self.blocks.iter().map(|b| Propagator::new(b).map(|p| p.unitary(t))).collect::<Result<Vec<_>>>()?;
        Ok(Self { control: self.control, blocks })
    }
}

/// Eigenpair of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: CVector,
}

/// Full eigendecomposition that splits the matrix into the connected
/// components of its nonzero pattern first. Block-diagonal Hamiltonians
/// (for instance without drive) diagonalize one block at a time.
pub fn eigen_blocks(h: &CMatrix) -> Result<Vec<EigenPair>> {
    check_hermitian(h)?;
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h[(i, j)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot = alloc::vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = components.len();
            components.push(Vec::new());
        }
        components[slot[root]].push(i);
    }
    let mut pairs = Vec::with_capacity(n);
    for idx in &components {
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let eig = SymmetricEigen::new(sub);
        for p in 0..idx.len() {
            let mut vector = CVector::zeros(n);
            for (r, &i) in idx.iter().enumerate() {
                vector[i] = eig.eigenvectors[(r, p)];
            }
            pairs.push(EigenPair { value: eig.eigenvalues[p], vector });
        }
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation_matrix, number, tensor, TruncationSpec};

    #[test]
    fn zero_time_is_identity() {
        let tr = TruncationSpec::new(3, 4).unwrap();
        let h = number(Mode::Mirror, 4).unwrap().lift(&tr).unwrap();
        let psi = BipartiteState::basis(1, 2, tr).unwrap();
        let out = propagate_numeric(&h, &psi, 0.0).unwrap();
        assert!((out.amplitudes() - psi.amplitudes()).camax() < 1e-15);
    }

    #[test]
    fn number_operator_phase() {
        let tr = TruncationSpec::new(3, 4).unwrap();
        let omega = 1.0;
        let t = 0.73;
        let h = number(Mode::Mirror, 4).unwrap().lift(&tr).unwrap();
        let psi = BipartiteState::basis(0, 1, tr).unwrap();
        let out = propagate_numeric(&h, &psi, t).unwrap();
        let expected = C64::from_polar(1.0, -omega * t);
        assert!((out.amplitude(0, 1) - expected).norm() < 1e-14);
        assert!((out.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let tr = TruncationSpec::new(2, 2).unwrap();
        let a = ModeOperator::new(annihilation_matrix(2), Space::Cavity(2)).unwrap();
        let h = a.lift(&tr).unwrap();
        let psi = BipartiteState::basis(0, 0, tr).unwrap();
        assert!(matches!(propagate_numeric(&h, &psi, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn conditioned_matches_dense() {
        let tr = TruncationSpec::new(3, 4).unwrap();
        let blocks: Vec<CMatrix> = (0..4)
            .map(|j| {
                let a = annihilation_matrix(3);
                (a.adjoint() - &a) * C64::new(0.0, 0.2 * (j as f64 + 1.0))
            })
            .collect();
        let cond = Conditioned::new(Mode::Mirror, blocks).unwrap();
        let psi = BipartiteState::coherent_product(C64::new(0.1, 0.0), C64::new(0.2, 0.1), TruncationSpec::with_tail_tol(3, 4, 0.5).unwrap()).unwrap();
        let dense = cond.to_operator();
        let a = cond.apply(&psi).unwrap();
        let b = dense.matrix() * psi.amplitudes();
        assert!((a.amplitudes() - b).camax() < 1e-15);

        let h = ModeOperator::new(annihilation_matrix(12) + annihilation_matrix(12).adjoint(), Space::Joint { cavity: 3, mirror: 4 }).unwrap();
        let fast = cond.conjugate(&h).unwrap();
        let slow = dense.adjoint().compose(&h).unwrap().compose(&dense).unwrap();
        assert!((fast.matrix() - slow.matrix()).camax() < 1e-14);

        let u = cond.evolution(1.3).unwrap();
        let dense_u = Propagator::new(dense.matrix()).unwrap().unitary(1.3);
        assert!((u.to_operator().matrix() - dense_u).camax() < 1e-12);
        assert_eq!(u.truncation_dims(), (tr.dim_cavity(), tr.dim_mirror()));
    }

    #[test]
    fn block_eigen_matches_dense() {
        let a = ModeOperator::new(annihilation_matrix(4), Space::Cavity(4)).unwrap();
        let b = ModeOperator::new(annihilation_matrix(5), Space::Mirror(5)).unwrap();
        let n_a = a.adjoint().compose(&a).unwrap();
        let x_b = ModeOperator::new(b.matrix() + b.matrix().adjoint(), Space::Mirror(5)).unwrap();
        let h = tensor(&n_a, &x_b).unwrap();
        let pairs = eigen_blocks(h.matrix()).unwrap();
        let mut dense: Vec<f64> = SymmetricEigen::new(h.matrix().clone()).eigenvalues.iter().cloned().collect();
        dense.sort_by(f64::total_cmp);
        for (p, d) in pairs.iter().zip(&dense) {
            assert!((p.value - d).abs() < 1e-12);
            let resid = (h.matrix() * &p.vector - &p.vector * C64::new(p.value, 0.0)).camax();
            assert!(resid < 1e-12);
        }
    }
}
