//! Dense linear algebra over truncated Fock spaces.
//!
//! Joint cavity/mirror vectors are stored cavity-major: the basis ket
//! `|k>_c |j>_m` sits at index `k * dim_mirror + j`.

use core::fmt;


use nalgebra::DMatrix;

use crate::error::SpaceLabel;
use crate::{CMatrix, Error, Result, C64, ZERO};

mod displacement;
mod propagate;
mod state;

pub use displacement::{displacement_operator, Displacer};
pub use propagate::{
    eigen_blocks, hermiticity_defect, propagate_numeric, Conditioned, EigenPair, Propagator,
};
pub use state::{coherent_state, poisson_tail, reduced_density, BipartiteState, CoherentState, DensityMatrix};

/// Default admissible population in the top basis state of a mode.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Tolerance for Hermiticity checks, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// One of the two bosonic modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Cavity,
    Mirror,
}

impl Mode {
    pub fn other(self) -> Mode {
        match self {
            Mode::Cavity => Mode::Mirror,
            Mode::Mirror => Mode::Cavity,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cavity => "cavity",
            Mode::Mirror => "mirror",
        })
    }
}

/// Fock cutoffs for both modes plus the admissible edge population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    dim_cavity: usize,
    dim_mirror: usize,
    tail_tol: f64,
}

impl TruncationSpec {
    pub fn new(dim_cavity: usize, dim_mirror: usize) -> Result<Self> {
        Self::with_tail_tol(dim_cavity, dim_mirror, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(dim_cavity: usize, dim_mirror: usize, tail_tol: f64) -> Result<Self> {
        for dim in [dim_cavity, dim_mirror] {
            if dim < 2 {
                return Err(Error::InvalidDimension { dim });
            }
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidTolerance(tail_tol));
        }
        Ok(Self { dim_cavity, dim_mirror, tail_tol })
    }

    pub fn dim_cavity(&self) -> usize {
        self.dim_cavity
    }

    pub fn dim_mirror(&self) -> usize {
        self.dim_mirror
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::Cavity => self.dim_cavity,
            Mode::Mirror => self.dim_mirror,
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.dim_cavity * self.dim_mirror
    }

    pub fn index(&self, k: usize, j: usize) -> usize {
        k * self.dim_mirror + j
    }

    pub fn joint_space(&self) -> Space {
        Space::Joint { cavity: self.dim_cavity, mirror: self.dim_mirror }
    }
}

/// The Hilbert space an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Cavity(usize),
    Mirror(usize),
    Joint { cavity: usize, mirror: usize },
}

impl Space {
    pub fn single(mode: Mode, dim: usize) -> Space {
        match mode {
            Mode::Cavity => Space::Cavity(dim),
            Mode::Mirror => Space::Mirror(dim),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Space::Cavity(d) | Space::Mirror(d) => d,
            Space::Joint { cavity, mirror } => cavity * mirror,
        }
    }

    pub fn label(&self) -> SpaceLabel {
        match self {
            Space::Cavity(_) => SpaceLabel::Cavity,
            Space::Mirror(_) => SpaceLabel::Mirror,
            Space::Joint { .. } => SpaceLabel::Joint,
        }
    }
}

/// A dense matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    matrix: CMatrix,
    space: Space,
}

impl ModeOperator {
    pub fn new(matrix: CMatrix, space: Space) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim {
            return Err(Error::DimensionMismatch { left: matrix.nrows(), right: dim });
        }
        if matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { left: matrix.ncols(), right: dim });
        }
        Ok(Self { matrix, space })
    }

    pub(crate) fn from_parts(matrix: CMatrix, space: Space) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        Self { matrix, space }
    }

    pub fn identity(space: Space) -> Self {
        let d = space.dim();
        Self { matrix: CMatrix::identity(d, d), space }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), space: self.space }
    }

    /// `max |H - H^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// Largest `|U^dagger U - 1|` entry over the leading `interior` rows and
    /// columns.
    pub fn unitarity_defect(&self, interior: usize) -> f64 {
        let n = interior.min(self.dim());
        let prod = self.matrix.adjoint() * &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn compose(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        if self.space != rhs.space {
            return Err(Error::SpaceMismatch { expected: self.space.label(), found: rhs.space.label() });
        }
        Ok(Self { matrix: &self.matrix * &rhs.matrix, space: self.space })
    }

    /// `self * rhs - rhs * self`.
    pub fn commutator(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        let ab = self.compose(rhs)?;
        let ba = rhs.compose(self)?;
        Ok(Self { matrix: ab.matrix - ba.matrix, space: self.space })
    }

    /// Embed a single-mode operator into the joint space as `A (x) 1` or
    /// `1 (x) B`.
    pub fn lift(&self, tr: &TruncationSpec) -> Result<ModeOperator> {
        match self.space {
            Space::Cavity(d) if d == tr.dim_cavity() => {
                tensor(self, &ModeOperator::identity(Space::Mirror(tr.dim_mirror())))
            }
            Space::Mirror(d) if d == tr.dim_mirror() => {
                tensor(&ModeOperator::identity(Space::Cavity(tr.dim_cavity())), self)
            }
            Space::Joint { .. } => Err(Error::SpaceMismatch {
                expected: SpaceLabel::Cavity,
                found: SpaceLabel::Joint,
            }),
            other => Err(Error::DimensionMismatch {
                left: other.dim(),
                right: match other {
                    Space::Cavity(_) => tr.dim_cavity(),
                    _ => tr.dim_mirror(),
                },
            }),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension { dim })
    } else {
        Ok(())
    }
}

pub(crate) fn annihilation_matrix(dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    m
}

pub(crate) fn number_matrix(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO })
}

/// Lowering operator: entry `(n-1, n)` is `sqrt(n)`.
pub fn annihilation(mode: Mode, dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    Ok(ModeOperator::from_parts(annihilation_matrix(dim), Space::single(mode, dim)))
}

pub fn creation(mode: Mode, dim: usize) -> Result<ModeOperator> {
    Ok(annihilation(mode, dim)?.adjoint())
}

pub fn number(mode: Mode, dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    Ok(ModeOperator::from_parts(number_matrix(dim), Space::single(mode, dim)))
}

/// Kronecker product of a cavity operator and a mirror operator.
pub fn tensor(cavity: &ModeOperator, mirror: &ModeOperator) -> Result<ModeOperator> {
    let dc = match cavity.space {
        Space::Cavity(d) => d,
        other => return Err(Error::SpaceMismatch { expected: SpaceLabel::Cavity, found: other.label() }),
    };
    let dm = match mirror.space {
        Space::Mirror(d) => d,
        other => return Err(Error::SpaceMismatch { expected: SpaceLabel::Mirror, found: other.label() }),
    };
    Ok(ModeOperator::from_parts(
        cavity.matrix.kronecker(&mirror.matrix),
        Space::Joint { cavity: dc, mirror: dm },
    ))
}

/// Real symmetric quadrature `a + a^dagger` used by the displacement family.
pub(crate) fn position_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ONE;

    #[test]
    fn annihilation_entries() {
        let a = annihilation(Mode::Cavity, 2).unwrap();
        assert_eq!(a.matrix()[(0, 1)], ONE);
        assert_eq!(a.matrix()[(0, 0)], ZERO);
        assert_eq!(a.matrix()[(1, 0)], ZERO);
        let a3 = annihilation(Mode::Mirror, 3).unwrap();
        assert!((a3.matrix()[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(annihilation(Mode::Cavity, 1), Err(Error::InvalidDimension { dim: 1 })));
    }

    #[test]
    fn canonical_commutator_with_corner_defect() {
        let a = annihilation(Mode::Cavity, 30).unwrap();
        let c = a.commutator(&a.adjoint()).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let expected = if i != j {
                    0.0
                } else if i < 29 {
                    1.0
                } else {
                    -29.0
                };
                assert!((c.matrix()[(i, j)].re - expected).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    #[test]
    fn tensor_identities_and_ordering() {
        let ic = ModeOperator::identity(Space::Cavity(3));
        let im = ModeOperator::identity(Space::Mirror(4));
        let joint = tensor(&ic, &im).unwrap();
        assert_eq!(joint.matrix(), &CMatrix::identity(12, 12));

        let n = number(Mode::Cavity, 4).unwrap();
        let tr = TruncationSpec::new(4, 5).unwrap();
        let lifted = n.lift(&tr).unwrap();
        let idx = tr.index(2, 3);
        assert_eq!(lifted.matrix()[(idx, idx)].re, 2.0);

        // Spot-check the index arithmetic.
        let a = ModeOperator::new(
            CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.5, j as f64)),
            Space::Cavity(3),
        )
        .unwrap();
        let b = ModeOperator::new(
            CMatrix::from_fn(4, 4, |i, j| C64::new(1.0 + j as f64, -(i as f64))),
            Space::Mirror(4),
        )
        .unwrap();
        let ab = tensor(&a, &b).unwrap();
        for &(k, j, kp, jp) in &[(0, 0, 2, 3), (1, 2, 0, 1), (2, 3, 2, 3), (2, 0, 1, 2), (0, 3, 1, 0)] {
            let got = ab.matrix()[(k * 4 + j, kp * 4 + jp)];
            let expected = a.matrix()[(k, kp)] * b.matrix()[(j, jp)];
            assert!((got - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_rejects_wrong_tags() {
        let m = ModeOperator::identity(Space::Mirror(3));
        assert!(matches!(tensor(&m, &m), Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn truncation_validation() {
        assert!(TruncationSpec::new(1, 5).is_err());
        assert!(TruncationSpec::with_tail_tol(5, 5, 0.0).is_err());
        assert!(TruncationSpec::with_tail_tol(5, 5, 1.0).is_err());
        let tr = TruncationSpec::new(3, 7).unwrap();
        assert_eq!(tr.tail_tol(), DEFAULT_TAIL_TOL);
        assert_eq!(tr.joint_dim(), 21);
    }
}
