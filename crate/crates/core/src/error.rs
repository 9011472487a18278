use core::fmt;

use crate::fock::Mode;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {dim}: every truncated mode needs at least 2 levels")]
    InvalidDimension { dim: usize },

    #[error("invalid tail tolerance {0}: must lie in (0, 1)")]
    InvalidTolerance(f64),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{mode} truncation insufficient: population {population:.3e} beyond the cutoff; use dimension >= {suggested_dim}")]
    TruncationInsufficient {
        mode: Mode,
        population: f64,
        suggested_dim: usize,
    },

    #[error("operator acts on {found} but {expected} was required")]
    SpaceMismatch { expected: SpaceLabel, found: SpaceLabel },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("Tricomi U(a, b, z) is only implemented for non-positive integer a and integer b (got a = {a}, b = {b})")]
    UnsupportedBranch { a: f64, b: f64 },

    #[error("detuning is zero: the coupled-oscillator frame displacement i*xi/detuning diverges; use the sideband interaction instead")]
    ResonantDivergence,

    #[error("sideband order {order} needs a mirror dimension above {min_dim_exclusive} (got {dim_mirror})")]
    DegenerateTruncation {
        order: i64,
        dim_mirror: usize,
        min_dim_exclusive: usize,
    },

    #[error("sum cutoffs insufficient: norm deficit {deficit:.3e} exceeds {threshold:.1e}; try photon cutoff {suggested_photon} and phonon cutoff {suggested_phonon}")]
    CutoffInsufficient {
        deficit: f64,
        threshold: f64,
        suggested_photon: usize,
        suggested_phonon: usize,
    },

    #[error("grid extents too small: boundary maximum is {ratio:.3e} of the peak (limit {limit:.1e})")]
    ExtentsTooSmall { ratio: f64, limit: f64 },
}

/// Printable tag used in wiring errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceLabel {
    Cavity,
    Mirror,
    Joint,
}

impl fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceLabel::Cavity => "the cavity mode",
            SpaceLabel::Mirror => "the mirror mode",
            SpaceLabel::Joint => "the joint space",
        })
    }
}
