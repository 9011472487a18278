//! Hamiltonians of the driven optomechanical cavity with a Kerr medium.
//!
//! Every builder returns a joint-space operator on the cavity-major basis of
//! a [`TruncationSpec`]. Frequencies are in units of the mechanical
//! frequency unless a [`SystemParams`] carries a different `omega_m`.

use alloc::vec::Vec;

use crate::fock::{
    eigen_blocks, hermiticity_defect, poisson_tail, BipartiteState, Conditioned, Displacer, Mode, ModeOperator, TruncationSpec,
    HERMITIAN_TOL,
};
use crate::specfun::{displacement_block, laguerre, ln_factorial};
use crate::{CMatrix, Error, Result, C64, I, ZERO};

/// Tolerance of the Kerr-matching test `|chi - g0^2 / omega_m|`.
pub const KERR_MATCH_TOL: f64 = 1e-12;

/// Physical parameters `(detuning, omega_m, g0, chi, xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    detuning: f64,
    omega_m: f64,
    g0: f64,
    chi: f64,
    xi: f64,
}

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must be finite and non-negative" })
    }
}

impl SystemParams {
    pub fn new(detuning: f64, omega_m: f64, g0: f64, chi: f64, xi: f64) -> Result<Self> {
        if !detuning.is_finite() {
            return Err(Error::InvalidParameter { name: "detuning", value: detuning, reason: "must be finite" });
        }
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(Error::InvalidParameter { name: "omega_m", value: omega_m, reason: "must be finite and positive" });
        }
        Ok(Self {
            detuning,
            omega_m,
            g0: non_negative("g0", g0)?,
            chi: non_negative("chi", chi)?,
            xi: non_negative("xi", xi)?,
        })
    }

    /// `omega_m = 1` and `chi = g0^2`, the Kerr strength that cancels the
    /// photon-number squared shift of the polaron frame.
    pub fn kerr_matched(detuning: f64, g0: f64, xi: f64) -> Result<Self> {
        Self::new(detuning, 1.0, g0, g0 * g0, xi)
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `g0 / omega_m`.
    pub fn eta(&self) -> f64 {
        self.g0 / self.omega_m
    }

    /// The Kerr constant that matches the coupling, `g0^2 / omega_m`.
    pub fn matched_chi(&self) -> f64 {
        self.g0 * self.g0 / self.omega_m
    }

    pub fn is_kerr_matched(&self) -> bool {
        (self.chi - self.matched_chi()).abs() < KERR_MATCH_TOL
    }

    pub fn with_detuning(self, detuning: f64) -> Result<Self> {
        Self::new(detuning, self.omega_m, self.g0, self.chi, self.xi)
    }

    pub fn with_xi(self, xi: f64) -> Result<Self> {
        Self::new(self.detuning, self.omega_m, self.g0, self.chi, xi)
    }

    pub fn with_chi(self, chi: f64) -> Result<Self> {
        Self::new(self.detuning, self.omega_m, self.g0, chi, self.xi)
    }
}

/// Non-fatal construction diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The ion-laser form was requested although `chi != g0^2 / omega_m`.
    KerrUnmatched { chi: f64, matched_chi: f64 },
    /// The mirror displacement of the top photon block leaks past the mirror
    /// cutoff.
    PolaronTruncation { photon_number: usize, tail: f64, suggested_dim_mirror: usize },
}

/// An operator together with the warnings raised while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Built {
    pub operator: ModeOperator,
    pub warnings: Vec<Warning>,
}

/// Deliberate assembly errors for exercising the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyFault {
    #[default]
    None,
    /// Flip the sign of `omega_m eta n (b + b^dagger)` in the displaced
    /// Hamiltonian.
    FlipLinearCoupling,
}

fn finish(m: CMatrix, tr: &TruncationSpec) -> Result<ModeOperator> {
    let deviation = hermiticity_defect(&m);
    if deviation > HERMITIAN_TOL * m.camax().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    ModeOperator::new(m, tr.joint_space())
}

fn sqrt(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Diagonal part `f(k, j)` plus the position coupling `c(k) (b + b^dagger)`.
fn mirror_blocks(tr: &TruncationSpec, diag: impl Fn(f64, f64) -> f64, coupling: impl Fn(f64) -> f64) -> CMatrix {
    let (dc, dm) = (tr.dim_cavity(), tr.dim_mirror());
    let mut m = CMatrix::zeros(dc * dm, dc * dm);
    for k in 0..dc {
        let c = coupling(k as f64);
        for j in 0..dm {
            let i = tr.index(k, j);
            m[(i, i)] = C64::new(diag(k as f64, j as f64), 0.0);
            if j + 1 < dm && c != 0.0 {
                let v = C64::new(c * sqrt(j + 1), 0.0);
                m[(i, i + 1)] = v;
                m[(i + 1, i)] = v;
            }
        }
    }
    m
}

/// Adds `i xi (a^dagger (x) A - a (x) A^dagger)` for a mirror operator `A`.
fn add_drive(m: &mut CMatrix, tr: &TruncationSpec, xi: f64, a: &CMatrix) {
    let (dc, dm) = (tr.dim_cavity(), tr.dim_mirror());
    for k in 0..dc - 1 {
        let s = sqrt(k + 1) * xi;
        for r in 0..dm {
            for c in 0..dm {
                let v = a[(r, c)];
                if v == ZERO {
                    continue;
                }
                // <k+1, r| a^dagger A |k, c> and its Hermitian partner.
                let up = I * s * v;
                m[(tr.index(k + 1, r), tr.index(k, c))] += up;
                m[(tr.index(k, c), tr.index(k + 1, r))] += up.conj();
            }
        }
    }
}

/// `Delta a^dagger a + omega_m b^dagger b - g0 a^dagger a (b^dagger + b)
/// + chi (a^dagger a)^2 + i xi (a^dagger - a)`.
pub fn full_hamiltonian(p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    let mut m = mirror_blocks(
        tr,
        |k, j| p.detuning * k + p.omega_m * j + p.chi * k * k,
        |k| -p.g0 * k,
    );
    add_drive(&mut m, tr, p.xi, &CMatrix::identity(tr.dim_mirror(), tr.dim_mirror()));
    finish(m, tr)
}

/// Per-photon-block mirror displacements `D_b(eta k)`, the block form of
/// `exp[eta a^dagger a (b^dagger - b)]`.
pub fn polaron_blocks(eta: f64, tr: &TruncationSpec) -> Result<Conditioned> {
    let disp = Displacer::new(tr.dim_mirror())?;
    let blocks = (0..tr.dim_cavity()).map(|k| disp.matrix(C64::new(eta * k as f64, 0.0))).collect();
    Conditioned::new(Mode::Cavity, blocks)
}

/// Mirror-cutoff adequacy of `D_b(eta k)` for the top photon block.
pub fn polaron_truncation_warning(eta: f64, tr: &TruncationSpec) -> Option<Warning> {
    let top = tr.dim_cavity() - 1;
    let shift = eta * top as f64;
    let mean = shift * shift;
    let tail = poisson_tail(mean, tr.dim_mirror());
    if tail < tr.tail_tol() {
        return None;
    }
    let mut suggested = tr.dim_mirror();
    while poisson_tail(mean, suggested) >= tr.tail_tol() {
        suggested += 1 + suggested / 8;
    }
    Some(Warning::PolaronTruncation { photon_number: top, tail, suggested_dim_mirror: suggested })
}

/// Dense polaron unitary `exp[eta a^dagger a (b^dagger - b)]`.
pub fn polaron_unitary(eta: f64, tr: &TruncationSpec) -> Result<Built> {
    let operator = polaron_blocks(eta, tr)?.to_operator();
    let warnings = polaron_truncation_warning(eta, tr).into_iter().collect();
    Ok(Built { operator, warnings })
}

/// Matrix-free polaron unitary: applies `exp[+-eta a^dagger a (b^dagger - b)]`
/// photon block by photon block through one mirror [`Displacer`].
#[derive(Debug, Clone)]
pub struct PolaronTransform {
    eta: f64,
    displacer: Displacer,
}

impl PolaronTransform {
    pub fn new(eta: f64, dim_mirror: usize) -> Result<Self> {
        Ok(Self { eta, displacer: Displacer::new(dim_mirror)? })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn apply(&self, psi: &BipartiteState, sign: f64) -> Result<BipartiteState> {
        let tr = *psi.truncation();
        if tr.dim_mirror() != self.displacer.dim() {
            return Err(Error::DimensionMismatch { left: tr.dim_mirror(), right: self.displacer.dim() });
        }
        let mut coeffs = psi.coefficients();
        for k in 0..tr.dim_cavity() {
            let row = coeffs.row(k).transpose();
            let out = self.displacer.apply(C64::new(sign * self.eta * k as f64, 0.0), &row);
            coeffs.set_row(k, &out.transpose());
        }
        BipartiteState::from_coefficients(&coeffs, tr)
    }

    /// `U psi`.
    pub fn dress(&self, psi: &BipartiteState) -> Result<BipartiteState> {
        self.apply(psi, 1.0)
    }

    /// `U^dagger psi`.
    pub fn undress(&self, psi: &BipartiteState) -> Result<BipartiteState> {
        self.apply(psi, -1.0)
    }
}

/// The resonant interaction as phonon-number blocks
/// `i xi e^{-eta^2/2} L_j(eta^2) (a^dagger - a)` on the cavity.
pub fn resonant_blocks(p: &SystemParams, tr: &TruncationSpec) -> Result<Conditioned> {
    let a = crate::fock::annihilation_matrix(tr.dim_cavity());
    let gen = (a.adjoint() - a) * (I * p.xi);
    let blocks = (0..tr.dim_mirror()).map(|j| &gen * C64::new(phonon_weight(j, p.eta()), 0.0)).collect();
    Conditioned::new(Mode::Mirror, blocks)
}

/// The polaron-displaced Hamiltonian for `eta = g0 / omega_m`.
pub fn displaced_hamiltonian(p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    displaced_hamiltonian_with(p, p.eta(), tr, AssemblyFault::None)
}

/// The polaron-displaced Hamiltonian for an arbitrary displacement `eta`:
///
/// `Delta n + omega_m [b^dagger b + eta^2 n^2 + eta n (b^dagger + b)]
///  - g0 n (b^dagger + b + 2 eta n) + chi n^2
///  + i xi [a^dagger D_b^dagger(eta) - a D_b(eta)]`
///
/// with `n = a^dagger a`. It equals `U^dagger H U` for the full Hamiltonian
/// `H` and `U = exp[eta n (b^dagger - b)]`.
pub fn displaced_hamiltonian_with(
    p: &SystemParams,
    eta: f64,
    tr: &TruncationSpec,
    fault: AssemblyFault,
) -> Result<ModeOperator> {
    let linear_sign = match fault {
        AssemblyFault::None => 1.0,
        AssemblyFault::FlipLinearCoupling => -1.0,
    };
    let w = p.omega_m;
    let mut m = mirror_blocks(
        tr,
        |k, j| p.detuning * k + w * (j + eta * eta * k * k) - 2.0 * p.g0 * eta * k * k + p.chi * k * k,
        |k| linear_sign * w * eta * k - p.g0 * k,
    );
    let dm = tr.dim_mirror();
    add_drive(&mut m, tr, p.xi, &displacement_block(C64::new(-eta, 0.0), dm, dm));
    finish(m, tr)
}

/// Largest `|(U^dagger H U - H_eta)_{rc}|` over the interior block, with
/// `H` the full Hamiltonian, `U` the polaron unitary for `eta` and `H_eta`
/// the displaced Hamiltonian assembled with `fault`. A state `|k, j>` is
/// interior when `D_b(eta k)|j>` and its neighbours fit in the mirror
/// truncation. Returns the defect and the number of interior states.
pub fn polaron_conjugation_defect(p: &SystemParams, eta: f64, tr: &TruncationSpec, fault: AssemblyFault) -> Result<(f64, usize)> {
    let conj = polaron_blocks(eta, tr)?.conjugate(&full_hamiltonian(p, tr)?)?;
    let disp = displaced_hamiltonian_with(p, eta, tr, fault)?;
    let dm = tr.dim_mirror();
    let interior = |idx: usize| {
        let (k, j) = (idx / dm, idx % dm);
        let r = eta.abs() * k as f64 + ((j + 2) as f64).sqrt() + 1.0;
        (r * r + 8.0 * r + 10.0).floor() < dm as f64
    };
    let rows: Vec<usize> = (0..tr.joint_dim()).filter(|&i| interior(i)).collect();
    let mut worst: f64 = 0.0;
    for &r in &rows {
        for &c in &rows {
            worst = worst.max((conj.matrix()[(r, c)] - disp.matrix()[(r, c)]).norm());
        }
    }
    Ok((worst, rows.len()))
}

/// `Delta a^dagger a + omega_m b^dagger b + i xi [a^dagger D_b^dagger(eta) - a D_b(eta)]`
/// with `eta = g0 / omega_m`, the displaced Hamiltonian once the Kerr term
/// is matched. The displacement elements come from [`displacement_block`].
pub fn ion_laser_hamiltonian(p: &SystemParams, tr: &TruncationSpec) -> Result<Built> {
    let mut m = mirror_blocks(tr, |k, j| p.detuning * k + p.omega_m * j, |_| 0.0);
    let dm = tr.dim_mirror();
    add_drive(&mut m, tr, p.xi, &displacement_block(C64::new(-p.eta(), 0.0), dm, dm));
    let mut warnings = Vec::new();
    if !p.is_kerr_matched() {
        warnings.push(Warning::KerrUnmatched { chi: p.chi, matched_chi: p.matched_chi() });
    }
    Ok(Built { operator: finish(m, tr)?, warnings })
}

/// Mirror operator `F(N) b^n` (red, `n >= 0`) or `(-1)^n (b^dagger)^n F(N)`
/// (blue, order `-n`), with `F(N) = N!/(N+n)! L_N^{(n)}(eta^2)` and the
/// prefactor `eta^n e^{-eta^2/2}`.
fn sideband_mirror_operator(order: i64, eta: f64, dm: usize) -> Result<CMatrix> {
    let n = order.unsigned_abs() as usize;
    let x = eta * eta;
    let mut f = CMatrix::zeros(dm, dm);
    for m in 0..dm {
        let ratio = (ln_factorial(m) - ln_factorial(m + n)).exp();
        f[(m, m)] = C64::new(ratio * laguerre(m, n as i64, x)?, 0.0);
    }
    let b = crate::fock::annihilation_matrix(dm);
    let mut b_pow = CMatrix::identity(dm, dm);
    for _ in 0..n {
        b_pow = &b_pow * &b;
    }
    let pref = eta.powi(n as i32) * (-0.5 * x).exp();
    Ok(if order >= 0 {
        f * b_pow * C64::new(pref, 0.0)
    } else {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        b_pow.adjoint() * f * C64::new(sign * pref, 0.0)
    })
}

/// Rotating-wave sideband interaction for the resonance `Delta = n omega_m`:
///
/// `i xi eta^n e^{-eta^2/2} [F(N) b^n a^dagger - a (b^dagger)^n F(N)]`,
/// `F(N) = N!/(N+n)! L_N^{(n)}(eta^2)`, for `n >= 0`. Negative orders give
/// the blue sideband, where a photon is created together with `|n|`
/// phonons. The caller is responsible for the resonance condition.
pub fn rwa_sideband_hamiltonian(order: i64, p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    let dm = tr.dim_mirror();
    let n = order.unsigned_abs() as usize;
    if n >= dm {
        return Err(Error::DegenerateTruncation { order, dim_mirror: dm, min_dim_exclusive: n });
    }
    let a = sideband_mirror_operator(order, p.eta(), dm)?;
    let mut m = CMatrix::zeros(tr.joint_dim(), tr.joint_dim());
    add_drive(&mut m, tr, p.xi, &a);
    finish(m, tr)
}

/// `e^{-eta^2/2} L_j(eta^2)`, the drive weight of phonon level `j`.
pub fn phonon_weight(j: usize, eta: f64) -> f64 {
    let x = eta * eta;
    (-0.5 * x).exp() * laguerre(j, 0, x).expect("x >= 0")
}

/// The ion-laser drive with every element removed whose free energy
/// difference `Delta (k - k') + omega_m (j - j')` does not vanish at
/// `Delta = order omega_m`. This is what the rotating-wave approximation
/// keeps, computed without any resummation.
pub fn stationary_drive_projection(order: i64, p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    let drive = ion_laser_hamiltonian(p, tr)?.operator.into_matrix()
        - ion_laser_hamiltonian(&p.with_xi(0.0)?, tr)?.operator.into_matrix();
    let dm = tr.dim_mirror();
    let m = CMatrix::from_fn(drive.nrows(), drive.ncols(), |r, c| {
        let (k1, j1, k2, j2) = ((r / dm) as i64, (r % dm) as i64, (c / dm) as i64, (c % dm) as i64);
        if order * (k1 - k2) + (j1 - j2) == 0 {
            drive[(r, c)]
        } else {
            ZERO
        }
    });
    finish(m, tr)
}

/// Resonant (`n = 0`) interaction `i xi e^{-eta^2/2} L_N(eta^2) (a^dagger - a)`.
pub fn resonant_interaction(p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    let dm = tr.dim_mirror();
    let weights = CMatrix::from_fn(dm, dm, |r, c| if r == c { C64::new(phonon_weight(r, p.eta()), 0.0) } else { ZERO });
    let mut m = CMatrix::zeros(tr.joint_dim(), tr.joint_dim());
    add_drive(&mut m, tr, p.xi, &weights);
    finish(m, tr)
}

/// Weak-coupling limit `Delta a^dagger a + omega_m b^dagger b + xi eta (a^dagger + a)(b + b^dagger)`.
///
/// The constant energy offset of the frame change is left out.
pub fn coupled_oscillator_hamiltonian(p: &SystemParams, tr: &TruncationSpec) -> Result<ModeOperator> {
    if p.detuning == 0.0 {
        return Err(Error::ResonantDivergence);
    }
    let g = p.xi * p.eta();
    let mut m = mirror_blocks(tr, |k, j| p.detuning * k + p.omega_m * j, |_| 0.0);
    let (dc, dm) = (tr.dim_cavity(), tr.dim_mirror());
    for k in 0..dc - 1 {
        for j in 0..dm {
            let ak = sqrt(k + 1);
            // (a + a^dagger) moves k <-> k+1, (b + b^dagger) moves j <-> j+-1.
            if j + 1 < dm {
                let v = C64::new(g * ak * sqrt(j + 1), 0.0);
                for (r, c) in [(tr.index(k + 1, j + 1), tr.index(k, j)), (tr.index(k + 1, j), tr.index(k, j + 1))] {
                    m[(r, c)] += v;
                    m[(c, r)] += v;
                }
            }
        }
    }
    finish(m, tr)
}

/// One eigenpair of a joint Hamiltonian with its number-basis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub energy: f64,
    /// `<a^dagger a>`.
    pub photons: f64,
    /// `<b^dagger b>`.
    pub phonons: f64,
    /// Rounded photon number and rank among the levels sharing it.
    pub photon_block: usize,
    pub rank_in_block: usize,
    /// Largest population in the top level of either mode.
    pub edge_population: f64,
}

impl Level {
    pub fn is_interior(&self, interior_tol: f64) -> bool {
        self.edge_population <= interior_tol
    }
}

/// Default bound on the edge population of an interior eigenvector. The
/// eigenvalue error is at most the edge amplitude times the coupling to the
/// first discarded level, so `1e-20` keeps it far below `1e-8` for the
/// couplings used here.
pub const INTERIOR_TOL: f64 = 1e-20;

/// Full labelled spectrum, sorted by energy.
pub fn labelled_spectrum(h: &ModeOperator, tr: &TruncationSpec) -> Result<Vec<Level>> {
    if h.space() != tr.joint_space() {
        return Err(Error::SpaceMismatch { expected: crate::error::SpaceLabel::Joint, found: h.space().label() });
    }
    let (dc, dm) = (tr.dim_cavity(), tr.dim_mirror());
    let pairs = eigen_blocks(h.matrix())?;
    let mut levels: Vec<Level> = pairs
        .iter()
        .map(|pair| {
            let (mut photons, mut phonons, mut top_c, mut top_m) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..dc {
                for j in 0..dm {
                    let w = pair.vector[tr.index(k, j)].norm_sqr();
                    photons += k as f64 * w;
                    phonons += j as f64 * w;
                    if k + 1 == dc {
                        top_c += w;
                    }
                    if j + 1 == dm {
                        top_m += w;
                    }
                }
            }
            Level {
                energy: pair.value,
                photons,
                phonons,
                photon_block: libm::round(photons) as usize,
                rank_in_block: 0,
                edge_population: f64::max(top_c, top_m),
            }
        })
        .collect();
    let mut seen = alloc::vec![0usize; dc];
    for level in levels.iter_mut() {
        let b = level.photon_block.min(dc - 1);
        level.rank_in_block = seen[b];
        seen[b] += 1;
    }
    Ok(levels)
}

/// Largest `|E - (Delta k + omega_m j)|` over the `count` lowest interior
/// levels, labelling each by photon block `k` and rank `j`. Returns the
/// deviation and the number of levels compared.
pub fn ladder_deviation(levels: &[Level], p: &SystemParams, count: usize, interior_tol: f64) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for level in levels.iter().filter(|l| l.is_interior(interior_tol)).take(count) {
        let ladder = p.detuning * level.photon_block as f64 + p.omega_m * level.rank_in_block as f64;
        worst = worst.max((level.energy - ladder).abs());
        used += 1;
    }
    (worst, used)
}
