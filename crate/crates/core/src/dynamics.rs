//! Time evolution: the closed-form coherent-state solution on resonance and
//! the numeric propagation paths that check it.
//!
//! With the Kerr term matched and `Delta = 0`, the rotating-wave interaction
//! `i xi e^{-eta^2/2} L_N(eta^2) (a^dagger - a)` displaces the cavity by
//! `f_j = xi t e^{-eta^2/2} L_j(eta^2)` when the mirror holds `j` phonons.
//! Starting from `|alpha>|Gamma>`, the state in the rotating frame is
//!
//! `sum_{k,j} c_k <j|Gamma_k> D_b(eta N) D_a(f_j) |k, j>`
//!
//! with `c_k = e^{-|alpha|^2/2} alpha_t^k / sqrt(k!)`,
//! `alpha_t = alpha e^{eta (Gamma - Gamma^*)/2}` and `Gamma_k = Gamma - eta k`.
//! Writing `phi_n[j]` for the amplitude of `|n, j>` before the final mirror
//! displacement and `psi_n = D_b(eta n) phi_n`, the joint state is
//! `sum_n |n> psi_n`.


use alloc::vec::Vec;
use core::cell::OnceCell;
use core::ops::Range;

use crate::fock::{propagate_numeric, BipartiteState, Displacer, Mode, ModeOperator, TruncationSpec};
use crate::hamiltonians::{
    coupled_oscillator_hamiltonian, full_hamiltonian, ion_laser_hamiltonian, phonon_weight, resonant_blocks,
    rwa_sideband_hamiltonian, PolaronTransform, SystemParams,
};
use crate::specfun::{coherent_amplitude, displacement_block};
use crate::{CMatrix, CVector, Error, Result, C64, ZERO};

/// Largest admissible `1 - |psi|^2` before renormalization.
pub const NORM_DEFICIT_LIMIT: f64 = 1e-6;

/// `f_j = (xi t) e^{-eta^2/2} L_j(eta^2)`.
pub fn effective_amplitude(j: usize, scaled_time: f64, eta: f64) -> f64 {
    scaled_time * phonon_weight(j, eta)
}

/// Number of Fock levels that hold a coherent state of modulus `r`:
/// everything up to `r^2 + 8 r + 10`.
pub fn poisson_cutoff(r: f64) -> usize {
    libm::floor(r * r + 8.0 * r + 10.0) as usize + 1
}

/// Summation ranges (exclusive upper bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumCutoffs {
    /// Initial photon number `k`.
    pub photon_in: usize,
    /// Phonon number `j` in the polaron frame.
    pub phonon: usize,
    /// Final photon number `n`.
    pub photon_out: usize,
}

impl SumCutoffs {
    pub fn scaled(&self, factor: f64) -> SumCutoffs {
        let s = |v: usize| libm::ceil(v as f64 * factor) as usize;
        SumCutoffs { photon_in: s(self.photon_in), phonon: s(self.phonon), photon_out: s(self.photon_out) }
    }
}

/// Inputs of the closed-form evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEvolutionSpec {
    pub alpha: C64,
    pub gamma: C64,
    /// `xi t`.
    pub scaled_time: f64,
    pub params: SystemParams,
    pub cutoffs: SumCutoffs,
}

impl AnalyticEvolutionSpec {
    /// Evolution spec with the default cutoffs: `k <= |alpha|^2 + 8|alpha| + 10`,
    /// `j` up to the same bound for the largest `|Gamma_k|`, and the final
    /// photon number up to the bound for `|alpha| + max_j |f_j|`.
    pub fn new(alpha: C64, gamma: C64, scaled_time: f64, params: SystemParams) -> Result<Self> {
        if !(scaled_time.is_finite() && scaled_time >= 0.0) {
            return Err(Error::InvalidParameter { name: "scaled_time", value: scaled_time, reason: "must be finite and non-negative" });
        }
        for (name, v) in [("alpha", alpha), ("gamma", gamma)] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v.norm(), reason: "must be finite" });
            }
        }
        let eta = params.eta();
        let photon_in = poisson_cutoff(alpha.norm());
        let phonon = (0..photon_in).map(|k| poisson_cutoff((gamma - eta * k as f64).norm())).max().unwrap_or(1);
        let f_max = (0..phonon).map(|j| effective_amplitude(j, scaled_time, eta).abs()).fold(0.0, f64::max);
        let photon_out = poisson_cutoff(alpha.norm() + f_max);
        let cutoffs = SumCutoffs { photon_in, phonon, photon_out };
        Ok(Self { alpha, gamma, scaled_time, params, cutoffs })
    }

    pub fn with_cutoffs(mut self, cutoffs: SumCutoffs) -> Self {
        self.cutoffs = cutoffs;
        self
    }

    pub fn eta(&self) -> f64 {
        self.params.eta()
    }

    /// `alpha e^{eta (Gamma - Gamma^*)/2}`.
    pub fn alpha_tilde(&self) -> C64 {
        self.alpha * (self.gamma - self.gamma.conj()).scale(0.5 * self.eta()).exp()
    }

    /// `Gamma - eta k`.
    pub fn gamma_tilde(&self, k: usize) -> C64 {
        self.gamma - self.eta() * k as f64
    }

    pub fn effective_amplitude(&self, j: usize) -> f64 {
        effective_amplitude(j, self.scaled_time, self.eta())
    }
}

/// Closed-form state stored as the undisplaced rows `phi_n`.
///
/// The mirror part of row `n` is only displaced by `eta n` on demand, so
/// no phonon range has to be fixed in advance for the output.
#[derive(Debug, Clone)]
pub struct AnalyticState {
    spec: AnalyticEvolutionSpec,
    /// `phi[(n, j)]`.
    phi: CMatrix,
    /// Per row, the phonon range holding non-negligible weight.
    support: Vec<Range<usize>>,
    dressed: OnceCell<CMatrix>,
}

/// Norm that [`AnalyticState::dressed_rows`] may cut off.
pub const DRESSED_ROW_TOL: f64 = 1e-14;

/// Largest entry allowed in the last quarter of a dressed row.
const DRESSED_TAIL: f64 = 1e-15;

/// Upper bound on the phonon range searched by `dressed_rows`.
const MAX_PHONON_COLUMNS: usize = 1 << 15;

/// Relative size below which `phi_n[j]` is treated as zero.
const SUPPORT_CUT: f64 = 1e-16;

impl AnalyticState {
    pub fn compute(spec: &AnalyticEvolutionSpec) -> Result<Self> {
        let SumCutoffs { photon_in, phonon, photon_out } = spec.cutoffs;
        for (name, v) in [("photon_in", photon_in), ("phonon", phonon), ("photon_out", photon_out)] {
            if v == 0 {
                return Err(Error::InvalidParameter { name, value: 0.0, reason: "cutoffs must be positive" });
            }
        }
        let alpha_t = spec.alpha_tilde();
        let c: Vec<C64> = (0..photon_in).map(|k| coherent_amplitude(alpha_t, k)).collect();
        let overlaps = CMatrix::from_fn(photon_in, phonon, |k, j| c[k] * coherent_amplitude(spec.gamma_tilde(k), j));

        let mut phi = CMatrix::zeros(photon_out, phonon);
        for j in 0..phonon {
            let d = displacement_block(C64::new(spec.effective_amplitude(j), 0.0), photon_out, photon_in);
            for n in 0..photon_out {
                let mut acc = ZERO;
                for k in 0..photon_in {
                    acc += d[(n, k)] * overlaps[(k, j)];
                }
                phi[(n, j)] = acc;
            }
        }
        let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let support = (0..photon_out)
            .map(|n| {
                let big = |j: &usize| phi[(n, *j)].norm() > SUPPORT_CUT * scale;
                match (0..phonon).find(big) {
                    Some(lo) => lo..(0..phonon).rev().find(big).unwrap_or(lo) + 1,
                    None => 0..0,
                }
            })
            .collect();
        Ok(Self { spec: *spec, phi, support, dressed: OnceCell::new() })
    }

    pub fn spec(&self) -> &AnalyticEvolutionSpec {
        &self.spec
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    /// Phonon range of row `n` outside which `phi_n` is negligible.
    pub fn support(&self, n: usize) -> Range<usize> {
        self.support[n].clone()
    }

    /// `1 - sum |phi_n[j]|^2`: the weight lost to the summation cutoffs.
    pub fn sum_deficit(&self) -> f64 {
        1.0 - self.phi.norm_squared()
    }

    fn check_cutoffs(&self) -> Result<()> {
        let deficit = self.sum_deficit();
        if deficit > NORM_DEFICIT_LIMIT {
            let bigger = self.spec.cutoffs.scaled(1.5);
            return Err(Error::CutoffInsufficient {
                deficit,
                threshold: NORM_DEFICIT_LIMIT,
                suggested_photon: bigger.photon_in,
                suggested_phonon: bigger.phonon,
            });
        }
        Ok(())
    }

    /// `(D_b(eta n) phi_n)[l]` for `l < cols`.
    fn dressed_row(&self, n: usize, cols: usize) -> CVector {
        let support = self.support[n].clone();
        let mut out = CVector::zeros(cols);
        if support.is_empty() {
            return out;
        }
        let d = displacement_block(C64::new(self.spec.eta() * n as f64, 0.0), cols, support.end);
        for l in 0..cols {
            let mut acc = ZERO;
            for j in support.clone() {
                acc += d[(l, j)] * self.phi[(n, j)];
            }
            out[l] = acc;
        }
        out
    }

    /// `psi[(n, l)] = (D_b(eta n) phi_n)[l]` for `n < rows`, `l < cols`.
    pub fn psi(&self, rows: usize, cols: usize) -> CMatrix {
        let mut psi = CMatrix::zeros(rows, cols);
        for n in 0..rows.min(self.phi.nrows()) {
            psi.set_row(n, &self.dressed_row(n, cols).transpose());
        }
        psi
    }

    /// All dressed rows, each extended until at most
    /// [`DRESSED_ROW_TOL`] of the norm is cut off in total and its last
    /// entries have decayed. Computed once.
    pub fn dressed_rows(&self) -> Result<&CMatrix> {
        if let Some(psi) = self.dressed.get() {
            return Ok(psi);
        }
        self.check_cutoffs()?;
        let rows = self.phi.nrows();
        let per_row = DRESSED_ROW_TOL / rows as f64;
        let mut kept: Vec<CVector> = Vec::with_capacity(rows);
        for n in 0..rows {
            let weight = self.phi.row(n).norm_squared();
            let mut cols = self.support[n].end.clamp(16, 64);
            loop {
                let row = self.dressed_row(n, cols);
                let lost = weight - row.norm_squared();
                let tail = row.rows(cols - cols / 4, cols / 4).iter().fold(0.0f64, |m, v| m.max(v.norm()));
                if lost <= per_row.max(1e-12 * weight) && tail <= DRESSED_TAIL {
                    kept.push(row);
                    break;
                }
                if cols > MAX_PHONON_COLUMNS {
                    return Err(Error::TruncationInsufficient { mode: Mode::Mirror, population: lost, suggested_dim: cols });
                }
                cols += cols / 2;
            }
        }
        let cols = kept.iter().map(|r| r.len()).max().unwrap_or(1);
        let psi = CMatrix::from_fn(rows, cols, |n, l| kept[n].get(l).copied().unwrap_or(ZERO));
        Ok(self.dressed.get_or_init(|| psi))
    }

    /// Smallest truncation that holds all but `tail` of the final state
    /// and of the undressed initial state `sum_k c_k |k> |Gamma - eta k>`,
    /// plus `margin` levels per mode. Numeric propagation in the polaron
    /// frame passes through the latter.
    pub fn adequate_truncation(&self, tail: f64, margin: usize) -> Result<TruncationSpec> {
        let psi = self.dressed_rows()?;
        let cut = |profile: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = profile.collect();
            let mut acc = 0.0;
            for (i, p) in v.iter().enumerate().rev() {
                acc += p;
                if acc > tail {
                    return i + 1;
                }
            }
            1
        };
        let mut dc = cut(&mut (0..psi.nrows()).map(|n| psi.row(n).norm_squared()));
        let mut dm = cut(&mut (0..psi.ncols()).map(|l| psi.column(l).norm_squared()));
        let alpha_sq = self.spec.alpha.norm_sqr();
        let weights: Vec<f64> = (0..self.spec.cutoffs.photon_in).map(|k| coherent_amplitude(self.spec.alpha, k).norm_sqr()).collect();
        let photons = cut(&mut weights.iter().cloned());
        dc = dc.max(photons);
        for (k, &w) in weights.iter().enumerate().take(photons) {
            let g = self.spec.gamma_tilde(k);
            let amps: Vec<f64> = (0..poisson_cutoff(g.norm())).map(|j| coherent_amplitude(g, j).norm_sqr()).collect();
            if w > tail * 1e-3 || alpha_sq == 0.0 {
                dm = dm.max(cut(&mut amps.iter().map(|a| a * w)));
            }
        }
        TruncationSpec::with_tail_tol(dc + margin, dm + margin, tail.max(1e-12) * 1e3)
    }

    /// Joint state in the rotating frame on `tr`, renormalized.
    pub fn state(&self, tr: &TruncationSpec) -> Result<BipartiteState> {
        self.check_cutoffs()?;
        let psi = self.psi(tr.dim_cavity(), tr.dim_mirror());
        self.project(psi, tr)
    }

    /// The same state before the final `D_b(eta N)`: the polaron-frame
    /// interaction-picture state `sum c_k <j|Gamma_k> D_a(f_j) |k, j>`.
    pub fn polaron_frame_state(&self, tr: &TruncationSpec) -> Result<BipartiteState> {
        self.check_cutoffs()?;
        let phi = CMatrix::from_fn(tr.dim_cavity(), tr.dim_mirror(), |n, j| {
            if n < self.phi.nrows() && j < self.phi.ncols() {
                self.phi[(n, j)]
            } else {
                ZERO
            }
        });
        self.project(phi, tr)
    }

    fn project(&self, coeffs: CMatrix, tr: &TruncationSpec) -> Result<BipartiteState> {
        let total = self.phi.norm_squared();
        let lost = total - coeffs.norm_squared();
        if lost > NORM_DEFICIT_LIMIT {
            let lost_cavity: f64 = (tr.dim_cavity()..self.phi.nrows()).map(|n| self.phi.row(n).norm_squared()).sum();
            let (mode, suggested_dim) = if lost_cavity > 0.5 * lost {
                let profile: Vec<f64> = (0..self.phi.nrows()).map(|n| self.phi.row(n).norm_squared()).collect();
                (Mode::Cavity, adequate_dim(&profile))
            } else {
                let dim = tr.dim_mirror();
                (Mode::Mirror, dim + dim / 2 + 8)
            };
            return Err(Error::TruncationInsufficient { mode, population: lost, suggested_dim });
        }
        let state = BipartiteState::from_coefficients(&coeffs, *tr)?.normalized();
        state.check_truncation()?;
        Ok(state)
    }

    /// Reduced cavity density `rho[(n, m)] = <psi_m|psi_n>` on the output
    /// photon range, from `<phi_m| D_b(eta (n - m)) |phi_n>`.
    pub fn cavity_density(&self) -> Result<CMatrix> {
        self.check_cutoffs()?;
        let rows = self.phi.nrows();
        let eta = self.spec.eta();
        let mut rho = CMatrix::zeros(rows, rows);
        for d in 0..rows {
            let pairs: Vec<(usize, usize)> =
                (d..rows).map(|n| (n, n - d)).filter(|&(n, m)| !self.support[n].is_empty() && !self.support[m].is_empty()).collect();
            let (sr, sc) = pairs.iter().fold((0, 0), |(r, c), &(n, m)| (r.max(self.support[m].end), c.max(self.support[n].end)));
            if pairs.is_empty() {
                continue;
            }
            let block = displacement_block(C64::new(eta * d as f64, 0.0), sr, sc);
            for (n, m) in pairs {
                let (r, c) = (self.support[m].clone(), self.support[n].clone());
                let mut acc = ZERO;
                for i in r {
                    let mut row = ZERO;
                    for j in c.clone() {
                        row += block[(i, j)] * self.phi[(n, j)];
                    }
                    acc += self.phi[(m, i)].conj() * row;
                }
                if n == m {
                    acc = C64::new(acc.re, 0.0);
                }
                rho[(n, m)] = acc;
                rho[(m, n)] = acc.conj();
            }
        }
        Ok(rho)
    }
}

/// Smallest dimension that keeps all but `1e-3 NORM_DEFICIT_LIMIT` of the
/// given marginal.
fn adequate_dim(profile: &[f64]) -> usize {
    let mut tail = 0.0;
    for (i, p) in profile.iter().enumerate().rev() {
        tail += p;
        if tail > 1e-3 * NORM_DEFICIT_LIMIT {
            return (i + 2).max(2);
        }
    }
    2
}

/// Closed-form rotating-frame state on `tr`.
pub fn evolve_analytic(spec: &AnalyticEvolutionSpec, tr: &TruncationSpec) -> Result<BipartiteState> {
    AnalyticState::compute(spec)?.state(tr)
}

/// Generators available to [`evolve_full_numeric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// The optomechanical Hamiltonian with Kerr term.
    Full,
    /// The polaron-frame Hamiltonian with matched Kerr term.
    IonLaser,
    /// Rotating-wave sideband interaction of the given order.
    Sideband(i64),
    /// Weak-coupling limit of two position-coupled oscillators.
    Coupled,
}

pub fn generator_matrix(p: &SystemParams, tr: &TruncationSpec, which: Generator) -> Result<ModeOperator> {
    match which {
        Generator::Full => full_hamiltonian(p, tr),
        Generator::IonLaser => Ok(ion_laser_hamiltonian(p, tr)?.operator),
        Generator::Sideband(n) => rwa_sideband_hamiltonian(n, p, tr),
        Generator::Coupled => coupled_oscillator_hamiltonian(p, tr),
    }
}

/// `exp(-i H t) psi0` for the chosen generator, by dense spectral
/// decomposition.
pub fn evolve_full_numeric(p: &SystemParams, psi0: &BipartiteState, t: f64, which: Generator) -> Result<BipartiteState> {
    let h = generator_matrix(p, psi0.truncation(), which)?;
    propagate_numeric(&h, psi0, t)
}

/// Numeric counterpart of [`evolve_analytic`]: undress `|alpha, Gamma>`
/// with the polaron unitary, propagate every phonon block under the
/// resonant interaction by exact exponentiation, and dress again.
pub fn evolve_dressed_numeric(spec: &AnalyticEvolutionSpec, tr: &TruncationSpec) -> Result<BipartiteState> {
    let psi0 = BipartiteState::coherent_product(spec.alpha, spec.gamma, *tr)?;
    let polaron = PolaronTransform::new(spec.eta(), tr.dim_mirror())?;
    // Unit drive for a time xi t.
    let unit = spec.params.with_xi(1.0)?;
    let u = resonant_blocks(&unit, tr)?.evolution(spec.scaled_time)?;
    let out = polaron.dress(&u.apply(&polaron.undress(&psi0)?)?)?;
    out.check_truncation()?;
    Ok(out)
}

fn phase_rotate(psi: &BipartiteState, phase: impl Fn(f64, f64) -> f64) -> Result<BipartiteState> {
    let tr = *psi.truncation();
    let coeffs = psi.coefficients();
    let out = CMatrix::from_fn(tr.dim_cavity(), tr.dim_mirror(), |k, j| {
        coeffs[(k, j)] * C64::from_polar(1.0, phase(k as f64, j as f64))
    });
    BipartiteState::from_coefficients(&out, tr)
}

/// `exp(+i H_0 t) psi` where `H_0` is the undriven optomechanical
/// Hamiltonian. In the polaron frame `H_0` is diagonal,
/// `Delta n + (chi - g0^2/omega_m) n^2 + omega_m b^dagger b`.
pub fn to_rotating_frame(psi: &BipartiteState, t: f64, p: &SystemParams) -> Result<BipartiteState> {
    rotate_frame(psi, t, p)
}

/// Inverse of [`to_rotating_frame`].
pub fn from_rotating_frame(psi: &BipartiteState, t: f64, p: &SystemParams) -> Result<BipartiteState> {
    rotate_frame(psi, -t, p)
}

fn rotate_frame(psi: &BipartiteState, t: f64, p: &SystemParams) -> Result<BipartiteState> {
    let polaron = PolaronTransform::new(p.eta(), psi.truncation().dim_mirror())?;
    let kerr = p.chi() - p.matched_chi();
    let inner = polaron.undress(psi)?;
    let rotated = phase_rotate(&inner, |k, j| t * (p.detuning() * k + kerr * k * k + p.omega_m() * j))?;
    polaron.dress(&rotated)
}

/// Frame map `W = F D_a(i xi / Delta)` with `F = exp(i pi/2 b^dagger b)`
/// that turns the linearized polaron Hamiltonian into the coupled
/// oscillators.
pub fn to_coupled_frame(psi: &BipartiteState, p: &SystemParams) -> Result<BipartiteState> {
    let shifted = displace_cavity(psi, coupled_frame_shift(p)?)?;
    phase_rotate(&shifted, |_, j| core::f64::consts::FRAC_PI_2 * j)
}

/// `W^dagger psi`.
pub fn from_coupled_frame(psi: &BipartiteState, p: &SystemParams) -> Result<BipartiteState> {
    let unrotated = phase_rotate(psi, |_, j| -core::f64::consts::FRAC_PI_2 * j)?;
    displace_cavity(&unrotated, -coupled_frame_shift(p)?)
}

fn coupled_frame_shift(p: &SystemParams) -> Result<C64> {
    if p.detuning() == 0.0 {
        return Err(Error::ResonantDivergence);
    }
    Ok(C64::new(0.0, p.xi() / p.detuning()))
}

fn displace_cavity(psi: &BipartiteState, f: C64) -> Result<BipartiteState> {
    let tr = *psi.truncation();
    let disp = Displacer::new(tr.dim_cavity())?;
    let mut coeffs = psi.coefficients();
    for j in 0..tr.dim_mirror() {
        let col = coeffs.column(j).into_owned();
        coeffs.set_column(j, &disp.apply(f, &col));
    }
    BipartiteState::from_coefficients(&coeffs, tr)
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &BipartiteState, b: &BipartiteState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}
