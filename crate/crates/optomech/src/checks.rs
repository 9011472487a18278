//! Named numerical checks shared by `verify` and the acceptance suite.
//! Each check measures one quantity and compares it with a tolerance; a
//! check never aborts the suite.

use std::collections::HashMap;

use optomech_core::dynamics::{
    evolve_dressed_numeric, fidelity, from_coupled_frame, from_rotating_frame, generator_matrix, to_coupled_frame,
    to_rotating_frame, AnalyticEvolutionSpec, AnalyticState, Generator,
};
use optomech_core::fock::{BipartiteState, Displacer, Mode, Propagator, TruncationSpec};
use optomech_core::hamiltonians::{
    displaced_hamiltonian_with, full_hamiltonian, labelled_spectrum, ladder_deviation, polaron_conjugation_defect,
    resonant_blocks, rwa_sideband_hamiltonian, stationary_drive_projection, AssemblyFault, Level, PolaronTransform,
    SystemParams, INTERIOR_TOL,
};
use optomech_core::phase_space::{integrate_grid, GridGeometry, HusimiGrid, MixtureHusimi};
use optomech_core::specfun::displaced_fock_element;
use optomech_core::{CMatrix, Error, C64};
use serde::Serialize;

use crate::error::is_truncation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Numerical,
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    /// `None` when nothing could be measured.
    pub measured: Option<f64>,
    pub pass: bool,
    pub kind: CheckKind,
    pub message: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64, what: &str) -> Self {
        let pass = measured <= tolerance;
        let message = format!("{what} = {measured:.3e} ({} {tolerance:.1e})", if pass { "within" } else { "exceeds" });
        Check { name: name.into(), tolerance, measured: Some(measured).filter(|m| m.is_finite()), pass, kind: CheckKind::Numerical, message }
    }

    fn truncation(name: &str, tolerance: f64, measured: Option<f64>, message: String) -> Self {
        Check { name: name.into(), tolerance, measured, pass: false, kind: CheckKind::Truncation, message }
    }

    fn from_error(name: &str, tolerance: f64, err: Error) -> Self {
        let kind = if is_truncation(&err) { CheckKind::Truncation } else { CheckKind::Numerical };
        Check { name: name.into(), tolerance, measured: None, pass: false, kind, message: err.to_string() }
    }

    fn with_note(mut self, note: &str) -> Self {
        self.message = format!("{}; {note}", self.message);
        self
    }
}

fn run(name: &str, tolerance: f64, f: impl FnOnce() -> Result<Check, Error>) -> Check {
    f().unwrap_or_else(|e| Check::from_error(name, tolerance, e))
}

fn matched(p: &SystemParams) -> Result<SystemParams, Error> {
    p.with_chi(p.matched_chi())
}

/// Interior levels of the undriven matched Hamiltonian against
/// `Delta k + omega_m j`.
pub fn kerr_ladder(p: &SystemParams, tr: &TruncationSpec, levels: usize) -> Check {
    const TOL: f64 = 1e-8;
    run("kerr_ladder", TOL, || {
        let p = matched(&p.with_xi(0.0)?)?;
        let spectrum = labelled_spectrum(&full_hamiltonian(&p, tr)?, tr)?;
        let (dev, used) = ladder_deviation(&spectrum, &p, levels, INTERIOR_TOL);
        if used < levels {
            return Ok(Check::truncation(
                "kerr_ladder",
                TOL,
                (used > 0).then_some(dev),
                format!(
                    "only {used} of {levels} levels are interior at {}x{}; increase both dimensions (e.g. {}x{})",
                    tr.dim_cavity(),
                    tr.dim_mirror(),
                    tr.dim_cavity() * 3 / 2 + 8,
                    tr.dim_mirror() * 3 / 2 + 8
                ),
            ));
        }
        Ok(Check::at_most("kerr_ladder", dev, TOL, &format!("max ladder deviation over {used} levels")))
    })
}

fn by_label(levels: &[Level]) -> HashMap<(usize, usize), &Level> {
    levels.iter().map(|l| ((l.photon_block, l.rank_in_block), l)).collect()
}

/// The displaced Hamiltonian has the same undriven spectrum as the full
/// one. Levels are paired by photon block and rank, over the lowest
/// `levels` interior levels of the full Hamiltonian.
pub fn spectrum_preservation(p: &SystemParams, tr: &TruncationSpec, levels: usize, fault: AssemblyFault) -> Check {
    const TOL: f64 = 1e-8;
    const NAME: &str = "spectrum_preservation";
    run(NAME, TOL, || {
        let p = p.with_xi(0.0)?;
        let full = labelled_spectrum(&full_hamiltonian(&p, tr)?, tr)?;
        let displaced = labelled_spectrum(&displaced_hamiltonian_with(&p, p.eta(), tr, fault)?, tr)?;
        let displaced = by_label(&displaced);
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for level in full.iter().filter(|l| l.is_interior(INTERIOR_TOL)).take(levels) {
            if let Some(other) = displaced.get(&(level.photon_block, level.rank_in_block)) {
                worst = worst.max((level.energy - other.energy).abs());
                used += 1;
            }
        }
        if used == 0 {
            return Ok(Check::truncation(
                NAME,
                TOL,
                None,
                format!("no interior levels at {}x{}; increase both dimensions", tr.dim_cavity(), tr.dim_mirror()),
            ));
        }
        Ok(Check::at_most(NAME, worst, TOL, &format!("max level difference over {used} paired levels")))
    })
}

/// `U^dagger H U` against the displaced Hamiltonian on the interior block.
pub fn polaron_conjugation(p: &SystemParams, eta: f64, tr: &TruncationSpec, fault: AssemblyFault) -> Check {
    const TOL: f64 = 1e-9;
    let name = format!("polaron_conjugation_eta_{eta}");
    run(&name, TOL, || {
        let (defect, interior) = polaron_conjugation_defect(p, eta, tr, fault)?;
        if interior == 0 {
            return Ok(Check::truncation(
                &name,
                TOL,
                None,
                format!("no interior states for eta = {eta} at mirror dimension {}; increase it", tr.dim_mirror()),
            ));
        }
        Ok(Check::at_most(&name, defect, TOL, &format!("max element defect over {interior} interior states")))
    })
}

/// Closed-form displaced Fock elements against exact exponentiation of the
/// truncated generator in a much larger space.
pub fn displaced_fock_elements(max_index: usize, amplitudes: &[C64]) -> Check {
    const TOL: f64 = 1e-10;
    run("displaced_fock_elements", TOL, || {
        let largest = amplitudes.iter().map(|f| f.norm()).fold(0.0, f64::max);
        let dim = 4 * (max_index + 1) + optomech_core::dynamics::poisson_cutoff(largest) + 40;
        let disp = Displacer::new(dim)?;
        let mut worst: f64 = 0.0;
        for &f in amplitudes {
            let m = disp.matrix(f);
            for n in 0..=max_index {
                for k in 0..=max_index {
                    worst = worst.max((displaced_fock_element(n, k, f) - m[(n, k)]).norm());
                }
            }
        }
        Ok(Check::at_most("displaced_fock_elements", worst, TOL, &format!("max error for n, k <= {max_index}")))
    })
}

/// Sideband Hamiltonians against the stationary part of the ion-laser
/// drive at `Delta = order omega_m`.
pub fn rwa_resummation(p: &SystemParams, tr: &TruncationSpec, orders: &[i64]) -> Check {
    const TOL: f64 = 1e-12;
    run("rwa_resummation", TOL, || {
        let xi = if p.xi() > 0.0 { p.xi() } else { 0.1 };
        let mut worst: f64 = 0.0;
        for &order in orders {
            let q = matched(&p.with_detuning(order as f64 * p.omega_m())?.with_xi(xi)?)?;
            let h = rwa_sideband_hamiltonian(order, &q, tr)?;
            let projected = stationary_drive_projection(order, &q, tr)?;
            worst = worst.max((h.matrix() - projected.matrix()).camax());
        }
        Ok(Check::at_most("rwa_resummation", worst, TOL, &format!("max element difference over orders {orders:?}")))
    })
}

fn spec_for(p: &SystemParams, alpha: C64, gamma: C64, scaled_time: f64) -> Result<AnalyticEvolutionSpec, Error> {
    AnalyticEvolutionSpec::new(alpha, gamma, scaled_time, matched(&p.with_detuning(0.0)?)?)
}

/// Closed form against polaron dressing of the numerically exponentiated
/// resonant interaction on `tr`, as an infidelity.
pub fn analytic_vs_numeric(spec: &AnalyticEvolutionSpec, tr: &TruncationSpec, tol: f64) -> Check {
    let name = format!("analytic_vs_numeric_eta_{}_xit_{}", spec.eta(), spec.scaled_time);
    run(&name, tol, || {
        let analytic = AnalyticState::compute(spec)?.state(tr)?;
        let numeric = evolve_dressed_numeric(spec, tr)?;
        let infidelity = 1.0 - fidelity(&analytic, &numeric)?;
        Ok(Check::at_most(&name, infidelity, tol, "infidelity"))
    })
}

/// Same as [`analytic_vs_numeric`] on a truncation chosen from the
/// closed-form state itself.
pub fn analytic_vs_numeric_adequate(spec: &AnalyticEvolutionSpec, tol: f64) -> Check {
    let name = format!("analytic_vs_numeric_eta_{}_xit_{}", spec.eta(), spec.scaled_time);
    run(&name, tol, || {
        let tr = AnalyticState::compute(spec)?.adequate_truncation(1e-13, 8)?;
        Ok(analytic_vs_numeric(spec, &tr, tol).with_note(&format!("dims {}x{}", tr.dim_cavity(), tr.dim_mirror())))
    })
}

/// Closed form against numeric propagation of the ion-laser Hamiltonian
/// (no rotating-wave approximation), compared in the rotating frame.
pub fn rwa_validity(spec: &AnalyticEvolutionSpec, tol: f64) -> Check {
    let name = format!("rwa_validity_alpha_{}_gamma_{}_eta_{}", spec.alpha.norm(), spec.gamma.norm(), spec.eta());
    run(&name, tol, || {
        let p = spec.params;
        if p.xi() <= 0.0 {
            return Err(Error::InvalidParameter { name: "xi", value: p.xi(), reason: "must be positive to define the time" });
        }
        let state = AnalyticState::compute(spec)?;
        let tr = state.adequate_truncation(1e-6, 2)?;
        let analytic = state.state(&tr)?;
        let t = spec.scaled_time / p.xi();
        let psi0 = BipartiteState::coherent_product(spec.alpha, spec.gamma, tr)?;
        let polaron = PolaronTransform::new(p.eta(), tr.dim_mirror())?;
        let h = generator_matrix(&p, &tr, Generator::IonLaser)?;
        let inner = BipartiteState::new(Propagator::new(h.matrix())?.apply(t, polaron.undress(&psi0)?.amplitudes()), tr)?;
        inner.check_truncation()?;
        let rotating = to_rotating_frame(&polaron.dress(&inner)?, t, &p)?;
        let infidelity = 1.0 - fidelity(&analytic, &rotating)?;
        Ok(Check::at_most(&name, infidelity, tol, &format!("infidelity at dims {}x{}", tr.dim_cavity(), tr.dim_mirror())))
    })
}

/// Worst fidelity between ion-laser and coupled-oscillator evolutions of
/// `psi0` at `samples + 1` evenly spaced scaled times in `[0, max_scaled_time]`.
pub fn weak_coupling(p: &SystemParams, psi0: &BipartiteState, max_scaled_time: f64, samples: usize, tol: f64) -> Check {
    const NAME: &str = "weak_coupling";
    run(NAME, tol, || {
        let tr = *psi0.truncation();
        let ion = Propagator::new(generator_matrix(p, &tr, Generator::IonLaser)?.matrix())?;
        let coupled = Propagator::new(generator_matrix(p, &tr, Generator::Coupled)?.matrix())?;
        let start = to_coupled_frame(psi0, p)?;
        let mut worst: f64 = 1.0;
        for i in 0..=samples {
            let t = max_scaled_time / p.xi() * i as f64 / samples.max(1) as f64;
            let a = BipartiteState::new(ion.apply(t, psi0.amplitudes()), tr)?;
            let b = from_coupled_frame(&BipartiteState::new(coupled.apply(t, start.amplitudes()), tr)?, p)?;
            a.check_truncation()?;
            b.check_truncation()?;
            worst = worst.min(fidelity(&a, &b)?);
        }
        Ok(Check::at_most(NAME, 1.0 - worst, tol, &format!("worst infidelity over {} times", samples + 1)))
    })
}

fn max_unitarity_defect(blocks: &[CMatrix]) -> f64 {
    blocks
        .iter()
        .map(|b| (b.ad_mul(b) - CMatrix::identity(b.nrows(), b.ncols())).camax())
        .fold(0.0, f64::max)
}

/// Block propagators of the resonant interaction are unitary.
pub fn unitarity(p: &SystemParams, tr: &TruncationSpec, scaled_time: f64) -> Check {
    const TOL: f64 = 1e-10;
    run("unitarity", TOL, || {
        let u = resonant_blocks(&matched(&p.with_xi(1.0)?)?, tr)?.evolution(scaled_time)?;
        Ok(Check::at_most("unitarity", max_unitarity_defect(u.blocks()), TOL, "max |U^dagger U - 1|"))
    })
}

/// Norm and phonon populations are conserved by the resonant interaction
/// in the polaron frame.
pub fn conservation(p: &SystemParams, tr: &TruncationSpec, alpha: C64, gamma: C64, scaled_time: f64) -> Vec<Check> {
    const TOL: f64 = 1e-12;
    let evolved = (|| {
        let polaron = PolaronTransform::new(p.eta(), tr.dim_mirror())?;
        let start = polaron.undress(&BipartiteState::coherent_product(alpha, gamma, *tr)?)?;
        let end = resonant_blocks(&matched(&p.with_xi(1.0)?)?, tr)?.evolution(scaled_time)?.apply(&start)?;
        Ok::<_, Error>((start, end))
    })();
    match evolved {
        Err(e) => vec![Check::from_error("norm_conservation", TOL, e.clone()), Check::from_error("phonon_conservation", TOL, e)],
        Ok((start, end)) => {
            let norm = (end.norm() - start.norm()).abs();
            let phonons = start
                .populations(Mode::Mirror)
                .iter()
                .zip(end.populations(Mode::Mirror))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            vec![
                Check::at_most("norm_conservation", norm, TOL, "norm change"),
                Check::at_most("phonon_conservation", phonons, TOL, "max phonon population change"),
            ]
        }
    }
}

/// Round trips through the rotating and coupled frames are the identity.
pub fn frame_consistency(p: &SystemParams, tr: &TruncationSpec, alpha: C64, gamma: C64, t: f64) -> Check {
    const TOL: f64 = 1e-12;
    run("frame_consistency", TOL, || {
        let psi = BipartiteState::coherent_product(alpha, gamma, *tr)?;
        let back = from_rotating_frame(&to_rotating_frame(&psi, t, p)?, t, p)?;
        let mut worst = (back.amplitudes() - psi.amplitudes()).camax();
        let mut note = "rotating frame";
        if p.detuning() != 0.0 {
            let back = from_coupled_frame(&to_coupled_frame(&psi, p)?, p)?;
            worst = worst.max((back.amplitudes() - psi.amplitudes()).camax());
            note = "rotating and coupled frames";
        }
        Ok(Check::at_most("frame_consistency", worst, TOL, &format!("max round-trip error ({note})")))
    })
}

/// The initial product state fits the truncation.
pub fn initial_state_truncation(tr: &TruncationSpec, alpha: C64, gamma: C64) -> Check {
    let tol = tr.tail_tol();
    run("initial_state_truncation", tol, || {
        let psi = BipartiteState::coherent_product(alpha, gamma, *tr)?;
        psi.check_truncation()?;
        let edge = psi.edge_population(Mode::Cavity).max(psi.edge_population(Mode::Mirror));
        Ok(Check::at_most("initial_state_truncation", edge, tol, "largest edge population"))
    })
}

/// The initial state seen from the polaron frame fits the truncation.
pub fn polaron_truncation(p: &SystemParams, tr: &TruncationSpec, alpha: C64, gamma: C64) -> Check {
    let tol = tr.tail_tol();
    run("polaron_truncation", tol, || {
        let polaron = PolaronTransform::new(p.eta(), tr.dim_mirror())?;
        let psi = polaron.undress(&BipartiteState::coherent_product(alpha, gamma, *tr)?)?;
        psi.check_truncation()?;
        let edge = psi.edge_population(Mode::Mirror);
        Ok(Check::at_most("polaron_truncation", edge, tol, "mirror edge population in the polaron frame"))
    })
}

/// Pointwise closed form against the reduced-density oracle, and the grid
/// integral, for one mode.
pub fn husimi_agreement(state: &AnalyticState, geometry: GridGeometry, mode: Mode, closed: &HusimiGrid) -> Vec<Check> {
    const TOL: f64 = 1e-8;
    const INTEGRAL_TOL: f64 = 5e-3;
    let tag = match mode {
        Mode::Cavity => "cavity",
        Mode::Mirror => "mirror",
    };
    let eta = state.spec().eta();
    let oracle_name = format!("husimi_oracle_{tag}_eta_{eta}");
    let integral_name = format!("husimi_integral_{tag}_eta_{eta}");
    let oracle = run(&oracle_name, TOL, || {
        let grid = HusimiGrid::evaluate(geometry, &MixtureHusimi::reduced(state, mode)?);
        Ok(Check::at_most(&oracle_name, closed.max_abs_diff(&grid)?, TOL, "max pointwise difference"))
    });
    let integral = run(&integral_name, INTEGRAL_TOL, || {
        let i = integrate_grid(closed)?;
        Ok(Check::at_most(&integral_name, (i - 1.0).abs(), INTEGRAL_TOL, &format!("integral {i:.9}, deviation from 1")))
    });
    vec![oracle, integral]
}

/// Small closed-form Husimi grids of both modes against their oracles.
pub fn husimi_small(spec: &AnalyticEvolutionSpec, points: usize) -> Vec<Check> {
    let setup = (|| {
        let state = AnalyticState::compute(spec)?;
        let geo = |mode| crate::commands::husimi::geometry(spec, mode, points, None, None);
        let mirror = geo(Mode::Mirror)?;
        let cavity = geo(Mode::Cavity)?;
        Ok::<_, Error>((state, mirror, cavity))
    })();
    let (state, mirror, cavity) = match setup {
        Ok(s) => s,
        Err(e) => return vec![Check::from_error("husimi_setup", 0.0, e)],
    };
    let mut out = Vec::new();
    for (mode, geometry) in [(Mode::Mirror, mirror), (Mode::Cavity, cavity)] {
        let closed = match mode {
            Mode::Mirror => optomech_core::phase_space::husimi_mechanical_analytic(&state, geometry),
            Mode::Cavity => optomech_core::phase_space::husimi_cavity_analytic(&state, geometry),
        };
        match closed {
            Ok(grid) => out.extend(husimi_agreement(&state, geometry, mode, &grid)),
            Err(e) => out.push(Check::from_error("husimi_closed_form", 1e-8, e)),
        }
    }
    out
}

/// Truncation for the polaron conjugation check: four photon blocks and a
/// mirror dimension that keeps `|k, j>` interior for `k <= 3, j <= 2`.
/// The check tests operator assembly, so it does not inherit a mirror
/// cutoff too small to expose a wrong coupling.
pub fn conjugation_truncation(eta: f64, tr: &TruncationSpec) -> TruncationSpec {
    let r = 3.0 * eta.abs() + 3.0;
    let dm = ((r * r + 8.0 * r + 10.0).floor() as usize + 1).max(tr.dim_mirror());
    TruncationSpec::with_tail_tol(4, dm, tr.tail_tol()).unwrap_or(*tr)
}

/// Options of the full verification suite.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub alpha: C64,
    pub gamma: C64,
    pub scaled_time: f64,
    pub levels: usize,
    pub fault: AssemblyFault,
}

/// Every check, in a fixed order.
pub fn suite(p: &SystemParams, tr: &TruncationSpec, o: &SuiteOptions) -> Vec<Check> {
    let mut checks = vec![
        initial_state_truncation(tr, o.alpha, o.gamma),
        polaron_truncation(p, tr, o.alpha, o.gamma),
        kerr_ladder(p, tr, o.levels),
        spectrum_preservation(p, tr, o.levels, o.fault),
        polaron_conjugation(p, p.eta(), &conjugation_truncation(p.eta(), tr), o.fault),
        displaced_fock_elements(20, &[C64::new(0.3, 0.0), C64::new(0.0, 0.8), C64::new(1.5, 0.0)]),
        rwa_resummation(p, tr, &[0, 1, 2, -1]),
        unitarity(p, tr, o.scaled_time),
    ];
    checks.extend(conservation(p, tr, o.alpha, o.gamma, o.scaled_time));
    checks.push(frame_consistency(p, tr, o.alpha, o.gamma, 1.3));
    match spec_for(p, o.alpha, o.gamma, o.scaled_time) {
        Ok(spec) => {
            checks.push(analytic_vs_numeric(&spec, tr, 1e-8));
            checks.extend(husimi_small(&spec, 61));
        }
        Err(e) => checks.push(Check::from_error("analytic_setup", 0.0, e)),
    }
    checks
}
