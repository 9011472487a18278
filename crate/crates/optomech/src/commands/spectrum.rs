use optomech_core::hamiltonians::{
    coupled_oscillator_hamiltonian, displaced_hamiltonian, full_hamiltonian, ion_laser_hamiltonian, labelled_spectrum,
    rwa_sideband_hamiltonian, Level, SystemParams, Warning, INTERIOR_TOL,
};
use serde::Serialize;

use super::Header;
use crate::config::{HamiltonianKind, RunConfig};
use crate::error::CliError;
use crate::output::{num, Outcome, Table};

const LADDER_TOL: f64 = 1e-8;

#[derive(Serialize)]
struct BlockShift {
    photon_number: usize,
    measured: f64,
    predicted: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    hamiltonian: HamiltonianKind,
    order: i64,
    requested_levels: usize,
    interior_levels: usize,
    /// Against `Delta k + omega_m j` when the Kerr constant is matched and
    /// the drive is off.
    ladder_deviation: Option<f64>,
    /// Against the undriven per-block closed form.
    predicted_deviation: Option<f64>,
    /// Lowest level of each photon block minus `Delta k`.
    block_shifts: Vec<BlockShift>,
    warnings: Vec<String>,
}

fn describe(w: &Warning) -> String {
    match w {
        Warning::KerrUnmatched { chi, matched_chi } => {
            format!("ion-laser form requested with chi = {chi}, but it assumes the matched value {matched_chi}")
        }
        Warning::PolaronTruncation { photon_number, tail, suggested_dim_mirror } => format!(
            "mirror displacement of photon block {photon_number} leaks {tail:.3e} past the cutoff; use dim_mirror >= {suggested_dim_mirror}"
        ),
    }
}

/// Undriven energy of `|k, j>` in the frame of `kind`, when closed form.
fn predicted(kind: HamiltonianKind, p: &SystemParams, k: usize, j: usize) -> Option<f64> {
    if p.xi() != 0.0 {
        return None;
    }
    let (k, j) = (k as f64, j as f64);
    match kind {
        HamiltonianKind::Full | HamiltonianKind::Displaced => {
            Some(p.detuning() * k + (p.chi() - p.matched_chi()) * k * k + p.omega_m() * j)
        }
        HamiltonianKind::IonLaser => Some(p.detuning() * k + p.omega_m() * j),
        HamiltonianKind::Sideband | HamiltonianKind::Coupled => None,
    }
}

pub fn run(config: &RunConfig, verify: bool) -> Result<Outcome, CliError> {
    let c = config.spectrum.clone().unwrap_or_default();
    if c.levels == 0 {
        return Err(CliError::config("spectrum.levels: must be positive"));
    }
    if c.order != 0 && c.hamiltonian != HamiltonianKind::Sideband {
        return Err(CliError::config("spectrum.order: only used with hamiltonian = sideband"));
    }
    let p = config.params.build()?;
    let tr = config.truncation.build()?;
    let mut warnings = Vec::new();
    let h = match c.hamiltonian {
        HamiltonianKind::Full => full_hamiltonian(&p, &tr)?,
        HamiltonianKind::Displaced => displaced_hamiltonian(&p, &tr)?,
        HamiltonianKind::IonLaser => {
            let built = ion_laser_hamiltonian(&p, &tr)?;
            warnings.extend(built.warnings.iter().map(describe));
            built.operator
        }
        HamiltonianKind::Sideband => rwa_sideband_hamiltonian(c.order, &p, &tr)?,
        HamiltonianKind::Coupled => coupled_oscillator_hamiltonian(&p, &tr)?,
    };
    let levels = labelled_spectrum(&h, &tr)?;
    let interior: Vec<&Level> = levels.iter().filter(|l| l.is_interior(INTERIOR_TOL)).take(c.levels).collect();
    if interior.is_empty() {
        return Err(CliError::truncation(format!(
            "no interior eigenvectors at {}x{}; increase both dimensions",
            tr.dim_cavity(),
            tr.dim_mirror()
        )));
    }

    let mut table = Table::new(&["energy", "photon_block", "rank_in_block", "photons", "phonons", "predicted", "deviation"]);
    let mut predicted_dev: Option<f64> = None;
    for level in &interior {
        let pred = predicted(c.hamiltonian, &p, level.photon_block, level.rank_in_block);
        let dev = pred.map(|e| (level.energy - e).abs());
        if let Some(d) = dev {
            predicted_dev = Some(predicted_dev.unwrap_or(0.0).max(d));
        }
        table.push(vec![
            num(level.energy),
            level.photon_block.to_string(),
            level.rank_in_block.to_string(),
            num(level.photons),
            num(level.phonons),
            pred.map(num).unwrap_or_default(),
            dev.map(num).unwrap_or_default(),
        ]);
    }
    let ladder = predicted_dev.filter(|_| p.is_kerr_matched() || c.hamiltonian == HamiltonianKind::IonLaser);
    let mut block_shifts: Vec<BlockShift> = match c.hamiltonian {
        HamiltonianKind::Full | HamiltonianKind::Displaced if p.xi() == 0.0 => interior
            .iter()
            .filter(|l| l.rank_in_block == 0)
            .map(|l| BlockShift {
                photon_number: l.photon_block,
                measured: l.energy - p.detuning() * l.photon_block as f64,
                predicted: (p.chi() - p.matched_chi()) * (l.photon_block * l.photon_block) as f64,
            })
            .collect(),
        _ => Vec::new(),
    };
    block_shifts.sort_by_key(|b| b.photon_number);
    if interior.len() < c.levels {
        warnings.push(format!("only {} of {} requested levels are interior", interior.len(), c.levels));
    }

    let mut outcome = Outcome::default();
    if verify {
        match predicted_dev {
            Some(d) if d >= LADDER_TOL => outcome.fail(CliError::numerical(format!(
                "spectrum deviates from the closed form by {d:.3e} (tolerance {LADDER_TOL:.0e})"
            ))),
            None => outcome.fail(CliError::numerical("spectrum has no closed form to verify against (needs xi = 0)")),
            _ => {}
        }
        if interior.len() < c.levels {
            outcome.fail(CliError::truncation(format!(
                "only {} of {} requested levels are interior; increase the dimensions",
                interior.len(),
                c.levels
            )));
        }
    }
    let meta = Metadata {
        header: Header::new("spectrum", &config.params, &config.truncation),
        hamiltonian: c.hamiltonian,
        order: c.order,
        requested_levels: c.levels,
        interior_levels: interior.len(),
        ladder_deviation: ladder,
        predicted_deviation: predicted_dev,
        block_shifts,
        warnings,
    };
    outcome.add("spectrum.csv", table.to_csv());
    outcome.add_json("spectrum.json", &meta);
    Ok(outcome)
}
