use optomech_core::dynamics::{
    evolve_dressed_numeric, fidelity, from_coupled_frame, generator_matrix, to_coupled_frame, to_rotating_frame,
    AnalyticEvolutionSpec, AnalyticState, Generator,
};
use optomech_core::fock::{BipartiteState, Mode, Propagator, TruncationSpec};
use optomech_core::hamiltonians::{PolaronTransform, SystemParams};
use serde::Serialize;

use super::{closed_form_params, require_non_negative, Header};
use crate::config::{Complex, EvolveConfig, EvolveMethod, RunConfig};
use crate::error::CliError;
use crate::output::{num, Outcome, Table};

const ORACLE_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Reference {
    /// Polaron dressing of the exactly exponentiated resonant interaction.
    DressedNumeric,
    Analytic,
}

#[derive(Serialize)]
struct Metadata<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    method: EvolveMethod,
    order: i64,
    alpha: Complex,
    gamma: Complex,
    frame: &'static str,
    fidelity_reference: Option<Reference>,
    worst_fidelity: Option<f64>,
    max_norm_deficit: f64,
}

/// Rotating-frame states at each scaled time.
fn numeric_states(
    p: &SystemParams,
    tr: &TruncationSpec,
    psi0: &BipartiteState,
    c: &EvolveConfig,
) -> Result<Vec<BipartiteState>, CliError> {
    let generator = match c.method {
        EvolveMethod::Full => Generator::Full,
        EvolveMethod::IonLaser => Generator::IonLaser,
        EvolveMethod::Sideband => Generator::Sideband(c.order),
        EvolveMethod::Coupled => Generator::Coupled,
        EvolveMethod::Analytic => unreachable!("handled by the closed form"),
    };
    let polaron = PolaronTransform::new(p.eta(), tr.dim_mirror())?;
    let start = match c.method {
        EvolveMethod::Full => psi0.clone(),
        EvolveMethod::Coupled => to_coupled_frame(&polaron.undress(psi0)?, p)?,
        _ => polaron.undress(psi0)?,
    };
    let propagator = Propagator::new(generator_matrix(p, tr, generator)?.matrix())?;
    c.scaled_times
        .iter()
        .map(|&tau| {
            let t = tau / p.xi();
            let evolved = BipartiteState::new(propagator.apply(t, start.amplitudes()), *tr)?;
            evolved.check_truncation()?;
            let state = match c.method {
                EvolveMethod::Full => to_rotating_frame(&evolved, t, p)?,
                // Sideband generators already live in the interaction picture.
                EvolveMethod::Sideband => polaron.dress(&evolved)?,
                EvolveMethod::Coupled => to_rotating_frame(&polaron.dress(&from_coupled_frame(&evolved, p)?)?, t, p)?,
                _ => to_rotating_frame(&polaron.dress(&evolved)?, t, p)?,
            };
            Ok(state)
        })
        .collect()
}

fn validate(p: &SystemParams, c: &EvolveConfig) -> Result<(), CliError> {
    for (i, &tau) in c.scaled_times.iter().enumerate() {
        require_non_negative(&format!("evolve.scaled_times[{i}]"), tau)?;
    }
    for (name, v) in [("evolve.alpha", c.alpha), ("evolve.gamma", c.gamma)] {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(CliError::config(format!("{name}: must be finite")));
        }
    }
    if c.order != 0 && c.method != EvolveMethod::Sideband {
        return Err(CliError::config("evolve.order: only used with method = sideband"));
    }
    if c.method != EvolveMethod::Analytic && p.xi() <= 0.0 {
        return Err(CliError::config("params.xi: numeric methods need a positive drive to convert scaled times"));
    }
    if c.method == EvolveMethod::Coupled && p.detuning() == 0.0 {
        return Err(CliError::config(
            "params.detuning: the coupled-oscillator frame is undefined at zero detuning; use method = sideband",
        ));
    }
    Ok(())
}

pub fn run(config: &RunConfig, verify: bool) -> Result<Outcome, CliError> {
    let c = config.evolve.as_ref().ok_or_else(|| CliError::config("evolve: section missing"))?;
    let p = if c.method == EvolveMethod::Analytic { closed_form_params(&config.params, "evolve")? } else { config.params.build()? };
    let tr = config.truncation.build()?;
    validate(&p, c)?;
    let (alpha, gamma) = (c.alpha.c64(), c.gamma.c64());
    let closed_form = closed_form_params(&config.params, "evolve").is_ok();

    let (states, references, reference) = if c.method == EvolveMethod::Analytic {
        let mut states = Vec::new();
        let mut oracles = Vec::new();
        for &tau in &c.scaled_times {
            let spec = AnalyticEvolutionSpec::new(alpha, gamma, tau, p).map_err(|e| CliError::config_field("evolve", e))?;
            states.push(AnalyticState::compute(&spec)?.state(&tr)?);
            oracles.push(evolve_dressed_numeric(&spec, &tr)?);
        }
        (states, Some(oracles), Some(Reference::DressedNumeric))
    } else {
        let psi0 = BipartiteState::coherent_product(alpha, gamma, tr)?;
        psi0.check_truncation()?;
        let states = numeric_states(&p, &tr, &psi0, c)?;
        let references = if closed_form {
            let mut out = Vec::new();
            for &tau in &c.scaled_times {
                let spec = AnalyticEvolutionSpec::new(alpha, gamma, tau, p).map_err(|e| CliError::config_field("evolve", e))?;
                out.push(AnalyticState::compute(&spec)?.state(&tr)?);
            }
            Some(out)
        } else {
            None
        };
        let reference = references.as_ref().map(|_| Reference::Analytic);
        (states, references, reference)
    };

    let mut table = Table::new(&["scaled_time", "photons", "phonons", "norm_deficit", "fidelity"]);
    let mut worst_fidelity: Option<f64> = None;
    let mut max_deficit: f64 = 0.0;
    for (i, (tau, state)) in c.scaled_times.iter().zip(&states).enumerate() {
        let norm = state.norm();
        let deficit = 1.0 - norm * norm;
        max_deficit = max_deficit.max(deficit.abs());
        let fid = match &references {
            Some(r) => Some(fidelity(state, &r[i])?),
            None => None,
        };
        if let Some(f) = fid {
            worst_fidelity = Some(worst_fidelity.map_or(f, |w| w.min(f)));
        }
        table.push(vec![
            num(*tau),
            num(state.mean_number(Mode::Cavity)),
            num(state.mean_number(Mode::Mirror)),
            num(deficit),
            fid.map(num).unwrap_or_default(),
        ]);
    }

    let mut outcome = Outcome::default();
    if verify {
        if max_deficit > NORM_TOL {
            outcome.fail(CliError::numerical(format!("norm deficit {max_deficit:.3e} exceeds {NORM_TOL:.0e}")));
        }
        if c.method == EvolveMethod::Analytic {
            if let Some(w) = worst_fidelity.filter(|w| 1.0 - w > ORACLE_TOL) {
                outcome.fail(CliError::numerical(format!(
                    "closed form disagrees with the dressed numeric oracle: infidelity {:.3e} (tolerance {ORACLE_TOL:.0e})",
                    1.0 - w
                )));
            }
        }
    }
    let meta = Metadata {
        header: Header::new("evolve", &config.params, &config.truncation),
        method: c.method,
        order: c.order,
        alpha: c.alpha,
        gamma: c.gamma,
        frame: "rotating",
        fidelity_reference: reference,
        worst_fidelity,
        max_norm_deficit: max_deficit,
    };
    outcome.add("evolve.csv", table.to_csv());
    outcome.add_json("evolve.json", &meta);
    Ok(outcome)
}
