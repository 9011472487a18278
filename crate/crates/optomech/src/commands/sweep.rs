use optomech_core::dynamics::{AnalyticEvolutionSpec, AnalyticState};
use optomech_core::fock::BipartiteState;
use serde::Serialize;

use super::husimi::{validate_grid, Panel};
use super::{closed_form_params, Header};
use crate::checks::{rwa_validity, weak_coupling, CheckKind};
use crate::config::{Complex, Observable, ParamsConfig, RunConfig, SweepConfig, SweepParameter};
use crate::error::CliError;
use crate::output::{num, Outcome, Table};

#[derive(Serialize)]
struct Row {
    value: f64,
    result: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    parameter: SweepParameter,
    observable: Observable,
    alpha: Complex,
    gamma: Complex,
    scaled_time: f64,
    rows: Vec<Row>,
}

/// Parameters and scaled time for one row.
fn point(base: &ParamsConfig, s: &SweepConfig, v: f64) -> (ParamsConfig, f64) {
    match s.parameter {
        SweepParameter::Eta => (base.with_eta(v), s.scaled_time),
        SweepParameter::Chi => (ParamsConfig { chi: Some(v), ..*base }, s.scaled_time),
        SweepParameter::Detuning => (ParamsConfig { detuning: v, ..*base }, s.scaled_time),
        SweepParameter::ScaledTime => (*base, v),
    }
}

fn evaluate(config: &RunConfig, s: &SweepConfig, v: f64) -> Result<f64, CliError> {
    let (params, tau) = point(&config.params, s, v);
    let (alpha, gamma) = (s.alpha.c64(), s.gamma.c64());
    match s.observable {
        Observable::MaximaCount | Observable::NormIntegral => {
            let p = closed_form_params(&params, "sweep")?;
            let state = AnalyticState::compute(&AnalyticEvolutionSpec::new(alpha, gamma, tau, p)?)?;
            let panel = Panel::compute(&state, s.mode.mode(), &s.grid, s.maxima_threshold)?;
            Ok(match s.observable {
                Observable::MaximaCount => panel.maxima.len() as f64,
                _ => panel.integral,
            })
        }
        Observable::RwaFidelity => {
            let p = closed_form_params(&params, "sweep")?;
            let check = rwa_validity(&AnalyticEvolutionSpec::new(alpha, gamma, tau, p)?, 1.0);
            from_check(check)
        }
        Observable::CoupledFidelity => {
            let p = params.build()?;
            let tr = config.truncation.build()?;
            let psi0 = BipartiteState::coherent_product(alpha, gamma, tr)?;
            from_check(weak_coupling(&p, &psi0, tau, 1, 1.0))
        }
    }
}

/// Fidelity from an infidelity check that only fails on errors.
fn from_check(check: crate::checks::Check) -> Result<f64, CliError> {
    match check.measured {
        Some(m) if check.pass => Ok(1.0 - m),
        _ => Err(match check.kind {
            CheckKind::Truncation => CliError::truncation(check.message),
            CheckKind::Numerical => CliError::numerical(check.message),
        }),
    }
}

pub fn run(config: &RunConfig, _verify: bool) -> Result<Outcome, CliError> {
    let s = config.sweep.as_ref().ok_or_else(|| CliError::config("sweep: section missing"))?;
    let values = s.values()?;
    validate_grid(&s.grid, s.maxima_threshold, "sweep")?;
    if !s.scaled_time.is_finite() || s.scaled_time < 0.0 {
        return Err(CliError::config("sweep.scaled_time: must be finite and non-negative"));
    }
    let observable_needs_drive = matches!(s.observable, Observable::RwaFidelity | Observable::CoupledFidelity);
    if observable_needs_drive && config.params.xi <= 0.0 {
        return Err(CliError::config("params.xi: fidelity observables need a positive drive"));
    }

    let mut table = Table::new(&[s.parameter.as_str(), s.observable.as_str(), "error"]);
    let mut rows = Vec::new();
    let mut outcome = Outcome::default();
    for v in values {
        let row = match evaluate(config, s, v) {
            Ok(r) => Row { value: v, result: Some(r), error: None },
            Err(e) => {
                let message = e.message().to_string();
                let err = match e {
                    CliError::Truncation(m) => CliError::Truncation(m),
                    other => CliError::Numerical(other.message().to_string()),
                };
                outcome.fail(err.context(&format!("{} = {v}", s.parameter.as_str())));
                Row { value: v, result: None, error: Some(message) }
            }
        };
        table.push(vec![
            num(row.value),
            row.result.map(num).unwrap_or_default(),
            row.error.as_deref().map(csv_text).unwrap_or_default(),
        ]);
        rows.push(row);
    }
    let meta = Metadata {
        header: Header::new("sweep", &config.params, &config.truncation),
        parameter: s.parameter,
        observable: s.observable,
        alpha: s.alpha,
        gamma: s.gamma,
        scaled_time: s.scaled_time,
        rows,
    };
    outcome.add("sweep.csv", table.to_csv());
    outcome.add_json("sweep.json", &meta);
    Ok(outcome)
}

/// Quoted CSV cell.
fn csv_text(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
