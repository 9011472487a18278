//! One line per acceptance criterion; exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use optomech::checks::{
    analytic_vs_numeric_adequate, displaced_fock_elements, kerr_ladder, polaron_conjugation, rwa_resummation,
    rwa_validity, weak_coupling, Check,
};
use optomech::config::{Experiment, ModeName, RunConfig};
use optomech::execute;
use optomech::output::Outcome;
use optomech_core::dynamics::AnalyticEvolutionSpec;
use optomech_core::fock::{BipartiteState, TruncationSpec};
use optomech_core::hamiltonians::{AssemblyFault, SystemParams};
use optomech_core::C64;
use serde_json::Value;

type Verdict = Result<String, String>;

/// Passes when every check passes; reports the worst measured value.
fn all(checks: Vec<Check>) -> Verdict {
    let worst = checks.iter().filter_map(|c| c.measured).fold(0.0, f64::max);
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err(format!("{}: {}", c.name, c.message)),
        None => Ok(format!("{} checks, worst measured {worst:.3e}", checks.len())),
    }
}

fn ac1() -> Verdict {
    let p = SystemParams::kerr_matched(0.7, 0.3, 0.0).unwrap();
    all(vec![kerr_ladder(&p, &TruncationSpec::new(40, 40).unwrap(), 100)])
}

fn ac2() -> Verdict {
    let p = SystemParams::new(0.6, 1.0, 0.5, 0.07, 0.3).unwrap();
    let tr = TruncationSpec::new(5, 90).unwrap();
    all([0.2, 0.5, 1.0].iter().map(|&eta| polaron_conjugation(&p, eta, &tr, AssemblyFault::None)).collect())
}

fn ac3() -> Verdict {
    all(vec![displaced_fock_elements(20, &[C64::new(0.3, 0.0), C64::new(0.0, 0.8), C64::new(1.5, 0.0)])])
}

fn ac4() -> Verdict {
    let p = SystemParams::kerr_matched(0.0, 0.4, 0.05).unwrap();
    all(vec![rwa_resummation(&p, &TruncationSpec::new(25, 25).unwrap(), &[0, 1, 2, -1])])
}

fn spec(alpha: f64, gamma: f64, eta: f64, xi: f64, scaled_time: f64) -> AnalyticEvolutionSpec {
    let p = SystemParams::kerr_matched(0.0, eta, xi).unwrap();
    AnalyticEvolutionSpec::new(C64::new(alpha, 0.0), C64::new(gamma, 0.0), scaled_time, p).unwrap()
}

fn ac5() -> Verdict {
    let mut checks = Vec::new();
    for eta in [0.25, 0.5, 0.75, 1.0] {
        for tau in [PI / 4.0, PI / 2.0, PI] {
            checks.push(analytic_vs_numeric_adequate(&spec(2.0, 2.0, eta, 0.01, tau), 1e-8));
        }
    }
    all(checks)
}

fn ac6() -> Verdict {
    all(vec![rwa_validity(&spec(0.5, 0.5, 0.1, 0.01, PI), 0.01), rwa_validity(&spec(0.0, 0.0, 0.2, 0.01, PI), 0.01)])
}

fn ac7() -> Verdict {
    let p = SystemParams::kerr_matched(0.8, 0.02, 0.05).unwrap();
    let tr = TruncationSpec::with_tail_tol(15, 15, 1e-6).unwrap();
    let mut checks = vec![weak_coupling(&p, &BipartiteState::basis(1, 1, tr).unwrap(), PI, 40, 0.01)];
    checks.push(weak_coupling(&p, &BipartiteState::coherent_product(C64::new(1.0, 0.0), C64::new(1.0, 0.0), tr).unwrap(), PI, 40, 0.01));
    all(checks)
}

fn fig1() -> Result<Outcome, String> {
    let mut config = RunConfig::fig1(Experiment::Husimi).map_err(|e| e.to_string())?;
    config.husimi.as_mut().unwrap().modes = vec![ModeName::Mirror, ModeName::Cavity];
    execute(Experiment::Husimi, &config, true).map_err(|e| e.to_string())
}

fn metadata(outcome: &Outcome) -> Value {
    let (_, bytes) = outcome.files.iter().find(|(n, _)| n == "husimi.json").expect("husimi.json");
    serde_json::from_slice(bytes).unwrap()
}

fn ac8(outcome: &Outcome) -> Verdict {
    if let Some(e) = &outcome.failure {
        return Err(e.to_string());
    }
    let meta = metadata(outcome);
    let panels = meta["panels"].as_array().unwrap();
    let (mut residual, mut integral): (f64, f64) = (0.0, 0.0);
    for p in panels {
        residual = residual.max(p["oracle_residual"].as_f64().unwrap_or(f64::INFINITY));
        integral = integral.max((p["norm_integral"].as_f64().unwrap() - 1.0).abs());
    }
    let line = format!("{} grids, oracle residual {residual:.3e}, integral deviation {integral:.3e}", panels.len());
    if panels.len() == 8 && residual < 1e-8 && integral <= 5e-3 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac9(outcome: &Outcome) -> Verdict {
    let meta = metadata(outcome);
    let counts: Vec<(f64, u64)> = meta["panels"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["mode"] == "mirror")
        .map(|p| (p["eta"].as_f64().unwrap(), p["maxima_count"].as_u64().unwrap()))
        .collect();
    let etas: Vec<f64> = counts.iter().map(|c| c.0).collect();
    let ok = etas == [0.25, 0.5, 0.75, 1.0] && counts.windows(2).all(|w| w[0].1 <= w[1].1) && counts[3].1 >= 2;
    let line = format!("mirror maxima by eta {counts:?}");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac10(first: &Outcome) -> Verdict {
    let second = fig1()?;
    let csv = |o: &Outcome| -> Vec<(String, Vec<u8>)> { o.files.iter().filter(|(n, _)| n.ends_with(".csv")).cloned().collect() };
    let (a, b) = (csv(first), csv(&second));
    if !a.is_empty() && a == b {
        Ok(format!("{} CSV files identical", a.len()))
    } else {
        Err("CSV output differs between runs".into())
    }
}

fn report(id: &str, what: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = f();
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &verdict {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{id} {tag}: {what} ({detail}; {secs:.1}s)");
    verdict.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report("AC1", "Kerr-matched spectrum is the bare ladder", ac1);
    ok &= report("AC2", "displaced Hamiltonian equals the polaron conjugate", ac2);
    ok &= report("AC3", "displaced Fock elements against exponentiation", ac3);
    ok &= report("AC4", "sideband Hamiltonians equal the stationary drive", ac4);
    ok &= report("AC5", "closed-form evolution against numeric propagation", ac5);
    ok &= report("AC6", "rotating-wave closed form against the ion-laser evolution", ac6);
    ok &= report("AC7", "coupled-oscillator reduction at weak coupling", ac7);
    let run = fig1();
    match &run {
        Ok(outcome) => {
            ok &= report("AC8", "Husimi closed forms against the reduced state", || ac8(outcome));
            ok &= report("AC9", "maxima count grows with eta", || ac9(outcome));
            ok &= report("AC10", "repeated fig1 runs are byte-identical", || ac10(outcome));
        }
        Err(e) => {
            for id in ["AC8", "AC9", "AC10"] {
                println!("{id} FAIL: fig1 run failed ({e})");
            }
            ok = false;
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
