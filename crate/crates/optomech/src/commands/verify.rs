use optomech_core::hamiltonians::AssemblyFault;
use serde::Serialize;

use super::Header;
use crate::checks::{suite, Check, CheckKind, SuiteOptions};
use crate::config::{FaultConfig, RunConfig};
use crate::error::CliError;
use crate::output::Outcome;

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    fault: FaultConfig,
    passed: bool,
    checks: &'a [Check],
}

pub fn run(config: &RunConfig, _verify: bool) -> Result<Outcome, CliError> {
    let v = config.verify.unwrap_or_default();
    if v.levels == 0 {
        return Err(CliError::config("verify.levels: must be positive"));
    }
    if !(v.scaled_time.is_finite() && v.scaled_time >= 0.0) {
        return Err(CliError::config("verify.scaled_time: must be finite and non-negative"));
    }
    let p = config.params.build()?;
    let tr = config.truncation.build()?;
    let options = SuiteOptions {
        alpha: v.alpha.c64(),
        gamma: v.gamma.c64(),
        scaled_time: v.scaled_time,
        levels: v.levels,
        fault: match v.fault {
            FaultConfig::None => AssemblyFault::None,
            FaultConfig::FlipLinearCoupling => AssemblyFault::FlipLinearCoupling,
        },
    };
    let checks = suite(&p, &tr, &options);
    let failed = |kind| checks.iter().filter(|c| !c.pass && c.kind == kind).map(|c| c.name.as_str()).collect::<Vec<_>>();
    let (numerical, truncation) = (failed(CheckKind::Numerical), failed(CheckKind::Truncation));

    let mut outcome = Outcome::default();
    if !numerical.is_empty() {
        outcome.fail(CliError::numerical(format!("failed checks: {}", numerical.join(", "))));
    } else if !truncation.is_empty() {
        outcome.fail(CliError::truncation(format!("failed checks: {}", truncation.join(", "))));
    }
    let report = Report {
        header: Header::new("verify", &config.params, &config.truncation),
        fault: v.fault,
        passed: outcome.failure.is_none(),
        checks: &checks,
    };
    outcome.add_json("verify.json", &report);
    Ok(outcome)
}
