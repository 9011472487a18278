pub mod evolve;
pub mod husimi;
pub mod spectrum;
pub mod sweep;
pub mod verify;

use optomech_core::hamiltonians::SystemParams;
use serde::Serialize;

use crate::config::{ParamsConfig, TruncationConfig};
use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every metadata file.
#[derive(Debug, Serialize)]
pub struct Header<'a> {
    pub tool_version: &'static str,
    pub experiment: &'static str,
    pub params: &'a ParamsConfig,
    pub truncation: &'a TruncationConfig,
}

impl<'a> Header<'a> {
    pub fn new(experiment: &'static str, params: &'a ParamsConfig, truncation: &'a TruncationConfig) -> Self {
        Self { tool_version: TOOL_VERSION, experiment, params, truncation }
    }
}

/// Parameters for the closed-form evolution, which assumes a resonant
/// drive and the matched Kerr constant.
pub fn closed_form_params(params: &ParamsConfig, section: &str) -> Result<SystemParams, CliError> {
    let p = params.build()?;
    if p.detuning() != 0.0 {
        return Err(CliError::config(format!("{section}: the closed-form evolution needs params.detuning = 0 (got {})", p.detuning())));
    }
    if !p.is_kerr_matched() {
        return Err(CliError::config(format!(
            "{section}: the closed-form evolution needs the matched Kerr constant {} (got chi = {}); omit params.chi",
            p.matched_chi(),
            p.chi()
        )));
    }
    Ok(p)
}

pub fn require_finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name}: {v} is not finite")))
    }
}

pub fn require_non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name}: {v} must be finite and non-negative")))
    }
}
