//! Run configuration: a JSON document with physical parameters, a Fock
//! truncation and one optional section per experiment.

use std::fmt;
use std::path::Path;

use optomech_core::fock::TruncationSpec;
use optomech_core::hamiltonians::SystemParams;
use optomech_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Evolve,
    Husimi,
    Sweep,
    Verify,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Evolve => "evolve",
            Experiment::Husimi => "husimi",
            Experiment::Sweep => "sweep",
            Experiment::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// A complex number as `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Complex {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn c64(self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Physical parameters in units of the mechanical frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub detuning: f64,
    #[serde(default = "one")]
    pub omega_m: f64,
    pub g0: f64,
    /// Kerr constant; absent means matched, `g0^2 / omega_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default)]
    pub xi: f64,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<SystemParams, CliError> {
        let chi = self.chi.unwrap_or(self.g0 * self.g0 / self.omega_m);
        SystemParams::new(self.detuning, self.omega_m, self.g0, chi, self.xi).map_err(|e| CliError::config_field("params", e))
    }

    /// Same parameters with `g0 = eta omega_m` and, unless `chi` is fixed,
    /// the matched Kerr constant for that coupling.
    pub fn with_eta(&self, eta: f64) -> ParamsConfig {
        ParamsConfig { g0: eta * self.omega_m, ..*self }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub dim_cavity: usize,
    pub dim_mirror: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    optomech_core::fock::DEFAULT_TAIL_TOL
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { dim_cavity: 40, dim_mirror: 40, tail_tol: default_tail_tol() }
    }
}

impl TruncationConfig {
    pub fn build(&self) -> Result<TruncationSpec, CliError> {
        TruncationSpec::with_tail_tol(self.dim_cavity, self.dim_mirror, self.tail_tol)
            .map_err(|e| CliError::config_field("truncation", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    #[default]
    Full,
    Displaced,
    IonLaser,
    Sideband,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub hamiltonian: HamiltonianKind,
    /// Sideband order for `sideband`.
    #[serde(default)]
    pub order: i64,
    /// Number of lowest interior levels to report.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    100
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { hamiltonian: HamiltonianKind::Full, order: 0, levels: default_levels() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvolveMethod {
    #[default]
    Analytic,
    Full,
    IonLaser,
    Sideband,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub alpha: Complex,
    pub gamma: Complex,
    /// Values of `xi t`.
    pub scaled_times: Vec<f64>,
    #[serde(default)]
    pub method: EvolveMethod,
    #[serde(default)]
    pub order: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Cavity,
    Mirror,
}

impl ModeName {
    pub fn mode(self) -> optomech_core::fock::Mode {
        match self {
            ModeName::Cavity => optomech_core::fock::Mode::Cavity,
            ModeName::Mirror => optomech_core::fock::Mode::Mirror,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Cavity => "cavity",
            ModeName::Mirror => "mirror",
        }
    }
}

/// Display scaling of the emitted plot script. Stored grids are never
/// rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisplayNormalization {
    #[default]
    None,
    /// Every panel divided by the peak of the first one.
    FirstPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Defaults to `max(|Gamma|, |alpha|) + eta k_cutoff + 4`, plus the
    /// largest drive displacement for the cavity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Defaults to the initial amplitude of the mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Complex>,
}

fn default_points() -> usize {
    optomech_core::phase_space::DEFAULT_POINTS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: default_points(), half_width: None, center: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiConfig {
    pub alpha: Complex,
    pub gamma: Complex,
    pub scaled_time: f64,
    /// One panel per value; absent means the `eta` of `params`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeName>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_threshold")]
    pub maxima_threshold: f64,
    #[serde(default)]
    pub display_normalization: DisplayNormalization,
}

fn default_modes() -> Vec<ModeName> {
    vec![ModeName::Mirror]
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta,
    Chi,
    ScaledTime,
    Detuning,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::Chi => "chi",
            SweepParameter::ScaledTime => "scaled_time",
            SweepParameter::Detuning => "detuning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Local maxima of the Husimi grid above the threshold.
    MaximaCount,
    /// Riemann sum of the Husimi grid.
    NormIntegral,
    /// Fidelity between the closed-form state and the numerically
    /// propagated ion-laser Hamiltonian.
    RwaFidelity,
    /// Fidelity between the ion-laser and coupled-oscillator evolutions.
    CoupledFidelity,
}

impl Observable {
    pub fn as_str(self) -> &'static str {
        match self {
            Observable::MaximaCount => "maxima_count",
            Observable::NormIntegral => "norm_integral",
            Observable::RwaFidelity => "rwa_fidelity",
            Observable::CoupledFidelity => "coupled_fidelity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub start: f64,
    pub stop: f64,
    /// Number of values, both ends included.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeConfig>,
    pub observable: Observable,
    pub alpha: Complex,
    pub gamma: Complex,
    pub scaled_time: f64,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_threshold")]
    pub maxima_threshold: f64,
}

fn default_mode() -> ModeName {
    ModeName::Mirror
}

impl SweepConfig {
    /// The swept values in order.
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match (&self.values, &self.range) {
            (Some(_), Some(_)) => Err(CliError::config("sweep: give either `values` or `range`, not both")),
            (None, None) => Err(CliError::config("sweep: one of `values` or `range` is required")),
            (Some(v), None) => {
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(CliError::config(format!("sweep.values: {bad} is not finite")));
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(CliError::config("sweep.values: must be in non-decreasing order"));
                }
                Ok(v.clone())
            }
            (None, Some(r)) => {
                if !(r.start.is_finite() && r.stop.is_finite()) {
                    return Err(CliError::config("sweep.range: start and stop must be finite"));
                }
                if r.stop < r.start {
                    return Err(CliError::config("sweep.range: stop must not be below start"));
                }
                Ok(match r.steps {
                    0 => Vec::new(),
                    1 => vec![r.start],
                    n => (0..n).map(|i| r.start + (r.stop - r.start) * i as f64 / (n - 1) as f64).collect(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FaultConfig {
    #[default]
    None,
    /// Flip the sign of the linear mirror coupling in the displaced
    /// Hamiltonian; the spectrum checks must then fail.
    FlipLinearCoupling,
}

/// The verification suite. Checks that need a state use `|alpha, Gamma>`
/// evolved to `scaled_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub fault: FaultConfig,
    #[serde(default = "unit_amplitude")]
    pub alpha: Complex,
    #[serde(default = "unit_amplitude")]
    pub gamma: Complex,
    #[serde(default = "half_pi")]
    pub scaled_time: f64,
    /// Interior levels compared in the spectrum checks.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn unit_amplitude() -> Complex {
    Complex::new(1.0, 0.0)
}

fn half_pi() -> f64 {
    std::f64::consts::FRAC_PI_2
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            fault: FaultConfig::None,
            alpha: unit_amplitude(),
            gamma: unit_amplitude(),
            scaled_time: half_pi(),
            levels: default_levels(),
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi: Option<HusimiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("line {}, column {}: {}", e.line(), e.column(), strip_position(&e.to_string()))))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Checks that do not depend on the experiment.
    pub fn validate(&self, experiment: Experiment) -> Result<(), CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(CliError::config(format!("experiment: config is for `{e}` but the command is `{experiment}`")));
            }
        }
        self.params.build()?;
        self.truncation.build()?;
        Ok(())
    }

    /// The preset reproducing the four-panel mechanical Husimi figure:
    /// `alpha = Gamma = 2`, `xi t = pi`, `eta` in `{0.25, 0.5, 0.75, 1}`.
    pub fn fig1(experiment: Experiment) -> Result<Self, CliError> {
        let etas = vec![0.25, 0.5, 0.75, 1.0];
        let two = Complex::new(2.0, 0.0);
        let scaled_time = std::f64::consts::PI;
        let mut config = RunConfig {
            experiment: Some(experiment),
            params: ParamsConfig { detuning: 0.0, omega_m: 1.0, g0: 1.0, chi: None, xi: 0.01 },
            truncation: TruncationConfig::default(),
            spectrum: None,
            evolve: None,
            husimi: None,
            sweep: None,
            verify: None,
            out_dir: None,
        };
        match experiment {
            Experiment::Husimi => {
                config.husimi = Some(HusimiConfig {
                    alpha: two,
                    gamma: two,
                    scaled_time,
                    etas: Some(etas),
                    modes: vec![ModeName::Mirror],
                    grid: GridConfig::default(),
                    maxima_threshold: default_threshold(),
                    display_normalization: DisplayNormalization::FirstPanel,
                })
            }
            Experiment::Sweep => {
                config.sweep = Some(SweepConfig {
                    parameter: SweepParameter::Eta,
                    values: Some(etas),
                    range: None,
                    observable: Observable::MaximaCount,
                    alpha: two,
                    gamma: two,
                    scaled_time,
                    mode: ModeName::Mirror,
                    grid: GridConfig::default(),
                    maxima_threshold: default_threshold(),
                })
            }
            other => return Err(CliError::config(format!("preset fig1 applies to husimi and sweep, not {other}"))),
        }
        Ok(config)
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(message: &str) -> &str {
    message.rfind(" at line ").map_or(message, |i| &message[..i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{"params": {"g0": 0.3}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.params.omega_m, 1.0);
        assert_eq!(c.params.chi, None);
        assert_eq!(c.truncation, TruncationConfig::default());
        let p = c.params.build().unwrap();
        assert!(p.is_kerr_matched());
    }

    #[test]
    fn errors_name_line_and_field() {
        let err = RunConfig::from_json("{\n  \"params\": {\"g0\": 0.3, \"gee\": 1}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("gee"), "{msg}");
        let err = RunConfig::from_json(r#"{"params": {"g0": -1}}"#).unwrap().validate(Experiment::Spectrum).unwrap_err();
        assert!(err.to_string().contains("g0"), "{err}");
        let err = RunConfig::from_json(r#"{"params": {"g0": 1}, "truncation": {"dim_cavity": 1, "dim_mirror": 4}}"#)
            .unwrap()
            .validate(Experiment::Spectrum)
            .unwrap_err();
        assert!(err.to_string().contains("truncation"), "{err}");
        let err = RunConfig::from_json(r#"{"experiment": "husimi", "params": {"g0": 1}}"#)
            .unwrap()
            .validate(Experiment::Spectrum)
            .unwrap_err();
        assert!(err.to_string().contains("experiment"));
    }

    #[test]
    fn sweep_values() {
        let mut s = RunConfig::fig1(Experiment::Sweep).unwrap().sweep.unwrap();
        assert_eq!(s.values().unwrap(), vec![0.25, 0.5, 0.75, 1.0]);
        s.values = None;
        s.range = Some(RangeConfig { start: 0.0, stop: 1.0, steps: 5 });
        assert_eq!(s.values().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        s.range = Some(RangeConfig { start: 0.0, stop: 1.0, steps: 0 });
        assert!(s.values().unwrap().is_empty());
        s.range = Some(RangeConfig { start: 1.0, stop: 0.0, steps: 3 });
        assert!(s.values().is_err());
    }

    #[test]
    fn fig1_round_trips() {
        for e in [Experiment::Husimi, Experiment::Sweep] {
            let c = RunConfig::fig1(e).unwrap();
            assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(RunConfig::fig1(Experiment::Verify).is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e3f64..1e3, Just(0.0), Just(1e-300), Just(std::f64::consts::PI)]
    }

    proptest! {
        #[test]
        fn config_round_trip(
            g0 in finite(), chi in proptest::option::of(finite()), xi in finite(), detuning in finite(),
            dims in (2usize..60, 2usize..60), times in proptest::collection::vec(finite(), 0..5),
            re in finite(), im in finite(), fault in any::<bool>(),
        ) {
            let c = RunConfig {
                experiment: Some(Experiment::Evolve),
                params: ParamsConfig { detuning, omega_m: 1.0, g0, chi, xi },
                truncation: TruncationConfig { dim_cavity: dims.0, dim_mirror: dims.1, tail_tol: 1e-7 },
                spectrum: Some(SpectrumConfig::default()),
                evolve: Some(EvolveConfig { alpha: Complex::new(re, im), gamma: Complex::new(im, re), scaled_times: times, method: EvolveMethod::Coupled, order: -2 }),
                husimi: None,
                sweep: None,
                verify: Some(VerifyConfig { fault: if fault { FaultConfig::FlipLinearCoupling } else { FaultConfig::None }, scaled_time: re, ..VerifyConfig::default() }),
                out_dir: Some("somewhere".into()),
            };
            let once = RunConfig::from_json(&c.to_json()).unwrap();
            prop_assert_eq!(&once, &c);
            prop_assert_eq!(once.to_json(), c.to_json());
        }
    }
}
