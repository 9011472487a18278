use std::fmt::Write as _;

use optomech_core::dynamics::{AnalyticEvolutionSpec, AnalyticState};
use optomech_core::fock::Mode;
use optomech_core::phase_space::{
    find_local_maxima, husimi_cavity_analytic, husimi_mechanical_analytic, integrate_grid, GridGeometry, HusimiGrid,
    LocalMaximum,
};
use optomech_core::{Error, C64};
use serde::Serialize;

use super::{closed_form_params, require_non_negative, Header};
use crate::checks::{husimi_agreement, Check};
use crate::config::{Complex, DisplayNormalization, GridConfig, HusimiConfig, ModeName, RunConfig};
use crate::error::CliError;
use crate::output::{grid_csv, Outcome};

/// Square grid around the initial amplitude of `mode`, wide enough for
/// every displaced lobe unless `half_width` is given. The cavity grid also
/// covers the largest drive displacement `max_j |f_j|`.
pub fn geometry(
    spec: &AnalyticEvolutionSpec,
    mode: Mode,
    points: usize,
    half_width: Option<f64>,
    center: Option<C64>,
) -> Result<GridGeometry, Error> {
    let drive = match mode {
        Mode::Cavity => (0..spec.cutoffs.phonon).map(|j| spec.effective_amplitude(j).abs()).fold(0.0, f64::max),
        Mode::Mirror => 0.0,
    };
    let half = half_width.unwrap_or(
        spec.alpha.norm().max(spec.gamma.norm()) + spec.eta().abs() * spec.cutoffs.photon_in as f64 + drive + 4.0,
    );
    let center = center.unwrap_or(match mode {
        Mode::Cavity => spec.alpha,
        Mode::Mirror => spec.gamma,
    });
    GridGeometry::square(center, half, points)
}

pub fn validate_grid(grid: &GridConfig, threshold: f64, section: &str) -> Result<(), CliError> {
    if grid.points < 2 {
        return Err(CliError::config(format!("{section}.grid.points: need at least 2 (got {})", grid.points)));
    }
    if let Some(h) = grid.half_width {
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::config(format!("{section}.grid.half_width: {h} must be positive")));
        }
    }
    if let Some(c) = grid.center {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(CliError::config(format!("{section}.grid.center: must be finite")));
        }
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::config(format!("{section}.maxima_threshold: {threshold} must lie in (0, 1)")));
    }
    Ok(())
}

/// One evaluated grid with its diagnostics.
pub struct Panel {
    pub mode: Mode,
    pub grid: HusimiGrid,
    pub integral: f64,
    pub maxima: Vec<LocalMaximum>,
}

impl Panel {
    pub fn compute(state: &AnalyticState, mode: Mode, grid: &GridConfig, threshold: f64) -> Result<Self, Error> {
        let geometry = geometry(state.spec(), mode, grid.points, grid.half_width, grid.center.map(Complex::c64))?;
        let values = match mode {
            Mode::Mirror => husimi_mechanical_analytic(state, geometry)?,
            Mode::Cavity => husimi_cavity_analytic(state, geometry)?,
        };
        let integral = integrate_grid(&values)?;
        let maxima = find_local_maxima(&values, threshold)?;
        Ok(Self { mode, grid: values, integral, maxima })
    }

    pub fn verify(&self, state: &AnalyticState) -> Vec<Check> {
        husimi_agreement(state, *self.grid.geometry(), self.mode, &self.grid)
    }
}

#[derive(Serialize)]
struct CutoffsMeta {
    photon_in: usize,
    phonon: usize,
    photon_out: usize,
}

#[derive(Serialize)]
struct GridMeta {
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    n_re: usize,
    n_im: usize,
}

#[derive(Serialize)]
struct MaximumMeta {
    re: f64,
    im: f64,
    value: f64,
}

#[derive(Serialize)]
struct PanelMeta {
    mode: &'static str,
    eta: f64,
    file: String,
    cutoffs: CutoffsMeta,
    sum_deficit: f64,
    grid: GridMeta,
    norm_integral: f64,
    peak: f64,
    boundary_ratio: f64,
    clamped: usize,
    most_negative: f64,
    maxima_count: usize,
    maxima: Vec<MaximumMeta>,
    display_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_residual: Option<f64>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    alpha: Complex,
    gamma: Complex,
    scaled_time: f64,
    maxima_threshold: f64,
    display_normalization: DisplayNormalization,
    panels: Vec<PanelMeta>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    verification: Vec<Check>,
}

fn validate(c: &HusimiConfig) -> Result<Vec<f64>, CliError> {
    require_non_negative("husimi.scaled_time", c.scaled_time)?;
    validate_grid(&c.grid, c.maxima_threshold, "husimi")?;
    if c.modes.is_empty() {
        return Err(CliError::config("husimi.modes: at least one mode is required"));
    }
    let mut modes = c.modes.clone();
    modes.sort_by_key(|m| m.as_str());
    modes.dedup();
    if modes.len() != c.modes.len() {
        return Err(CliError::config("husimi.modes: modes must not repeat"));
    }
    let etas = c.etas.clone().unwrap_or_default();
    if c.etas.is_some() && etas.is_empty() {
        return Err(CliError::config("husimi.etas: give at least one value or omit the field"));
    }
    for (i, &e) in etas.iter().enumerate() {
        require_non_negative(&format!("husimi.etas[{i}]"), e)?;
        if etas[..i].contains(&e) {
            return Err(CliError::config(format!("husimi.etas[{i}]: {e} repeats an earlier value")));
        }
    }
    Ok(etas)
}

pub fn run(config: &RunConfig, verify: bool) -> Result<Outcome, CliError> {
    let c = config.husimi.as_ref().ok_or_else(|| CliError::config("husimi: section missing"))?;
    let etas = validate(c)?;
    // (eta, params) per panel column; absent etas means the configured g0.
    let variants = if etas.is_empty() {
        let p = closed_form_params(&config.params, "husimi")?;
        vec![(p.eta(), p)]
    } else {
        etas.iter()
            .map(|&e| closed_form_params(&config.params.with_eta(e), "husimi").map(|p| (e, p)))
            .collect::<Result<Vec<_>, _>>()?
    };
    let specs = variants
        .iter()
        .map(|(_, p)| AnalyticEvolutionSpec::new(c.alpha.c64(), c.gamma.c64(), c.scaled_time, *p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::config_field("husimi", e))?;

    let states = specs.iter().map(AnalyticState::compute).collect::<Result<Vec<_>, _>>()?;

    let mut outcome = Outcome::default();
    let mut panels = Vec::new();
    let mut verification = Vec::new();
    let mut script = String::new();
    for &mode_name in &c.modes {
        let mode = mode_name.mode();
        let mut first_peak = None;
        let mut files = Vec::new();
        for ((eta, _), state) in variants.iter().zip(&states) {
            let panel = Panel::compute(state, mode, &c.grid, c.maxima_threshold)?;
            let peak = panel.grid.peak();
            let scale = match c.display_normalization {
                DisplayNormalization::None => 1.0,
                DisplayNormalization::FirstPanel => 1.0 / *first_peak.get_or_insert(peak),
            };
            let checks = if verify { panel.verify(state) } else { Vec::new() };
            let residual = checks.first().and_then(|ch| ch.measured);
            let file = format!("husimi_{}_eta_{eta}.csv", mode_name.as_str());
            outcome.add(file.clone(), grid_csv(&panel.grid));
            let g = panel.grid.geometry();
            let cut = state.spec().cutoffs;
            panels.push(PanelMeta {
                mode: mode_name.as_str(),
                eta: *eta,
                file: file.clone(),
                cutoffs: CutoffsMeta { photon_in: cut.photon_in, phonon: cut.phonon, photon_out: cut.photon_out },
                sum_deficit: state.sum_deficit(),
                grid: GridMeta { re_min: g.re_min, re_max: g.re_max, im_min: g.im_min, im_max: g.im_max, n_re: g.n_re, n_im: g.n_im },
                norm_integral: panel.integral,
                peak,
                boundary_ratio: panel.grid.boundary_max() / peak,
                clamped: panel.grid.clamped(),
                most_negative: panel.grid.most_negative(),
                maxima_count: panel.maxima.len(),
                maxima: panel.maxima.iter().map(|m| MaximumMeta { re: m.beta.re, im: m.beta.im, value: m.value }).collect(),
                display_scale: scale,
                oracle_residual: residual,
            });
            files.push((file, *eta, scale));
            verification.extend(checks);
        }
        plot_script(&mut script, mode_name, &files);
    }
    let failed: Vec<&str> = verification.iter().filter(|ch| !ch.pass).map(|ch| ch.name.as_str()).collect();
    if !failed.is_empty() {
        outcome.fail(CliError::numerical(format!("husimi verification failed: {}", failed.join(", "))));
    }
    let meta = Metadata {
        header: Header::new("husimi", &config.params, &config.truncation),
        alpha: c.alpha,
        gamma: c.gamma,
        scaled_time: c.scaled_time,
        maxima_threshold: c.maxima_threshold,
        display_normalization: c.display_normalization,
        panels,
        verification,
    };
    outcome.add_json("husimi.json", &meta);
    outcome.add("husimi.gp", script);
    Ok(outcome)
}

/// gnuplot commands drawing one row of panels per mode.
fn plot_script(out: &mut String, mode: ModeName, files: &[(String, f64, f64)]) {
    let name = mode.as_str();
    writeln!(out, "# {name} mode").unwrap();
    writeln!(out, "set terminal pngcairo size {},400", 400 * files.len()).unwrap();
    writeln!(out, "set output 'husimi_{name}.png'").unwrap();
    out.push_str("set datafile separator ','\nset size ratio -1\nset xlabel 'Re beta'\nset ylabel 'Im beta'\n");
    writeln!(out, "set multiplot layout 1,{}", files.len()).unwrap();
    for (file, eta, scale) in files {
        writeln!(out, "set title 'eta = {eta}'").unwrap();
        writeln!(out, "plot '{file}' skip 1 using 1:2:($3*{scale:e}) with image notitle").unwrap();
    }
    out.push_str("unset multiplot\n\n");
}
