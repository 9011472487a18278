//! Husimi Q functions on rectangular grids.
//!
//! `Q(beta) = <beta|rho|beta> / pi` is evaluated three ways: from the
//! closed-form mechanical expansion (shifted coherent overlaps
//! `<beta - eta n|j>` against the undisplaced rows `phi_n`), from the
//! closed-form cavity expansion (coherent overlaps against the dressed rows
//! `psi_n`), and from an explicit density operator.


use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use nalgebra::SymmetricEigen;

use crate::dynamics::AnalyticState;
use crate::fock::{DensityMatrix, Mode};
use crate::specfun::coherent_amplitude;
use crate::{CMatrix, CVector, Error, Result, C64, ZERO};

/// Fock amplitudes of a coherent state below this are dropped.
const WINDOW_CUT: f64 = 1e-16;

/// Largest admissible boundary value relative to the grid peak.
pub const BOUNDARY_LIMIT: f64 = 1e-6;

/// Values at or above this are not counted as negative excursions.
pub const NEGATIVE_TOL: f64 = -1e-14;

/// `<j|beta>` for the contiguous run of `j` in `range` where it exceeds
/// [`WINDOW_CUT`]. Returns the first index and the amplitudes.
pub fn coherent_window(beta: C64, range: Range<usize>) -> (usize, Vec<C64>) {
    if range.is_empty() {
        return (range.start, Vec::new());
    }
    let r = beta.norm();
    if r == 0.0 {
        return if range.start == 0 { (0, vec![C64::new(1.0, 0.0)]) } else { (range.start, Vec::new()) };
    }
    // Amplitudes fall off on both sides of the Poisson mode, so the mode
    // clipped into the range is the largest entry there.
    let mode = (libm::floor(r * r) as usize).clamp(range.start, range.end - 1);
    let start_value = coherent_amplitude(beta, mode);
    if start_value.norm_sqr() < WINDOW_CUT * WINDOW_CUT {
        return (range.start, Vec::new());
    }
    let mut up = Vec::new();
    let mut a = start_value;
    for j in mode + 1..range.end {
        a = a * beta / libm::sqrt(j as f64);
        if a.norm_sqr() < WINDOW_CUT * WINDOW_CUT {
            break;
        }
        up.push(a);
    }
    let mut down = Vec::new();
    let mut a = start_value;
    let mut j = mode;
    while j > range.start {
        a = a * libm::sqrt(j as f64) / beta;
        if a.norm_sqr() < WINDOW_CUT * WINDOW_CUT {
            break;
        }
        down.push(a);
        j -= 1;
    }
    let start = mode - down.len();
    down.reverse();
    down.push(start_value);
    down.extend(up);
    (start, down)
}

/// `<beta|v>` restricted to the indices in `range`.
fn coherent_overlap(beta: C64, v: impl Fn(usize) -> C64, range: Range<usize>) -> C64 {
    let (start, window) = coherent_window(beta, range);
    let mut acc = ZERO;
    for (i, a) in window.iter().enumerate() {
        acc += a.conj() * v(start + i);
    }
    acc
}

/// Index range outside which every entry of `v` is at most `cut`.
fn significant_range(v: &CVector, cut: f64) -> Range<usize> {
    match v.iter().position(|x| x.norm() > cut) {
        Some(lo) => lo..v.iter().rposition(|x| x.norm() > cut).unwrap_or(lo) + 1,
        None => 0..0,
    }
}

/// Sample points of a rectangular grid in the complex `beta` plane.
///
/// Points are stored real-index major: index `i_re * n_im + i_im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

/// Default sample count per axis.
pub const DEFAULT_POINTS: usize = 201;

impl GridGeometry {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64, n_re: usize, n_im: usize) -> Result<Self> {
        for v in [re_min, re_max, im_min, im_max] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name: "grid extent", value: v, reason: "must be finite" });
            }
        }
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidParameter { name: "grid extent", value: re_max - re_min, reason: "max must exceed min" });
        }
        if n_re < 2 || n_im < 2 {
            return Err(Error::InvalidDimension { dim: n_re.min(n_im) });
        }
        Ok(Self { re_min, re_max, im_min, im_max, n_re, n_im })
    }

    /// `n x n` points over a square of half-width `half_width`.
    pub fn square(center: C64, half_width: f64, n: usize) -> Result<Self> {
        if half_width.is_nan() || half_width <= 0.0 {
            return Err(Error::InvalidParameter { name: "half_width", value: half_width, reason: "must be positive" });
        }
        Self::new(center.re - half_width, center.re + half_width, center.im - half_width, center.im + half_width, n, n)
    }

    /// Square covering every displaced lobe: half-width
    /// `max(|Gamma|, |alpha|) + eta k_cutoff + 4` around the initial amplitude
    /// of `mode`.
    pub fn default_for(alpha: C64, gamma: C64, eta: f64, k_cutoff: usize, mode: Mode) -> Result<Self> {
        let half = alpha.norm().max(gamma.norm()) + eta.abs() * k_cutoff as f64 + 4.0;
        let center = match mode {
            Mode::Cavity => alpha,
            Mode::Mirror => gamma,
        };
        Self::square(center, half, DEFAULT_POINTS)
    }

    pub fn step_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn step_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.step_re() * self.step_im()
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i_re: usize, i_im: usize) -> usize {
        i_re * self.n_im + i_im
    }

    pub fn point(&self, i_re: usize, i_im: usize) -> C64 {
        C64::new(self.re_min + i_re as f64 * self.step_re(), self.im_min + i_im as f64 * self.step_im())
    }

    pub fn point_at(&self, index: usize) -> C64 {
        self.point(index / self.n_im, index % self.n_im)
    }
}

/// Anything that yields `Q(beta)`.
pub trait Husimi {
    fn q(&self, beta: C64) -> f64;
}

/// Sampled Q function.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    geometry: GridGeometry,
    values: Vec<f64>,
    clamped: usize,
    most_negative: f64,
}

impl HusimiGrid {
    /// Evaluate `source` at every point. Negative values are set to zero and
    /// counted.
    pub fn evaluate(geometry: GridGeometry, source: &impl Husimi) -> Self {
        let mut clamped = 0;
        let mut most_negative = 0.0f64;
        let values = (0..geometry.len())
            .map(|i| {
                let v = source.q(geometry.point_at(i));
                if v < 0.0 {
                    clamped += 1;
                    most_negative = most_negative.min(v);
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Self { geometry, values, clamped, most_negative }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::DimensionMismatch { left: values.len(), right: geometry.len() });
        }
        let mut grid = Self { geometry, values, clamped: 0, most_negative: 0.0 };
        for v in grid.values.iter_mut() {
            if *v < 0.0 {
                grid.clamped += 1;
                grid.most_negative = grid.most_negative.min(*v);
                *v = 0.0;
            }
        }
        Ok(grid)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[self.geometry.index(i_re, i_im)]
    }

    pub fn cell_area(&self) -> f64 {
        self.geometry.cell_area()
    }

    /// Number of values that came out negative and were set to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Most negative raw value seen (zero if none).
    pub fn most_negative(&self) -> f64 {
        self.most_negative
    }

    /// True when no clamped value was below [`NEGATIVE_TOL`].
    pub fn positivity_ok(&self) -> bool {
        self.most_negative >= NEGATIVE_TOL
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest value on the outer ring of points.
    pub fn boundary_max(&self) -> f64 {
        let g = &self.geometry;
        let mut m = 0.0f64;
        for i in 0..g.n_re {
            m = m.max(self.value(i, 0)).max(self.value(i, g.n_im - 1));
        }
        for j in 0..g.n_im {
            m = m.max(self.value(0, j)).max(self.value(g.n_re - 1, j));
        }
        m
    }

    /// Largest pointwise difference to another grid on the same geometry.
    pub fn max_abs_diff(&self, other: &HusimiGrid) -> Result<f64> {
        if self.geometry != other.geometry {
            return Err(Error::DimensionMismatch { left: self.values.len(), right: other.values.len() });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Copy with every value multiplied by `factor`, for display scaling.
    pub fn scaled(&self, factor: f64) -> HusimiGrid {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Riemann sum of the grid after checking that the boundary is negligible.
pub fn integrate_grid(grid: &HusimiGrid) -> Result<f64> {
    let peak = grid.peak();
    let ratio = if peak > 0.0 { grid.boundary_max() / peak } else { 0.0 };
    if ratio >= BOUNDARY_LIMIT {
        return Err(Error::ExtentsTooSmall { ratio, limit: BOUNDARY_LIMIT });
    }
    Ok(pairwise_sum(grid.values()) * grid.cell_area())
}

/// Fixed-order pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// A local maximum of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMaximum {
    pub i_re: usize,
    pub i_im: usize,
    pub beta: C64,
    pub value: f64,
}

/// Local maxima above `rel_threshold` times the global peak.
///
/// Neighbourhoods are the eight surrounding cells. A plateau of equal
/// values counts once, at its smallest index, when every cell bordering it
/// is strictly lower.
pub fn find_local_maxima(grid: &HusimiGrid, rel_threshold: f64) -> Result<Vec<LocalMaximum>> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::InvalidParameter { name: "rel_threshold", value: rel_threshold, reason: "must lie in (0, 1)" });
    }
    let g = *grid.geometry();
    let threshold = rel_threshold * grid.peak();
    let mut seen = vec![false; g.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g.len() {
        let value = grid.values[start];
        if seen[start] || value <= threshold {
            continue;
        }
        let mut is_max = true;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx / g.n_im, idx % g.n_im);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= g.n_re as i64 || nj >= g.n_im as i64 {
                        continue;
                    }
                    let n = g.index(ni as usize, nj as usize);
                    let v = grid.values[n];
                    if v > value {
                        is_max = false;
                    } else if v == value && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if is_max {
            let (i_re, i_im) = (start / g.n_im, start % g.n_im);
            out.push(LocalMaximum { i_re, i_im, beta: g.point(i_re, i_im), value });
        }
    }
    Ok(out)
}

/// Mechanical Q from the closed-form expansion:
/// `(1/pi) sum_n |sum_j phi_n[j] <beta - eta n|j>|^2`.
#[derive(Debug, Clone, Copy)]
pub struct MechanicalHusimi<'a> {
    state: &'a AnalyticState,
    /// Rows with any weight.
    rows: usize,
}

impl<'a> MechanicalHusimi<'a> {
    pub fn new(state: &'a AnalyticState) -> Result<Self> {
        if state.sum_deficit() > crate::dynamics::NORM_DEFICIT_LIMIT {
            return Err(cutoff_error(state));
        }
        let rows = (0..state.phi().nrows()).rev().find(|&n| !state.support(n).is_empty()).map_or(0, |n| n + 1);
        Ok(Self { state, rows })
    }
}

impl Husimi for MechanicalHusimi<'_> {
    fn q(&self, beta: C64) -> f64 {
        let phi = self.state.phi();
        let eta = self.state.spec().eta();
        let mut total = 0.0;
        for n in 0..self.rows {
            let support = self.state.support(n);
            if support.is_empty() {
                continue;
            }
            let amp = coherent_overlap(beta - eta * n as f64, |j| phi[(n, j)], support);
            total += amp.norm_sqr();
        }
        total / PI
    }
}

/// Cavity Q from the closed-form expansion
/// `(1/pi) sum_l |sum_n <beta|n> psi_n[l]|^2` with
/// `psi_n[l] = sum_j <l|D_b(eta n)|j> phi_n[j]`.
///
/// The sum over `l` is carried out once, leaving the photon-number Gram
/// matrix `G[(n, m)] = sum_l psi_n[l] psi_m[l]^*` to be sandwiched between
/// coherent amplitudes at each point.
#[derive(Debug, Clone)]
pub struct CavityHusimi {
    gram: CMatrix,
}

impl CavityHusimi {
    pub fn new(state: &AnalyticState) -> Result<Self> {
        let psi = state.dressed_rows()?;
        Ok(Self { gram: psi * psi.adjoint() })
    }
}

impl Husimi for CavityHusimi {
    fn q(&self, beta: C64) -> f64 {
        let (start, window) = coherent_window(beta, 0..self.gram.nrows());
        let mut total = ZERO;
        for (i, a) in window.iter().enumerate() {
            let mut row = ZERO;
            for (k, b) in window.iter().enumerate() {
                row += self.gram[(start + i, start + k)] * b;
            }
            total += a.conj() * row;
        }
        total.re / PI
    }
}

/// `rho = sum_r w_r |v_r><v_r|` with explicit Fock vectors; the generic
/// definition `Q = <beta|rho|beta>/pi`.
#[derive(Debug, Clone)]
pub struct MixtureHusimi {
    weights: Vec<f64>,
    vectors: Vec<CVector>,
    ranges: Vec<Range<usize>>,
    /// Union of `ranges`.
    span: Range<usize>,
}

/// Vector entries at or below this are skipped in overlaps.
const ENTRY_CUT: f64 = 1e-16;

impl MixtureHusimi {
    pub fn new(weights: Vec<f64>, vectors: Vec<CVector>) -> Result<Self> {
        if weights.len() != vectors.len() {
            return Err(Error::DimensionMismatch { left: weights.len(), right: vectors.len() });
        }
        let ranges: Vec<Range<usize>> = vectors.iter().map(|v| significant_range(v, ENTRY_CUT)).collect();
        let nonempty = ranges.iter().filter(|r| !r.is_empty());
        let span = nonempty.clone().map(|r| r.start).min().unwrap_or(0)..nonempty.map(|r| r.end).max().unwrap_or(0);
        Ok(Self { weights, vectors, ranges, span })
    }

    /// Spectral decomposition of a density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_hermitian(rho.matrix().clone())
    }

    fn from_hermitian(m: CMatrix) -> Self {
        let eig = SymmetricEigen::new(m);
        let weights = eig.eigenvalues.iter().cloned().collect();
        let vectors = eig.eigenvectors.column_iter().map(|c| c.into_owned()).collect();
        Self::new(weights, vectors).expect("one weight per eigenvector")
    }

    /// Reduced state of one mode of the closed-form evolution, built
    /// without the closed-form Q expansions: the mirror as the mixture of
    /// dressed rows `psi_n`, the cavity from the overlaps
    /// `<phi_m|D_b(eta (n - m))|phi_n>`.
    pub fn reduced(state: &AnalyticState, mode: Mode) -> Result<Self> {
        match mode {
            Mode::Mirror => {
                let psi = state.dressed_rows()?;
                let vectors: Vec<CVector> = psi.row_iter().map(|r| r.transpose()).collect();
                Self::new(vec![1.0; vectors.len()], vectors)
            }
            Mode::Cavity => Ok(Self::from_hermitian(state.cavity_density()?)),
        }
    }
}

impl Husimi for MixtureHusimi {
    fn q(&self, beta: C64) -> f64 {
        let mut total = 0.0;
        let (start, window) = coherent_window(beta, self.span.clone());
        let end = start + window.len();
        for ((w, v), range) in self.weights.iter().zip(&self.vectors).zip(&self.ranges) {
            let (lo, hi) = (range.start.max(start), range.end.min(end));
            if *w == 0.0 || lo >= hi {
                continue;
            }
            let mut acc = ZERO;
            for i in lo..hi {
                acc += window[i - start].conj() * v[i];
            }
            total += w * acc.norm_sqr();
        }
        total / PI
    }
}

fn cutoff_error(state: &AnalyticState) -> Error {
    let bigger = state.spec().cutoffs.scaled(1.5);
    Error::CutoffInsufficient {
        deficit: state.sum_deficit(),
        threshold: crate::dynamics::NORM_DEFICIT_LIMIT,
        suggested_photon: bigger.photon_in,
        suggested_phonon: bigger.phonon,
    }
}

/// Mechanical Q of the closed-form evolution on `geometry`.
pub fn husimi_mechanical_analytic(state: &AnalyticState, geometry: GridGeometry) -> Result<HusimiGrid> {
    Ok(HusimiGrid::evaluate(geometry, &MechanicalHusimi::new(state)?))
}

/// Cavity Q of the closed-form evolution on `geometry`.
pub fn husimi_cavity_analytic(state: &AnalyticState, geometry: GridGeometry) -> Result<HusimiGrid> {
    Ok(HusimiGrid::evaluate(geometry, &CavityHusimi::new(state)?))
}

/// `Q(beta) = <beta|rho|beta>/pi` on `geometry`.
pub fn husimi_from_density(rho: &DensityMatrix, geometry: GridGeometry) -> HusimiGrid {
    HusimiGrid::evaluate(geometry, &MixtureHusimi::from_density(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AnalyticEvolutionSpec;
    use crate::fock::coherent_state;
    use crate::hamiltonians::SystemParams;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct Coherent(C64);

    impl Husimi for Coherent {
        fn q(&self, beta: C64) -> f64 {
            (-(beta - self.0).norm_sqr()).exp() / PI
        }
    }

    #[test]
    fn window_matches_direct_amplitudes() {
        for beta in [c(0.0, 0.0), c(0.3, -0.2), c(2.0, 1.0), c(-7.5, 3.0), c(30.0, 0.0)] {
            let (start, w) = coherent_window(beta, 0..2000);
            for (i, a) in w.iter().enumerate() {
                assert!((a - coherent_amplitude(beta, start + i)).norm() < 1e-12 * a.norm().max(1e-17));
            }
            let mass: f64 = w.iter().map(|a| a.norm_sqr()).sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
        // Far outside the truncated range nothing survives.
        assert!(coherent_window(c(40.0, 0.0), 0..100).1.is_empty());
        // A range away from zero starts at its first index or later.
        let (start, w) = coherent_window(c(3.0, 0.0), 5..12);
        assert!(start >= 5 && start + w.len() <= 12);
        assert!((w[0] - coherent_amplitude(c(3.0, 0.0), start)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_density() {
        let g = GridGeometry::square(ZERO, 3.0, 21).unwrap();
        let rho = DensityMatrix::pure(&coherent_state(ZERO, 8, 1e-8).unwrap().vector, Mode::Mirror);
        let grid = husimi_from_density(&rho, g);
        for i in 0..g.len() {
            let b = g.point_at(i);
            assert!((grid.values()[i] - (-b.norm_sqr()).exp() / PI).abs() < 1e-14);
        }
    }

    #[test]
    fn maximally_mixed_two_levels() {
        let g = GridGeometry::square(ZERO, 3.0, 21).unwrap();
        let grid = husimi_from_density(&DensityMatrix::maximally_mixed(2, Mode::Cavity), g);
        for i in 0..g.len() {
            let x = g.point_at(i).norm_sqr();
            assert!((grid.values()[i] - (-x).exp() * (1.0 + x) / (2.0 * PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_state() {
        let g = GridGeometry::square(ZERO, 4.0, 17).unwrap();
        let grid = husimi_from_density(&DensityMatrix::thermal(1.0, 80, Mode::Cavity), g);
        for i in 0..g.len() {
            let x = g.point_at(i).norm_sqr();
            assert!((grid.values()[i] - (-x / 2.0).exp() / (2.0 * PI)).abs() < 1e-13);
        }
    }

    #[test]
    fn coherent_integral() {
        let center = c(2.0, -1.0);
        let g = GridGeometry::square(center, 5.0, 201).unwrap();
        let grid = HusimiGrid::evaluate(g, &Coherent(center));
        assert!((integrate_grid(&grid).unwrap() - 1.0).abs() < 1e-4);
        assert!((grid.peak() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn small_extents_are_rejected() {
        let g = GridGeometry::square(ZERO, 1.0, 101).unwrap();
        let grid = HusimiGrid::evaluate(g, &Coherent(c(2.0, 0.0)));
        assert!(matches!(integrate_grid(&grid), Err(Error::ExtentsTooSmall { .. })));
    }

    #[test]
    fn maxima_of_one_and_two_gaussians() {
        let g = GridGeometry::square(ZERO, 8.0, 161).unwrap();
        let one = HusimiGrid::evaluate(g, &Coherent(c(0.5, 0.3)));
        assert_eq!(find_local_maxima(&one, 0.1).unwrap().len(), 1);
        let v = |beta: C64| coherent_state(beta, 60, 1e-10).unwrap().vector;
        let mix = MixtureHusimi::new(vec![0.5, 0.5], vec![v(c(-3.0, 0.0)), v(c(3.0, 0.0))]).unwrap();
        let two = HusimiGrid::evaluate(g, &mix);
        let maxima = find_local_maxima(&two, 0.1).unwrap();
        assert_eq!(maxima.len(), 2);
        assert!((maxima[0].beta - c(-3.0, 0.0)).norm() < 1e-12);
        assert!((maxima[1].beta - c(3.0, 0.0)).norm() < 1e-12);
        assert!(find_local_maxima(&two, 1.0).is_err());
    }

    #[test]
    fn plateau_counts_once() {
        let g = GridGeometry::new(0.0, 4.0, 0.0, 4.0, 5, 5).unwrap();
        let mut values = vec![0.0; 25];
        for idx in [g.index(1, 1), g.index(1, 2), g.index(2, 2)] {
            values[idx] = 1.0;
        }
        values[g.index(4, 4)] = 0.5;
        let grid = HusimiGrid::from_values(g, values).unwrap();
        let maxima = find_local_maxima(&grid, 0.1).unwrap();
        assert_eq!(maxima.len(), 2);
        assert_eq!((maxima[0].i_re, maxima[0].i_im), (1, 1));
        // A plateau touching a higher cell is not a maximum.
        let mut values = vec![0.0; 25];
        values[g.index(1, 1)] = 1.0;
        values[g.index(1, 2)] = 1.0;
        values[g.index(1, 3)] = 2.0;
        let grid = HusimiGrid::from_values(g, values).unwrap();
        assert_eq!(find_local_maxima(&grid, 0.1).unwrap().len(), 1);
    }

    #[test]
    fn negatives_are_clamped_and_counted() {
        let g = GridGeometry::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let grid = HusimiGrid::from_values(g, vec![0.1, -1e-16, -1e-3, 0.2]).unwrap();
        assert_eq!(grid.clamped(), 2);
        assert_eq!(grid.values()[2], 0.0);
        assert!(!grid.positivity_ok());
    }

    fn state(alpha: C64, gamma: C64, eta: f64, xt: f64) -> AnalyticState {
        let p = SystemParams::kerr_matched(0.0, eta, 0.01).unwrap();
        AnalyticState::compute(&AnalyticEvolutionSpec::new(alpha, gamma, xt, p).unwrap()).unwrap()
    }

    #[test]
    fn zero_time_gives_coherent_gaussians() {
        let (alpha, gamma) = (c(1.0, 0.5), c(-0.5, 1.5));
        for eta in [0.0, 0.6] {
            let st = state(alpha, gamma, eta, 0.0);
            let mech = MechanicalHusimi::new(&st).unwrap();
            let cav = CavityHusimi::new(&st).unwrap();
            for beta in [gamma, c(0.0, 0.0), c(1.0, 1.0)] {
                assert!((mech.q(beta) - Coherent(gamma).q(beta)).abs() < 1e-13);
                assert!((cav.q(beta) - Coherent(alpha).q(beta)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn closed_forms_match_reduced_density() {
        let st = state(c(1.0, 0.2), c(0.5, -0.5), 0.7, 2.0);
        for (mode, center) in [(Mode::Mirror, c(0.5, -0.5)), (Mode::Cavity, c(1.0, 0.2))] {
            let g = GridGeometry::square(center, 6.0, 41).unwrap();
            let closed = match mode {
                Mode::Mirror => husimi_mechanical_analytic(&st, g).unwrap(),
                Mode::Cavity => husimi_cavity_analytic(&st, g).unwrap(),
            };
            let oracle = HusimiGrid::evaluate(g, &MixtureHusimi::reduced(&st, mode).unwrap());
            let diff = closed.max_abs_diff(&oracle).unwrap();
            assert!(diff < 1e-12, "{diff:e}");
            assert!(closed.peak() <= 1.0 / PI + 1e-10);
            assert_eq!(closed.clamped(), 0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn coherent_q_is_bounded_and_positive(re in -3.0f64..3.0, im in -3.0f64..3.0, bre in -5.0f64..5.0, bim in -5.0f64..5.0) {
            let v = coherent_state(c(re, im), 60, 1e-10).unwrap().vector;
            let q = MixtureHusimi::new(vec![1.0], vec![v]).unwrap().q(c(bre, bim));
            prop_assert!(q >= 0.0);
            prop_assert!(q <= 1.0 / PI + 1e-10);
            prop_assert!((q - Coherent(c(re, im)).q(c(bre, bim))).abs() < 1e-12);
        }
    }
}
