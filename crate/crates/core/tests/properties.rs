use std::f64::consts::PI;

use optomech_core::dynamics::{
    evolve_analytic, evolve_full_numeric, fidelity, from_rotating_frame, to_rotating_frame, AnalyticEvolutionSpec, AnalyticState,
    Generator,
};
use optomech_core::fock::{BipartiteState, Displacer, Mode, TruncationSpec};
use optomech_core::hamiltonians::{PolaronTransform, SystemParams};
use optomech_core::phase_space::{husimi_mechanical_analytic, integrate_grid, GridGeometry};
use optomech_core::specfun::{coherent_amplitude, displaced_fock_element};
use optomech_core::{CMatrix, C64};
use proptest::prelude::*;

fn complex(max: f64) -> impl Strategy<Value = C64> {
    (0.0..max, 0.0..2.0 * PI).prop_map(|(r, phi)| C64::from_polar(r, phi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn displacement_adjoint_is_inverse_displacement(f in complex(2.5), n in 0usize..25, k in 0usize..25) {
        let lhs = displaced_fock_element(n, k, f);
        let rhs = displaced_fock_element(k, n, -f).conj();
        prop_assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn displacer_inverse_within_truncation(f in complex(2.0)) {
        let d = Displacer::new(30).unwrap();
        let product = d.matrix(f) * d.matrix(-f);
        prop_assert!((product - CMatrix::identity(30, 30)).camax() < 1e-10);
    }

    #[test]
    fn coherent_amplitudes_normalized(alpha in complex(3.0)) {
        let total: f64 = (0..80).map(|n| coherent_amplitude(alpha, n).norm_sqr()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_evolution_conserves_norm_and_photons(
        g0 in 0.0f64..0.4, detuning in -1.0f64..1.0, t in 0.0f64..20.0, alpha in complex(0.8), gamma in complex(0.8),
    ) {
        let p = SystemParams::kerr_matched(detuning, g0, 0.0).unwrap();
        let tr = TruncationSpec::with_tail_tol(8, 30, 1e-4).unwrap();
        let psi0 = BipartiteState::coherent_product(alpha, gamma, tr).unwrap();
        let psi = evolve_full_numeric(&p, &psi0, t, Generator::Full).unwrap();
        prop_assert!((psi.norm() - psi0.norm()).abs() < 1e-10);
        prop_assert!((psi.mean_number(Mode::Cavity) - psi0.mean_number(Mode::Cavity)).abs() < 1e-9);
    }

    #[test]
    fn polaron_round_trip(eta in -1.0f64..1.0, alpha in complex(1.0), gamma in complex(1.0)) {
        let tr = TruncationSpec::new(14, 80).unwrap();
        let psi = BipartiteState::coherent_product(alpha, gamma, tr).unwrap();
        let u = PolaronTransform::new(eta, 80).unwrap();
        let dressed = u.dress(&psi).unwrap();
        prop_assert!((dressed.norm() - psi.norm()).abs() < 1e-12);
        let back = u.undress(&dressed).unwrap();
        prop_assert!((back.amplitudes() - psi.amplitudes()).camax() < 1e-12);
    }

    #[test]
    fn rotating_frame_round_trip(g0 in 0.0f64..0.8, chi in 0.0f64..0.4, t in -10.0f64..10.0, alpha in complex(1.0)) {
        let p = SystemParams::new(0.3, 1.0, g0, chi, 0.02).unwrap();
        let tr = TruncationSpec::new(14, 40).unwrap();
        let psi = BipartiteState::coherent_product(alpha, alpha, tr).unwrap();
        let there = to_rotating_frame(&psi, t, &p).unwrap();
        let back = from_rotating_frame(&there, t, &p).unwrap();
        prop_assert!(1.0 - fidelity(&back, &psi).unwrap() < 1e-12);
    }
}

#[test]
fn analytic_state_at_zero_time_is_the_initial_state() {
    let p = SystemParams::kerr_matched(0.0, 0.5, 0.01).unwrap();
    let alpha = C64::new(1.0, 0.5);
    let gamma = C64::new(-0.5, 1.0);
    let spec = AnalyticEvolutionSpec::new(alpha, gamma, 0.0, p).unwrap();
    let tr = TruncationSpec::new(20, 40).unwrap();
    let psi = evolve_analytic(&spec, &tr).unwrap();
    let psi0 = BipartiteState::coherent_product(alpha, gamma, tr).unwrap();
    assert!(1.0 - fidelity(&psi, &psi0).unwrap() < 1e-12);
}

#[test]
fn mirror_husimi_is_a_probability_density() {
    let p = SystemParams::kerr_matched(0.0, 0.75, 0.01).unwrap();
    let spec = AnalyticEvolutionSpec::new(C64::new(1.5, 0.0), C64::new(1.5, 0.0), PI, p).unwrap();
    let state = AnalyticState::compute(&spec).unwrap();
    assert!(state.sum_deficit() < 1e-10);
    let geometry = GridGeometry::default_for(spec.alpha, spec.gamma, 0.75, spec.cutoffs.photon_in, Mode::Mirror).unwrap();
    let grid = husimi_mechanical_analytic(&state, geometry).unwrap();
    assert!(grid.positivity_ok());
    assert!(grid.peak() <= 1.0 / PI + 1e-12);
    assert!((integrate_grid(&grid).unwrap() - 1.0).abs() < 5e-3);
}
