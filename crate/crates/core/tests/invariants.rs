//! Property tests for the structural invariants of lattices, models and the
//! semiclassical dynamics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use gaugesim::evolve::{evolve_schrodinger, IntegratorOptions, QuantumState};
use gaugesim::lattice::{
    gauge_transform, loop_flux, plaquette_flux, uniform_field_gauge, GaugeField, GaugeLayout, LatticeSpec, ScalarField,
    Site,
};
use gaugesim::model::{build_hamiltonian, device, effective_rate, frequency_shift_factor, ModelSpec};
use gaugesim::semiclassical::{band_energy, integrate_eom, Drive, Linearization};
use gaugesim::units::{linspace, phase_distance};

const J: f64 = 12.566_370_614_359_172;

fn lattice4() -> LatticeSpec {
    LatticeSpec::uniform(4, 4, J).unwrap()
}

fn random_gauge(lattice: &LatticeSpec, phases: &[f64]) -> GaugeField {
    let mut g = GaugeField::zero(lattice);
    for (k, l) in g.links().to_vec().into_iter().enumerate() {
        g.add_phase(l.from, l.to, phases[k % phases.len()]).unwrap();
    }
    g
}

fn phase_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-PI..PI, n)
}

fn s(label: usize) -> Site {
    Site::from_label(label).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn link_phases_are_antisymmetric(phases in phase_vec(24)) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        for link in g.links() {
            prop_assert_eq!(g.phase(link.from, link.to).unwrap(), -g.phase(link.to, link.from).unwrap());
        }
    }

    #[test]
    fn plaquette_flux_is_gauge_invariant(phases in phase_vec(24), lambda in phase_vec(16)) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        let g2 = gauge_transform(&g, &ScalarField::new(&l, lambda).unwrap());
        for p in l.plaquettes() {
            let (a, b) = (plaquette_flux(&g, &l, &p).unwrap(), plaquette_flux(&g2, &l, &p).unwrap());
            prop_assert!(phase_distance(a, b) < 1e-12);
        }
    }

    #[test]
    fn uniform_gauges_thread_every_plaquette(flux in -PI..PI, landau in any::<bool>()) {
        let l = lattice4();
        let layout = if landau { GaugeLayout::Landau } else { GaugeLayout::Symmetric };
        let g = uniform_field_gauge(&l, flux, layout);
        let plaquettes = l.plaquettes();
        prop_assert_eq!(plaquettes.len(), 9);
        for p in plaquettes {
            prop_assert!(phase_distance(plaquette_flux(&g, &l, &p).unwrap(), flux) < 1e-12);
        }
    }

    #[test]
    fn flux_is_additive_over_adjacent_plaquettes(phases in phase_vec(24), row in 0usize..3, col in 0usize..2) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        let at = |r: usize, c: usize| l.site_at(r, c).unwrap();
        let composite = [at(row, col), at(row, col + 1), at(row, col + 2), at(row + 1, col + 2), at(row + 1, col + 1), at(row + 1, col)];
        let left = [at(row, col), at(row, col + 1), at(row + 1, col + 1), at(row + 1, col)];
        let right = [at(row, col + 1), at(row, col + 2), at(row + 1, col + 2), at(row + 1, col + 1)];
        let sum = loop_flux(&g, &left).unwrap() + loop_flux(&g, &right).unwrap();
        prop_assert!(phase_distance(loop_flux(&g, &composite).unwrap(), sum) < 1e-12);
    }

    #[test]
    fn rotating_hamiltonians_are_hermitian(phases in phase_vec(24)) {
        let l = lattice4();
        let m = ModelSpec::rotating_frame_uniform(l.clone(), random_gauge(&l, &phases), J).unwrap();
        prop_assert!(build_hamiltonian(&m, 0.0).unwrap().hermiticity_defect() < 1e-14);
    }

    #[test]
    fn lab_frame_hamiltonians_are_hermitian(t in 0.0f64..1.2, flux in -PI..PI) {
        let rates = device::synthetic_bare_rates(5, 0.4, true);
        let l = device::lattice(&rates, None, gaugesim::lattice::Corner::TopLeft).unwrap();
        let m = device::lab_frame_model(l, flux, 0.94).unwrap();
        prop_assert!(build_hamiltonian(&m, t).unwrap().hermiticity_defect() < 1e-14);
    }

    #[test]
    fn gauge_transform_is_a_diagonal_unitary(phases in phase_vec(24), lambda in phase_vec(16)) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        let g2 = gauge_transform(&g, &ScalarField::new(&l, lambda.clone()).unwrap());
        let h = build_hamiltonian(&ModelSpec::rotating_frame_uniform(l.clone(), g, J).unwrap(), 0.0).unwrap();
        let h2 = build_hamiltonian(&ModelSpec::rotating_frame_uniform(l.clone(), g2, J).unwrap(), 0.0).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            16,
            h.sites.iter().map(|s| Complex64::from_polar(1.0, lambda[s.index()])),
        ));
        let expected = &d * &h.matrix * d.adjoint();
        let worst = (expected - &h2.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-12, "{}", worst);
    }

    #[test]
    fn rate_is_odd_in_amplitude(bare in 1.0f64..50.0, omega in -1500.0f64..1500.0, delta in 200.0f64..1200.0) {
        let delta = if omega as i64 % 2 == 0 { delta } else { -delta };
        let r = effective_rate(bare, omega, delta).unwrap();
        prop_assert!((effective_rate(bare, -omega, delta).unwrap() + r).abs() < 1e-12);
        prop_assert!((effective_rate(bare, -omega, -delta).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn populations_are_gauge_covariant(phases in phase_vec(24), lambda in phase_vec(16)) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        let g2 = gauge_transform(&g, &ScalarField::new(&l, lambda).unwrap());
        let psi = QuantumState::localised(&l, s(1)).unwrap();
        let times = linspace(0.0, 0.3, 7);
        let opts = IntegratorOptions::default();
        let a = evolve_schrodinger(&ModelSpec::rotating_frame_uniform(l.clone(), g, J).unwrap(), &psi, &times, &opts).unwrap();
        let b = evolve_schrodinger(&ModelSpec::rotating_frame_uniform(l.clone(), g2, J).unwrap(), &psi, &times, &opts).unwrap();
        let worst = a.populations.iter().flatten().zip(b.populations.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-8);
    }

    #[test]
    fn peierls_phases_are_two_pi_periodic(phases in phase_vec(24), bond in 0usize..24, turns in -3i32..=3) {
        let l = lattice4();
        let g = random_gauge(&l, &phases);
        let mut g2 = g.clone();
        let link = g.links()[bond];
        g2.add_phase(link.from, link.to, 2.0 * PI * turns as f64).unwrap();
        let h = build_hamiltonian(&ModelSpec::rotating_frame_uniform(l.clone(), g, J).unwrap(), 0.0).unwrap();
        let h2 = build_hamiltonian(&ModelSpec::rotating_frame_uniform(l.clone(), g2, J).unwrap(), 0.0).unwrap();
        let worst = (&h.matrix - &h2.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-12);
    }

    #[test]
    fn hall_velocity_is_odd_in_flux(flux in 0.0f64..PI, e0 in 0.0f64..2.0, kx in -PI..PI, ky in -PI..PI) {
        let drive = |b: f64| Drive { linearization: Linearization::Full, ..Drive::diagonal(e0, b, 1.0) };
        let (up, down) = (drive(flux), drive(-flux));
        // mirror the start across the diagonal to map the field reversal onto itself
        let a = integrate_eom(&up, [kx, ky], 2.0, 1e-3).unwrap();
        let b = integrate_eom(&down, [ky, kx], 2.0, 1e-3).unwrap();
        let worst = a.hall.iter().zip(&b.hall).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-10, "{}", worst);
    }
}

#[test]
fn shift_factor_is_non_increasing() {
    for d in [0.0, 0.5, 1.0] {
        let values: Vec<f64> =
            linspace(0.0, 2.0, 401).into_iter().map(|t| frequency_shift_factor(t, d).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-15), "asymmetry {d}");
    }
}

#[test]
fn band_energy_is_conserved_without_fields() {
    let drive = Drive { field: [0.0, 0.0], flux: 0.0, rate: J, linearization: Linearization::Full };
    for k0 in [[0.3, -1.1], [PI / 2.0, PI / 2.0], [2.9, 0.01]] {
        let tr = integrate_eom(&drive, k0, 10.0 / J, 1e-4).unwrap();
        let e0 = band_energy(k0, J);
        let worst = tr.k.iter().map(|k| (band_energy(*k, J) - e0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10 * 2.0 * J);
    }
}
