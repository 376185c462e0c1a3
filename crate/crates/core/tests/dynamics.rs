//! Open-system hygiene, integrator convergence and closed-loop calibration.

use gaugesim::calibrate::{
    calibrate_bonds, calibrate_model, effective_coupling_map, two_site_rate, CalibrationOptions, DrivenBond,
};
use gaugesim::evolve::{
    evolve_lindblad, evolve_schrodinger, final_density, DensityMatrix, IntegratorOptions, NoiseSpec, QuantumState,
};
use gaugesim::lattice::{uniform_field_gauge, BareRates, Corner, GaugeLayout, LatticeSpec, Site};
use gaugesim::model::{device, ModelSpec};
use gaugesim::units::{angular_to_mhz, linspace, mhz_to_angular};

fn device_noise() -> NoiseSpec {
    NoiseSpec { t1_us: Some(device::T1_US.to_vec()), tphi_us: Some(device::TPHI_US.to_vec()), ..NoiseSpec::default() }
}

fn std_dev(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn lindblad_keeps_trace_and_hermiticity() {
    let j = mhz_to_angular(2.0);
    let l = LatticeSpec::uniform(4, 4, j).unwrap();
    let m =
        ModelSpec::rotating_frame_uniform(l.clone(), uniform_field_gauge(&l, 1.1, GaugeLayout::Symmetric), j).unwrap();
    let rho0 = DensityMatrix::from_state(&QuantumState::localised(&l, Site::from_index(0)).unwrap());
    let rho = final_density(&m, &rho0, &device_noise(), 1.2, &IntegratorOptions::default()).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-8);
    assert!(rho.hermiticity_defect() < 1e-10);
    // the excitation leaks into the vacuum, so site populations drop
    let r = evolve_lindblad(&m, &rho0, &device_noise(), &linspace(0.0, 1.2, 5), &IntegratorOptions::default()).unwrap();
    assert!(r.total.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn driven_lindblad_keeps_trace() {
    let l = device::lattice(&BareRates::uniform(mhz_to_angular(5.9)), None, Corner::TopLeft).unwrap();
    let m = device::lab_frame_model(l.clone(), 1.0, 0.94).unwrap();
    let rho0 = DensityMatrix::from_state(&QuantumState::localised(&l, Site::from_index(5)).unwrap());
    let rho = final_density(&m, &rho0, &device_noise(), 0.1, &IntegratorOptions::default()).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-8);
    assert!(rho.hermiticity_defect() < 1e-10);
}

#[test]
fn halving_the_tolerance_barely_moves_populations() {
    let l = device::lattice(&device::synthetic_bare_rates(2, 0.4, true), None, Corner::TopLeft).unwrap();
    let m = device::lab_frame_model(l.clone(), 1.0, 0.94).unwrap();
    let psi = QuantumState::localised(&l, Site::from_index(0)).unwrap();
    let times = linspace(0.0, 0.3, 31);
    let coarse = IntegratorOptions { tolerance: 1e-10, ..IntegratorOptions::default() };
    let fine = IntegratorOptions { tolerance: 5e-11, ..IntegratorOptions::default() };
    let a = evolve_schrodinger(&m, &psi, &times, &coarse).unwrap();
    let b = evolve_schrodinger(&m, &psi, &times, &fine).unwrap();
    let worst = a
        .populations
        .iter()
        .flatten()
        .zip(b.populations.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 10.0 * fine.tolerance, "{worst}");
}

#[test]
fn calibration_closes_the_loop() {
    let options = CalibrationOptions::default();
    let (bare, detuning) = (mhz_to_angular(5.9), mhz_to_angular(155.0));
    for target_mhz in [1.0, 2.0, 2.5, 3.0] {
        let bond = DrivenBond { driver: 1, partner: 2, bare_rate: bare, detuning };
        let cal = calibrate_bonds(&[bond], mhz_to_angular(target_mhz), &options).unwrap();
        let fitted = angular_to_mhz(two_site_rate(bare, detuning, cal.amplitude, None, &options).unwrap().rate);
        assert!((fitted / target_mhz - 1.0).abs() < 0.02, "{target_mhz}: {fitted}");
        if target_mhz == 2.5 {
            assert!((cal.ratio - 0.94).abs() < 0.02, "{}", cal.ratio);
        }
    }
}

#[test]
fn fitted_rate_grows_with_amplitude_up_to_the_peak() {
    let options = CalibrationOptions::default();
    let (bare, detuning) = (mhz_to_angular(5.9), mhz_to_angular(155.0));
    let rates: Vec<f64> = linspace(0.1, 1.84, 12)
        .into_iter()
        .map(|r| two_site_rate(bare, detuning, r * detuning, None, &options).unwrap().rate)
        .collect();
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
    // the last point sits at the first-order maximum
    assert!((rates[11] / bare - 0.5819).abs() < 0.005);
}

#[test]
fn coupling_map_of_the_uniform_device() {
    let l = device::lattice(&BareRates::uniform(mhz_to_angular(5.9)), None, Corner::TopLeft).unwrap();
    let m = device::lab_frame_model(l, 1.0, 0.94).unwrap();
    let map = effective_coupling_map(&m, &CalibrationOptions::default()).unwrap();
    let four = 4;
    for b in &map {
        let ratio = b.dual_tone / b.single_tone;
        if b.partner_modulated {
            assert!((0.78..=0.82).contains(&ratio), "{}->{}: {ratio}", b.driver, b.partner);
            assert!((angular_to_mhz(b.dual_tone) - 2.0).abs() < 0.1);
        } else {
            assert_eq!(b.partner, four);
            assert_eq!(ratio, 1.0);
            assert!(angular_to_mhz(b.single_tone) > 2.3);
        }
    }
    assert!(map.iter().any(|b| b.partner == four));
}

#[test]
fn calibration_narrows_the_rate_spread() {
    let options = CalibrationOptions::default();
    let rates = device::synthetic_bare_rates(21, 0.4, false);
    let l = device::lattice(&rates, None, Corner::TopLeft).unwrap();
    let raw = device::lab_frame_model(l, 1.0, 0.94).unwrap();
    let (calibrated, reports) = calibrate_model(&raw, mhz_to_angular(2.5), &options).unwrap();
    assert_eq!(reports.len(), raw.tones().len());
    let spread = |m: &ModelSpec| {
        let map = effective_coupling_map(m, &options).unwrap();
        std_dev(&map.iter().map(|b| angular_to_mhz(b.single_tone)).collect::<Vec<_>>())
    };
    let (before, after) = (spread(&raw), spread(&calibrated));
    assert!(after < before, "calibrated {after} vs raw {before}");
}
