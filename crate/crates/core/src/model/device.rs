//! The 4×4 device: frequency/phase layout, noise figures and synthetic
//! bare couplings.
//!
//! Each modulated site sits above or to the left of the sites it drives and
//! is detuned from them by its modulation frequency. With the phase multiples
//! below, every plaquette carries the same flux.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::{DriveTone, ModelError, ModelSpec};
use crate::lattice::{build_lattice, BareRates, Corner, LatticeError, LatticeSpec, RateOverride, Site};
use crate::units::mhz_to_angular;

pub const ROWS: usize = 4;
pub const COLS: usize = 4;

/// Idle frequencies in MHz, by site label 1..16.
pub const SETPOINTS_MHZ: [f64; 16] = [
    4655.0, 4500.0, 4615.0, 4780.0, 4550.0, 4655.0, 4500.0, 4615.0, 4720.0, 4550.0, 4655.0, 4500.0, 4840.0, 4720.0,
    4550.0, 4655.0,
];

/// Unsigned modulation frequencies in MHz; site 4 is not modulated.
pub const MODULATION_MHZ: [Option<f64>; 16] = [
    Some(155.0),
    Some(115.0),
    Some(165.0),
    None,
    Some(105.0),
    Some(155.0),
    Some(115.0),
    Some(165.0),
    Some(170.0),
    Some(105.0),
    Some(155.0),
    Some(115.0),
    Some(120.0),
    Some(170.0),
    Some(105.0),
    Some(155.0),
];

/// Tone phase of each site as a multiple of the plaquette flux.
pub const PHASE_MULTIPLES: [f64; 16] =
    [1.5, -1.0, -0.5, 0.0, -1.0, 0.5, 0.0, 0.5, 0.5, 0.0, -0.5, 1.0, 0.0, -0.5, 1.0, -1.5];

/// Energy relaxation times in µs.
pub const T1_US: [f64; 16] =
    [14.1, 16.7, 14.5, 16.7, 14.5, 8.4, 18.1, 7.5, 12.8, 10.9, 18.5, 20.4, 21.8, 20.5, 18.9, 33.4];

/// Pure dephasing times in µs.
pub const TPHI_US: [f64; 16] =
    [12.9, 10.1, 10.3, 6.9, 10.2, 13.1, 15.7, 8.3, 10.8, 6.7, 3.6, 13.2, 8.6, 10.3, 11.2, 7.9];

/// Mean and spread of the bare couplings, MHz.
pub const NEAREST_MEAN_MHZ: f64 = 5.9;
pub const NEAREST_SIGMA_MHZ: f64 = 0.4;
pub const NEXT_NEAREST_MEAN_MHZ: f64 = 0.43;
pub const NEXT_NEAREST_SIGMA_MHZ: f64 = 0.23;

/// Single-tone drive ratio Ω/δ giving J/2π ≈ 2.5 MHz at the mean bare rate.
pub const DRIVE_RATIO: f64 = 0.94;

/// Nominal hopping rate with all sites modulated, MHz.
pub const NOMINAL_HOPPING_MHZ: f64 = 2.0;

/// Idle frequencies in rad/µs.
pub fn onsite() -> Vec<f64> {
    SETPOINTS_MHZ.iter().map(|&f| mhz_to_angular(f)).collect()
}

/// Signed detuning δ = ω_site − ω_partner in rad/µs for a modulated site.
pub fn signed_detuning(site: Site) -> Option<f64> {
    let k = site.index();
    let f = MODULATION_MHZ.get(k).copied().flatten()?;
    let (r, c) = (k / COLS, k % COLS);
    let neighbours = [
        (r + 1 < ROWS).then(|| k + COLS),
        (r > 0).then(|| k - COLS),
        (c + 1 < COLS).then(|| k + 1),
        (c > 0).then(|| k - 1),
    ];
    neighbours.into_iter().flatten().find_map(|p| {
        let gap = SETPOINTS_MHZ[k] - SETPOINTS_MHZ[p];
        ((gap.abs() - f).abs() < 1e-9).then(|| mhz_to_angular(gap))
    })
}

/// Tones realising flux `flux` on every plaquette, amplitude `ratio·|δ|`.
/// Tones on inactive sites of `mask` are dropped.
pub fn tones(flux: f64, ratio: f64, mask: &[bool]) -> Vec<DriveTone> {
    (0..ROWS * COLS)
        .filter(|&k| mask.get(k).copied().unwrap_or(true))
        .filter_map(|k| {
            let site = Site::from_index(k);
            signed_detuning(site).map(|d| DriveTone::new(site, ratio * d.abs(), d, PHASE_MULTIPLES[k] * flux))
        })
        .collect()
}

/// Gaussian bare couplings around the device means, seeded.
///
/// Next-nearest draws that fall at or below zero leave the bond out.
pub fn synthetic_bare_rates(seed: u64, nearest_sigma_mhz: f64, next_nearest: bool) -> BareRates {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let nn = Normal::new(NEAREST_MEAN_MHZ, nearest_sigma_mhz.max(0.0)).expect("finite sigma");
    let nnn = Normal::new(NEXT_NEAREST_MEAN_MHZ, NEXT_NEAREST_SIGMA_MHZ).expect("finite sigma");
    let template = LatticeSpec::uniform(ROWS, COLS, 1.0).expect("fixed size");
    let mut overrides: Vec<RateOverride> = template
        .bonds()
        .iter()
        .map(|b| RateOverride { a: b.from, b: b.to, rate: mhz_to_angular(nn.sample(&mut rng).max(1e-3)) })
        .collect();
    if next_nearest {
        for r in 0..ROWS - 1 {
            for c in 0..COLS - 1 {
                let at = |r: usize, c: usize| Site::from_index(r * COLS + c);
                for (a, b) in [(at(r, c), at(r + 1, c + 1)), (at(r, c + 1), at(r + 1, c))] {
                    let rate = nnn.sample(&mut rng);
                    if rate > 0.0 {
                        overrides.push(RateOverride { a, b, rate: mhz_to_angular(rate) });
                    }
                }
            }
        }
    }
    BareRates { nearest: mhz_to_angular(NEAREST_MEAN_MHZ), next_nearest: 0.0, overrides }
}

/// The device lattice restricted to `mask`, keeping only rates between
/// active sites.
pub fn lattice(rates: &BareRates, mask: Option<&[bool]>, origin: Corner) -> Result<LatticeSpec, LatticeError> {
    let active = mask.map(|m| m.to_vec()).unwrap_or_else(|| vec![true; ROWS * COLS]);
    let mut rates = rates.clone();
    rates.overrides.retain(|o| {
        active.get(o.a.index()).copied().unwrap_or(true) && active.get(o.b.index()).copied().unwrap_or(true)
    });
    build_lattice(ROWS, COLS, &rates, Some(&active), origin)
}

/// Lab-frame model of the device with flux `flux` on every plaquette.
pub fn lab_frame_model(lattice: LatticeSpec, flux: f64, ratio: f64) -> Result<ModelSpec, ModelError> {
    let tones = tones(flux, ratio, lattice.active_mask());
    ModelSpec::lab_frame(lattice, onsite(), tones, mhz_to_angular(NOMINAL_HOPPING_MHZ))
}

/// Lab-frame model with a uniform bare rate and no next-nearest couplings.
pub fn lab_frame_uniform_model(lattice: LatticeSpec, flux: f64, ratio: f64) -> Result<ModelSpec, ModelError> {
    let tones = tones(flux, ratio, lattice.active_mask());
    ModelSpec::lab_frame_uniform(
        lattice,
        mhz_to_angular(NEAREST_MEAN_MHZ),
        onsite(),
        tones,
        mhz_to_angular(NOMINAL_HOPPING_MHZ),
    )
}

/// Mask selecting the listed one-based labels.
pub fn mask_from_labels(labels: &[usize]) -> Vec<bool> {
    let mut m = vec![false; ROWS * COLS];
    for &l in labels {
        if (1..=ROWS * COLS).contains(&l) {
            m[l - 1] = true;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::plaquette_flux;
    use crate::model::{realised_gauge, BondDrive};
    use crate::units::phase_distance;

    #[test]
    fn every_nearest_bond_has_exactly_one_driver() {
        let l = lattice(&BareRates::uniform(1.0), None, Corner::BottomLeft).unwrap();
        let m = lab_frame_model(l, 0.3, DRIVE_RATIO).unwrap();
        let drives = m.bond_drives().unwrap();
        for (b, d) in m.lattice().bonds().iter().zip(drives) {
            // the driver sits to the left of or above its partner
            let horizontal = b.to.index() == b.from.index() + 1;
            assert_eq!(
                *d,
                match *d {
                    BondDrive::Tone { tone, sign, .. } => BondDrive::Tone { tone, sign, driver_is_from: horizontal },
                    other => panic!("{}-{} undriven: {other:?}", b.from, b.to),
                }
            );
        }
        assert_eq!(m.tones().len(), 15);
    }

    #[test]
    fn table_phases_give_uniform_flux() {
        let l = lattice(&BareRates::uniform(1.0), None, Corner::BottomLeft).unwrap();
        for flux in [0.0, 0.5, -1.1, std::f64::consts::PI] {
            let m = lab_frame_model(l.clone(), flux, DRIVE_RATIO).unwrap();
            let g = realised_gauge(&m).unwrap();
            for p in l.plaquettes() {
                let f = plaquette_flux(&g, &l, &p).unwrap();
                assert!(phase_distance(f, flux) < 1e-12, "flux {flux}: {f}");
            }
        }
    }

    #[test]
    fn synthetic_rates_are_seeded() {
        let a = synthetic_bare_rates(7, NEAREST_SIGMA_MHZ, true);
        let b = synthetic_bare_rates(7, NEAREST_SIGMA_MHZ, true);
        let c = synthetic_bare_rates(8, NEAREST_SIGMA_MHZ, true);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.overrides.len() >= 24);
    }

    #[test]
    fn masked_device_keeps_active_rates() {
        let rates = synthetic_bare_rates(3, NEAREST_SIGMA_MHZ, true);
        let mask = mask_from_labels(&[1, 2, 3, 4, 5, 8, 9, 12, 13, 14, 15, 16]);
        let l = lattice(&rates, Some(&mask), Corner::BottomLeft).unwrap();
        assert_eq!(l.nearest_bonds().count(), 12);
    }
}
