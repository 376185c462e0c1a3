//! Drive calibration in simulation: hopping-rate fits, per-site amplitude
//! calibration, the effective-coupling map and the tone phase offset scan.

use serde::Serialize;
use thiserror::Error;

use crate::evolve::{evolve_schrodinger, EvolutionResult, EvolveError, IntegratorOptions, QuantumState};
use crate::exec::{try_map_indexed, Execution};
use crate::lattice::{LatticeError, LatticeSpec, Plaquette, Site};
use crate::model::bessel::first_order_peak;
use crate::model::{effective_rate, BondDrive, DriveTone, ModelError, ModelSpec};
use crate::units::{linspace, trapezoid, wrap_phase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("signal is flat; no oscillation to fit")]
    FlatSignal,
    #[error("need at least 4 finite samples on an increasing time grid")]
    TooFewSamples,
    #[error("site {0} is not part of the evolution result")]
    UnknownSite(Site),
    #[error("target rate {target} rad/us is not attainable with bare rate {bare} rad/us")]
    Unattainable { target: f64, bare: f64 },
    #[error("site {0} drives no bond")]
    NoDrivenBond(Site),
    #[error("invalid calibration options: {0}")]
    InvalidOptions(&'static str),
    #[error("phase grid needs at least 3 points")]
    PhaseGrid,
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl CalibrationError {
    pub fn is_numerical(&self) -> bool {
        match self {
            CalibrationError::FlatSignal => true,
            CalibrationError::Evolve(e) => e.is_numerical(),
            _ => false,
        }
    }
}

/// Least-squares fit of `P(t) = a·sin²(J t + c) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoppingFit {
    pub rate: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

/// Projection of `values` on {1, cos 2Jt, sin 2Jt}; returns the
/// coefficients and the sum of squared residuals.
fn project(times: &[f64], values: &[f64], rate: f64) -> ([f64; 3], f64) {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (&t, &y) in times.iter().zip(values) {
        let (s, c) = (2.0 * rate * t).sin_cos();
        let row = [1.0, c, s];
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve3(ata, atb).unwrap_or([0.0; 3]);
    let ssr = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let (s, c) = (2.0 * rate * t).sin_cos();
            let r = y - coef[0] - coef[1] * c - coef[2] * s;
            r * r
        })
        .sum();
    (coef, ssr)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let v = nalgebra::Vector3::from(b);
    m.lu().solve(&v).map(|x| [x[0], x[1], x[2]])
}

/// Fits `a·sin²(J t + c) + b` to a sampled signal.
///
/// The rate is searched over [0.75π/T, π/(2Δt)] (from under one period to
/// the Nyquist limit) on a grid fine enough to bracket the global minimum,
/// then refined by golden-section search.
pub fn fit_sine_squared(times: &[f64], values: &[f64]) -> Result<HoppingFit, CalibrationError> {
    let n = times.len();
    let ok = n >= 4
        && n == values.len()
        && times.iter().chain(values).all(|v| v.is_finite())
        && times.windows(2).all(|w| w[1] > w[0]);
    if !ok {
        return Err(CalibrationError::TooFewSamples);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread < 1e-9 {
        return Err(CalibrationError::FlatSignal);
    }
    let span = times[n - 1] - times[0];
    let dt = span / (n - 1) as f64;
    let lo = 0.75 * std::f64::consts::PI / span;
    let hi = std::f64::consts::PI / (2.0 * dt);
    let points = (8 * n).clamp(400, 20_000);
    let grid = linspace(lo, hi, points);
    let scores: Vec<f64> = grid.iter().map(|&j| project(times, values, j).1).collect();
    let best = scores.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(points - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |j: f64| project(times, values, j).1;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let rate = 0.5 * (a + b);
    let (coef, ssr) = project(times, values, rate);
    let half = coef[1].hypot(coef[2]);
    if half < 1e-9 {
        return Err(CalibrationError::FlatSignal);
    }
    Ok(HoppingFit {
        rate,
        amplitude: 2.0 * half,
        phase: 0.5 * coef[2].atan2(-coef[1]),
        offset: coef[0] - half,
        residual_rms: (ssr / n as f64).sqrt(),
    })
}

/// Hopping rate from the population of `site` in `result`.
pub fn fit_hopping_rate(result: &EvolutionResult, site: Site) -> Result<HoppingFit, CalibrationError> {
    let series = result.series(site).ok_or(CalibrationError::UnknownSite(site))?;
    fit_sine_squared(&result.times, &series)
}

/// Amplitude grid and simulation settings for calibration runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Number of amplitudes in the sweep.
    pub grid_points: usize,
    /// Sweep window in units of Ω/|δ|.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Simulated duration in half-periods π/J of the predicted rate.
    pub half_periods: f64,
    /// Samples per simulated trace.
    pub samples: usize,
    pub integrator: IntegratorOptions,
    pub execution: Execution,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            grid_points: 12,
            ratio_min: 0.2,
            ratio_max: 1.2,
            half_periods: 2.5,
            samples: 301,
            integrator: IntegratorOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl CalibrationOptions {
    fn validate(&self) -> Result<(), CalibrationError> {
        if self.grid_points < 3 {
            return Err(CalibrationError::InvalidOptions("grid needs at least 3 amplitudes"));
        }
        if !(self.ratio_min > 0.0 && self.ratio_max > self.ratio_min && self.ratio_max.is_finite()) {
            return Err(CalibrationError::InvalidOptions("ratio window must satisfy 0 < min < max"));
        }
        if !(self.half_periods >= 1.5) || self.samples < 16 {
            return Err(CalibrationError::InvalidOptions("traces must cover 1.5 periods with >= 16 samples"));
        }
        Ok(())
    }
}

/// One end of a simulated two-site pair: its own drive, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectatorTone {
    pub amplitude: f64,
    /// Signed drive frequency of the partner's own tone, rad/µs.
    pub frequency: f64,
}

/// Simulates an isolated pair: the driver, detuned by `detuning` from its
/// partner, carries a tone of amplitude `amplitude`; the partner optionally
/// carries its own off-resonant tone. Returns the fitted transfer rate.
pub fn two_site_rate(
    bare: f64,
    detuning: f64,
    amplitude: f64,
    partner: Option<SpectatorTone>,
    options: &CalibrationOptions,
) -> Result<HoppingFit, CalibrationError> {
    let lattice = LatticeSpec::uniform(1, 2, bare)?;
    let (a, b) = (Site::from_index(0), Site::from_index(1));
    let mut tones = vec![DriveTone::new(a, amplitude, detuning, 0.0)];
    let mut predicted = effective_rate(bare, amplitude, detuning)?;
    if let Some(p) = partner {
        tones.push(DriveTone::new(b, p.amplitude, p.frequency, 0.0));
        predicted = crate::model::effective_rate_dual(bare, amplitude, detuning, p.amplitude, p.frequency)?;
    }
    let model = ModelSpec::lab_frame(lattice.clone(), vec![detuning, 0.0], tones, predicted.abs())?;
    let t_max = options.half_periods * std::f64::consts::PI / predicted.abs().max(1e-3 * bare.abs()).max(1e-9);
    let times = linspace(0.0, t_max, options.samples);
    let psi = QuantumState::localised(&lattice, a)?;
    let result = evolve_schrodinger(&model, &psi, &times, &options.integrator)?;
    fit_hopping_rate(&result, b)
}

/// A bond as seen from its driving site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenBond {
    pub driver: usize,
    pub partner: usize,
    pub bare_rate: f64,
    pub detuning: f64,
}

/// Result of calibrating one drive tone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeCalibration {
    pub site: usize,
    pub amplitude: f64,
    pub ratio: f64,
    pub target_rate: f64,
    pub bonds: Vec<DrivenBond>,
    /// (amplitude, mean fitted rate) sweep points.
    pub sweep: Vec<(f64, f64)>,
    /// Quadratic coefficients q0 + q1·Ω + q2·Ω².
    pub quadratic: [f64; 3],
}

fn quadratic_fit(points: &[(f64, f64)]) -> [f64; 3] {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(x, y) in points {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    solve3(ata, atb).unwrap_or([0.0; 3])
}

/// Smallest root of `q(x) = target` in `[lo, hi]`.
fn smallest_root(q: [f64; 3], target: f64, lo: f64, hi: f64) -> Option<f64> {
    let (c, b, a) = (q[0] - target, q[1], q[2]);
    let mut roots = Vec::new();
    if a.abs() < 1e-300 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            // numerically stable pair
            let qq = -0.5 * (b + b.signum() * s);
            if qq != 0.0 {
                roots.push(c / qq);
            }
            roots.push(qq / a);
        }
    }
    roots.into_iter().filter(|r| r.is_finite() && *r >= lo && *r <= hi).min_by(|a, b| a.total_cmp(b))
}

/// Tone amplitude that sets the transfer rate of `bonds` (all driven by
/// the same site at the same frequency) to `target_rate`, averaging the
/// fitted rates when the site drives more than one bond.
pub fn calibrate_bonds(
    bonds: &[DrivenBond],
    target_rate: f64,
    options: &CalibrationOptions,
) -> Result<AmplitudeCalibration, CalibrationError> {
    options.validate()?;
    let first = *bonds.first().ok_or(CalibrationError::InvalidOptions("no bonds to calibrate"))?;
    let detuning = first.detuning;
    let bare_mean = bonds.iter().map(|b| b.bare_rate).sum::<f64>() / bonds.len() as f64;
    if !(target_rate.is_finite() && target_rate >= 0.0) {
        return Err(CalibrationError::Unattainable { target: target_rate, bare: bare_mean });
    }
    let (_, peak) = first_order_peak();
    let weakest = bonds.iter().map(|b| b.bare_rate).fold(f64::INFINITY, f64::min);
    if target_rate >= peak * weakest {
        return Err(CalibrationError::Unattainable { target: target_rate, bare: weakest });
    }
    let empty = AmplitudeCalibration {
        site: first.driver,
        amplitude: 0.0,
        ratio: 0.0,
        target_rate,
        bonds: bonds.to_vec(),
        sweep: Vec::new(),
        quadratic: [0.0; 3],
    };
    if target_rate == 0.0 {
        return Ok(empty);
    }
    let scale = detuning.abs();
    let amplitudes = linspace(options.ratio_min * scale, options.ratio_max * scale, options.grid_points);
    let jobs: Vec<(f64, DrivenBond)> = amplitudes.iter().flat_map(|&a| bonds.iter().map(move |&b| (a, b))).collect();
    let rates = try_map_indexed(options.execution, &jobs, |_, &(amp, bond)| {
        two_site_rate(bond.bare_rate, bond.detuning, amp, None, options).map(|f| f.rate)
    })?;
    let sweep: Vec<(f64, f64)> = amplitudes
        .iter()
        .zip(rates.chunks(bonds.len()))
        .map(|(&a, r)| (a, r.iter().sum::<f64>() / r.len() as f64))
        .collect();
    let quadratic = quadratic_fit(&sweep);
    // Targets just above the sweep window are reached by extrapolating the
    // quadratic, never past the first-order maximum.
    let reach = amplitudes[amplitudes.len() - 1].max(first_order_peak().0 * scale);
    let amplitude = smallest_root(quadratic, target_rate, 0.0, reach)
        .ok_or(CalibrationError::Unattainable { target: target_rate, bare: bare_mean })?;
    Ok(AmplitudeCalibration { amplitude, ratio: amplitude / scale, sweep, quadratic, ..empty })
}

/// Calibrates a single bond of `lattice` driven at `tone_freq` (signed
/// detuning of the driver `bond.from` relative to `bond.to`).
pub fn calibrate_amplitude(
    lattice: &LatticeSpec,
    driver: Site,
    partner: Site,
    target_rate: f64,
    tone_freq: f64,
    options: &CalibrationOptions,
) -> Result<AmplitudeCalibration, CalibrationError> {
    let (k, _) = lattice.find_bond(driver, partner).ok_or(LatticeError::NotABond(driver, partner))?;
    let bond = DrivenBond {
        driver: driver.label(),
        partner: partner.label(),
        bare_rate: lattice.bonds()[k].bare_rate,
        detuning: tone_freq,
    };
    calibrate_bonds(&[bond], target_rate, options)
}

/// Bonds driven by each tone of a driven model, with signed detunings
/// measured from the driver.
pub fn driven_bonds(model: &ModelSpec) -> Result<Vec<Vec<DrivenBond>>, CalibrationError> {
    let drives = model.bond_drives().ok_or(ModelError::WrongVariant("calibration", model.variant()))?;
    let onsite = model.onsite().unwrap_or(&[]);
    let mut out = vec![Vec::new(); model.tones().len()];
    for (b, d) in model.lattice().bonds().iter().zip(drives) {
        if let BondDrive::Tone { tone, driver_is_from, .. } = *d {
            let (drv, ptn) = if driver_is_from { (b.from, b.to) } else { (b.to, b.from) };
            out[tone].push(DrivenBond {
                driver: drv.label(),
                partner: ptn.label(),
                bare_rate: b.bare_rate,
                detuning: onsite[drv.index()] - onsite[ptn.index()],
            });
        }
    }
    Ok(out)
}

/// Calibrates every tone of a driven model to `target_rate` and returns
/// the model with the new amplitudes.
pub fn calibrate_model(
    model: &ModelSpec,
    target_rate: f64,
    options: &CalibrationOptions,
) -> Result<(ModelSpec, Vec<AmplitudeCalibration>), CalibrationError> {
    let groups = driven_bonds(model)?;
    let mut tones = model.tones().to_vec();
    let mut reports = Vec::with_capacity(tones.len());
    for (tone, bonds) in tones.iter_mut().zip(&groups) {
        if bonds.is_empty() {
            return Err(CalibrationError::NoDrivenBond(tone.site));
        }
        let cal = calibrate_bonds(bonds, target_rate, options)?;
        tone.amplitude = cal.amplitude;
        reports.push(cal);
    }
    Ok((model.clone().with_tones(tones)?, reports))
}

/// Fitted rates of one bond with only the driver modulated and with both
/// ends carrying their tones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BondRate {
    pub driver: usize,
    pub partner: usize,
    pub single_tone: f64,
    pub dual_tone: f64,
    pub partner_modulated: bool,
}

/// Effective rate of every tone-driven nearest bond, simulated as an
/// isolated pair with all tones present. Bonds whose partner has no tone
/// keep the single-tone rate.
pub fn effective_coupling_map(
    model: &ModelSpec,
    options: &CalibrationOptions,
) -> Result<Vec<BondRate>, CalibrationError> {
    let groups = driven_bonds(model)?;
    let tones = model.tones();
    let jobs: Vec<(DrivenBond, f64, Option<SpectatorTone>)> = groups
        .iter()
        .zip(tones)
        .flat_map(|(bonds, t)| {
            bonds.iter().map(move |b| {
                let partner = tones
                    .iter()
                    .find(|u| u.site.label() == b.partner)
                    .map(|u| SpectatorTone { amplitude: u.amplitude, frequency: u.frequency });
                (*b, t.amplitude, partner)
            })
        })
        .collect();
    try_map_indexed(options.execution, &jobs, |_, &(bond, amp, partner)| {
        let single = two_site_rate(bond.bare_rate, bond.detuning, amp, None, options)?.rate;
        let dual = match partner {
            Some(p) if p.amplitude != 0.0 => two_site_rate(bond.bare_rate, bond.detuning, amp, Some(p), options)?.rate,
            _ => single,
        };
        Ok(BondRate {
            driver: bond.driver,
            partner: bond.partner,
            single_tone: single,
            dual_tone: dual,
            partner_modulated: partner.is_some_and(|p| p.amplitude != 0.0),
        })
    })
}

/// Per-site amplitudes and per-bond rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub target_rate: f64,
    pub sites: Vec<AmplitudeCalibration>,
    pub bonds: Vec<BondRate>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String, crate::Error> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Result of a plaquette phase scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOffset {
    /// Estimated phase error of the scanned tone, radians.
    pub offset: f64,
    /// Time-averaged opposite-corner population per scanned phase.
    pub scores: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Scans an extra phase on the tone of `tone_site` around a driven
/// plaquette and returns the phase error of that tone: the negative of
/// the scan phase at which the opposite corner fills best (zero realised
/// flux). `delay` is an injected error added to the tone phase, standing in
/// for an uncalibrated line delay.
#[allow(clippy::too_many_arguments)]
pub fn phase_offset_scan(
    model: &ModelSpec,
    plaquette: Plaquette,
    tone_site: Site,
    delay: f64,
    phases: &[f64],
    times: &[f64],
    options: &IntegratorOptions,
    exec: Execution,
) -> Result<PhaseOffset, CalibrationError> {
    if phases.len() < 3 {
        return Err(CalibrationError::PhaseGrid);
    }
    let lattice = model.lattice();
    let corners = plaquette.sites(lattice);
    if corners.iter().any(|s| !lattice.is_active(*s)) {
        return Err(LatticeError::NotAPlaquette.into());
    }
    let tone =
        model.tones().iter().position(|t| t.site == tone_site).ok_or(CalibrationError::NoDrivenBond(tone_site))?;
    let psi = QuantumState::localised(lattice, corners[0])?;
    let scores = try_map_indexed(exec, phases, |_, &phi| -> Result<f64, CalibrationError> {
        let mut tones = model.tones().to_vec();
        tones[tone].phase += phi + delay;
        let m = model.clone().with_tones(tones)?;
        let r = evolve_schrodinger(&m, &psi, times, options)?;
        let series = r.series(corners[2]).ok_or(CalibrationError::UnknownSite(corners[2]))?;
        let span = times[times.len() - 1] - times[0];
        Ok(trapezoid(times, &series) / span.max(f64::MIN_POSITIVE))
    })?;
    let best = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let mut peak = phases[best];
    if best > 0 && best + 1 < phases.len() {
        let (y0, y1, y2) = (scores[best - 1], scores[best], scores[best + 1]);
        let h = phases[best + 1] - phases[best];
        let denom = y0 - 2.0 * y1 + y2;
        if denom < 0.0 && (phases[best] - phases[best - 1] - h).abs() < 1e-9 * h.abs().max(1.0) {
            peak += 0.5 * h * (y0 - y2) / denom;
        }
    }
    Ok(PhaseOffset { offset: wrap_phase(-peak), scores, phases: phases.to_vec() })
}
