//! Experiment protocols: Aharonov–Bohm interference scans, Wannier–Stark
//! chains, Hall deflection and projective shot sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

use crate::error::Error;
use crate::evolve::{disorder_average, EvolutionResult, EvolveError, IntegratorOptions, NoiseSpec, QuantumState};
use crate::exec::{try_map_indexed, Execution};
use crate::lattice::{
    build_lattice, linear_potential, uniform_field_gauge, BareRates, Corner, GaugeField, GaugeLayout, LatticeError,
    LatticeSpec, PotentialField, Site,
};
use crate::model::{realised_gauge, ModelError, ModelSpec};
use crate::table::{fmt_f64, render};
use crate::units::trapezoid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("ring is not a closed loop of active nearest neighbours at {0} -> {1}")]
    OpenLoop(Site, Site),
    #[error("site {0} is not on the ring")]
    NotOnRing(Site),
    #[error("chain has {0} sites; an odd length is needed for a centre")]
    EvenChain(usize),
    #[error("chain is not a path of active nearest neighbours at {0} -> {1}")]
    BrokenChain(Site, Site),
    #[error("total population vanishes at t = {0} us")]
    ZeroPopulation(f64),
    #[error("field grid needs at least 3 distinct points spanning zero")]
    DegenerateFieldGrid,
    #[error("grid `{0}` must be non-empty and finite")]
    EmptyGrid(&'static str),
    #[error("number of shots must be at least 1")]
    NoShots,
    #[error("every shot was post-selected away at t = {0} us")]
    AllPostSelected(f64),
    #[error("pattern shapes differ")]
    ShapeMismatch,
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl ExperimentError {
    pub fn is_numerical(&self) -> bool {
        match self {
            ExperimentError::Evolve(e) => e.is_numerical(),
            _ => false,
        }
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        Err(ExperimentError::EmptyGrid(name))
    } else {
        Ok(())
    }
}

/// A closed loop with a start and a target site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ring {
    /// Loop sites in order; the last connects back to the first.
    pub sites: Vec<Site>,
    pub start: Site,
    pub target: Site,
}

impl Ring {
    pub fn new(lattice: &LatticeSpec, sites: Vec<Site>, start: Site, target: Site) -> Result<Self, ExperimentError> {
        if sites.len() < 3 {
            return Err(ExperimentError::EmptyGrid("ring"));
        }
        for (k, &a) in sites.iter().enumerate() {
            let b = sites[(k + 1) % sites.len()];
            let linked = lattice.is_active(a)
                && lattice.is_active(b)
                && lattice.nearest_bonds().any(|bond| bond.orientation(a, b).is_some());
            if !linked {
                return Err(ExperimentError::OpenLoop(a, b));
            }
        }
        for s in [start, target] {
            if !sites.contains(&s) {
                return Err(ExperimentError::NotOnRing(s));
            }
        }
        Ok(Ring { sites, start, target })
    }
}

/// Standard loops, laid out from the bottom-left corner of a lattice and
/// traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingPreset {
    /// Single 2×2 plaquette.
    Plaquette,
    /// Perimeter of a 3×3 block (centre removed).
    Ring8,
    /// Perimeter of a 4×4 block.
    Ring12,
}

impl RingPreset {
    pub fn side(self) -> usize {
        match self {
            RingPreset::Plaquette => 2,
            RingPreset::Ring8 => 3,
            RingPreset::Ring12 => 4,
        }
    }

    /// Perimeter (row, col) coordinates, counterclockwise from (0, 0).
    fn cells(self) -> Vec<(usize, usize)> {
        let n = self.side();
        let mut out = Vec::new();
        out.extend((0..n).map(|c| (0, c)));
        out.extend((1..n).map(|r| (r, n - 1)));
        out.extend((0..n - 1).rev().map(|c| (n - 1, c)));
        out.extend((1..n - 1).rev().map(|r| (r, 0)));
        out
    }

    /// A side×side lattice of uniform `rate` with only the loop active.
    pub fn uniform_lattice(self, rate: f64) -> Result<LatticeSpec, ExperimentError> {
        let n = self.side();
        let full = LatticeSpec::uniform(n, n, rate)?;
        let mask = self.mask(&full);
        Ok(build_lattice(n, n, &BareRates::uniform(rate), Some(&mask), Corner::BottomLeft)?)
    }

    /// Activity mask selecting the loop on `lattice`.
    pub fn mask(self, lattice: &LatticeSpec) -> Vec<bool> {
        let mut m = vec![false; lattice.site_count()];
        for (r, c) in self.cells() {
            if let Some(s) = lattice.site_at(r, c) {
                m[s.index()] = true;
            }
        }
        m
    }

    /// The loop on `lattice`, starting at the bottom-left corner with the
    /// opposite corner as target.
    pub fn ring(self, lattice: &LatticeSpec) -> Result<Ring, ExperimentError> {
        let n = self.side();
        let at = |r: usize, c: usize| {
            lattice.site_at(r, c).ok_or(LatticeError::EmptyGrid { rows: lattice.rows(), cols: lattice.cols() })
        };
        let sites = self.cells().into_iter().map(|(r, c)| at(r, c)).collect::<Result<Vec<_>, _>>()?;
        Ring::new(lattice, sites, at(0, 0)?, at(n - 1, n - 1)?)
    }

    /// Placements of the scanned phase used for gauge comparisons.
    pub fn placement(self, lattice: &LatticeSpec, kind: Placement) -> Result<Vec<PhasePlacement>, ExperimentError> {
        let n = self.side();
        let at = |r: usize, c: usize| {
            lattice.site_at(r, c).ok_or(LatticeError::EmptyGrid { rows: lattice.rows(), cols: lattice.cols() })
        };
        let p = |a: (usize, usize), b: (usize, usize), w: f64| -> Result<PhasePlacement, ExperimentError> {
            Ok(PhasePlacement { from: at(a.0, a.1)?, to: at(b.0, b.1)?, weight: w })
        };
        let top = n - 1;
        match kind {
            Placement::Lower => Ok(vec![p((0, 0), (0, 1), 1.0)?]),
            Placement::Upper => Ok(vec![p((top, 1), (top, 0), 1.0)?]),
            Placement::SplitThirds => Ok(vec![
                p((0, 0), (0, 1), 1.0 / 3.0)?,
                p((0, top), (1, top), 1.0 / 3.0)?,
                p((top, top), (top, top - 1), 1.0 / 3.0)?,
            ]),
            Placement::ZeroNet => Ok(vec![p((0, 0), (0, 1), 1.0)?, p((0, top), (1, top), -1.0)?]),
        }
    }
}

/// Named ways to distribute the scanned phase over ring bonds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Whole phase on the first bottom bond.
    Lower,
    /// Whole phase on the first top bond (counterclockwise orientation).
    Upper,
    /// A third on each of three bonds.
    SplitThirds,
    /// +φ and −φ on two bonds: no net flux.
    ZeroNet,
}

/// `weight·φ` added to the Peierls phase of `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePlacement {
    pub from: Site,
    pub to: Site,
    pub weight: f64,
}

/// Target-site population over a (phase, time) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferencePattern {
    pub phases: Vec<f64>,
    pub times: Vec<f64>,
    /// `population[phase][time]`.
    pub population: Vec<Vec<f64>>,
    pub ring: Ring,
    pub placement: Vec<PhasePlacement>,
}

impl InterferencePattern {
    /// CSV with columns `phase, time_us, population`, phase-major.
    pub fn to_csv(&self) -> Result<String, Error> {
        let header = ["phase".to_string(), "time_us".into(), "population".into()];
        render(
            &header,
            self.phases.iter().zip(&self.population).flat_map(|(phi, row)| {
                self.times.iter().zip(row).map(move |(t, p)| vec![fmt_f64(*phi), fmt_f64(*t), fmt_f64(*p)])
            }),
        )
    }

    /// Largest pointwise difference to `other`.
    pub fn max_difference(&self, other: &InterferencePattern) -> Result<f64, ExperimentError> {
        if self.phases.len() != other.phases.len() || self.times.len() != other.times.len() {
            return Err(ExperimentError::ShapeMismatch);
        }
        Ok(self
            .population
            .iter()
            .flatten()
            .zip(other.population.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Gauge of `model` with the scanned phase added on the placement bonds.
fn scanned_gauge(base: &GaugeField, placement: &[PhasePlacement], phi: f64) -> Result<GaugeField, ExperimentError> {
    let mut g = base.clone();
    for p in placement {
        g.add_phase(p.from, p.to, p.weight * phi)?;
    }
    Ok(g)
}

/// Base gauge a scan is built on: the model's own phases.
fn base_gauge(model: &ModelSpec) -> Result<GaugeField, ExperimentError> {
    match model.gauge() {
        Some(g) => {
            let mut g = g.clone();
            for l in g.links().to_vec() {
                g.set_drift(l.from, l.to, 0.0)?;
            }
            Ok(g)
        }
        None => Ok(realised_gauge(model)?),
    }
}

/// Scans the phase distributed by `placement` and records the target-site
/// population of `ring` after starting at its start site.
pub fn aharonov_bohm_scan(
    model: &ModelSpec,
    ring: &Ring,
    placement: &[PhasePlacement],
    phases: &[f64],
    times: &[f64],
    noise: &NoiseSpec,
    options: &IntegratorOptions,
    exec: Execution,
) -> Result<InterferencePattern, ExperimentError> {
    check_grid("phases", phases)?;
    check_grid("times", times)?;
    let lattice = model.lattice();
    let ring = Ring::new(lattice, ring.sites.clone(), ring.start, ring.target)?;
    for p in placement {
        lattice.find_bond(p.from, p.to).ok_or(LatticeError::NotABond(p.from, p.to))?;
    }
    let base = base_gauge(model)?;
    let psi = QuantumState::localised(lattice, ring.start)?;
    let population = try_map_indexed(exec, phases, |_, &phi| -> Result<Vec<f64>, ExperimentError> {
        let m = model.clone().with_gauge(&scanned_gauge(&base, placement, phi)?)?;
        let r = disorder_average(&m, &psi, noise, times, options, Execution::Sequential)?;
        Ok(r.series(ring.target).unwrap_or_default())
    })?;
    Ok(InterferencePattern {
        phases: phases.to_vec(),
        times: times.to_vec(),
        population,
        ring,
        placement: placement.to_vec(),
    })
}

/// Populations of a chain ordered by signed distance from its centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub path: Vec<Site>,
    pub evolution: EvolutionResult,
}

impl ChainResult {
    pub fn centre(&self) -> usize {
        self.path.len() / 2
    }

    /// Population series at signed distance `d` from the centre.
    pub fn at_distance(&self, d: i64) -> Option<Vec<f64>> {
        let k = self.centre() as i64 + d;
        let site = *self.path.get(usize::try_from(k).ok()?)?;
        self.evolution.series(site)
    }

    /// Total population farther than `d` from the centre, per time.
    pub fn beyond(&self, d: i64) -> Vec<f64> {
        let half = self.centre() as i64;
        let mut out = vec![0.0; self.evolution.times.len()];
        for k in -half..=half {
            if k.abs() > d {
                if let Some(s) = self.at_distance(k) {
                    out.iter_mut().zip(s).for_each(|(o, p)| *o += p);
                }
            }
        }
        out
    }

    /// CSV with columns `time_us, d_<offset>...` from −half to +half.
    pub fn to_csv(&self) -> Result<String, Error> {
        let half = self.centre() as i64;
        let mut header = vec!["time_us".to_string()];
        header.extend((-half..=half).map(|d| format!("d_{d}")));
        let cols: Vec<Vec<f64>> = (-half..=half).map(|d| self.at_distance(d).unwrap_or_default()).collect();
        render(
            &header,
            self.evolution.times.iter().enumerate().map(|(i, t)| {
                let mut row = vec![fmt_f64(*t)];
                row.extend(cols.iter().map(|c| fmt_f64(c[i])));
                row
            }),
        )
    }
}

/// Checks that `path` is a simple path of active nearest neighbours.
fn check_path(lattice: &LatticeSpec, path: &[Site]) -> Result<(), ExperimentError> {
    if path.len().is_multiple_of(2) {
        return Err(ExperimentError::EvenChain(path.len()));
    }
    for w in path.windows(2) {
        let ok = lattice.is_active(w[0])
            && lattice.is_active(w[1])
            && lattice.nearest_bonds().any(|b| b.orientation(w[0], w[1]).is_some());
        if !ok {
            return Err(ExperimentError::BrokenChain(w[0], w[1]));
        }
    }
    if let Some(&s) = path.iter().find(|s| !lattice.is_active(**s)) {
        return Err(EvolveError::InactiveSite(s).into());
    }
    Ok(())
}

/// Potential rising by `step` per site along `path`, zero at its centre.
pub fn chain_potential(lattice: &LatticeSpec, path: &[Site], step: f64) -> Result<PotentialField, ExperimentError> {
    let mut v = vec![0.0; lattice.site_count()];
    let centre = (path.len() / 2) as f64;
    for (k, s) in path.iter().enumerate() {
        v[s.index()] = step * (k as f64 - centre);
    }
    Ok(PotentialField::new(lattice, v)?)
}

/// Particle released at the centre of `path` under a tilt of `field` (in
/// units of the model's nominal rate) per site along the path.
pub fn wannier_stark_chain(
    model: &ModelSpec,
    path: &[Site],
    field: f64,
    times: &[f64],
    noise: &NoiseSpec,
    options: &IntegratorOptions,
) -> Result<ChainResult, ExperimentError> {
    check_grid("times", times)?;
    let lattice = model.lattice();
    check_path(lattice, path)?;
    let v = chain_potential(lattice, path, field * model.nominal_rate())?;
    let m = model.clone().with_field(&v)?;
    let psi = QuantumState::localised(lattice, path[path.len() / 2])?;
    let evolution = disorder_average(&m, &psi, noise, times, options, Execution::Sequential)?;
    Ok(ChainResult { path: path.to_vec(), evolution })
}

/// Population-weighted mean rotated coordinates per time, normalised by the
/// total population at that time.
pub fn mean_positions(
    result: &EvolutionResult,
    lattice: &LatticeSpec,
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let pos: Vec<_> = result.sites.iter().map(|s| lattice.position(*s)).collect();
    let mut xs = Vec::with_capacity(result.times.len());
    let mut ys = Vec::with_capacity(result.times.len());
    for (t, p) in result.times.iter().zip(&result.populations) {
        let total: f64 = p.iter().sum();
        if !(total > 1e-300) {
            return Err(ExperimentError::ZeroPopulation(*t));
        }
        xs.push(p.iter().zip(&pos).map(|(n, q)| n * q.x).sum::<f64>() / total);
        ys.push(p.iter().zip(&pos).map(|(n, q)| n * q.y).sum::<f64>() / total);
    }
    Ok((xs, ys))
}

/// Time-averaged transverse displacement for one (flux, field) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HallRecord {
    pub flux: f64,
    /// Field in units of the nominal rate.
    pub field: f64,
    pub ybar: f64,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Settings shared by every point of a Hall scan.
#[derive(Debug, Clone, PartialEq)]
pub struct HallSetup {
    pub layout: GaugeLayout,
    /// Averaging window in µs.
    pub window: f64,
    /// Sample spacing in µs.
    pub step: f64,
    pub noise: NoiseSpec,
    pub integrator: IntegratorOptions,
}

impl HallSetup {
    /// Window of 0.25/J sampled every nanosecond.
    pub fn for_model(model: &ModelSpec) -> Self {
        HallSetup {
            layout: GaugeLayout::Symmetric,
            window: 0.25 / model.nominal_rate(),
            step: 1e-3,
            noise: NoiseSpec::default(),
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let n = (self.window / self.step).round().max(1.0) as usize;
        crate::units::linspace(0.0, self.window, n + 1)
    }
}

/// One Hall point: flux Φ through every plaquette, force `field·J` along x̂
/// (potential −F·x), particle released at the origin corner.
pub fn hall_point(model: &ModelSpec, flux: f64, field: f64, setup: &HallSetup) -> Result<HallRecord, ExperimentError> {
    let lattice = model.lattice();
    let gauge = uniform_field_gauge(lattice, flux, setup.layout);
    let potential = linear_potential(lattice, -field * model.nominal_rate(), lattice.x_hat())?;
    let m = model.clone().with_gauge(&gauge)?.with_field(&potential)?;
    let times = setup.times();
    let psi = QuantumState::localised(lattice, lattice.origin_site())?;
    let r = disorder_average(&m, &psi, &setup.noise, &times, &setup.integrator, Execution::Sequential)?;
    let (x, y) = mean_positions(&r, lattice)?;
    let span = times[times.len() - 1] - times[0];
    let ybar = trapezoid(&times, &y) / span;
    Ok(HallRecord { flux, field, ybar, times, x, y })
}

/// Hall scan over `fluxes × fields`, flux-major.
pub fn hall_experiment(
    model: &ModelSpec,
    fluxes: &[f64],
    fields: &[f64],
    setup: &HallSetup,
    exec: Execution,
) -> Result<Vec<HallRecord>, ExperimentError> {
    check_grid("fluxes", fluxes)?;
    check_grid("fields", fields)?;
    if !(setup.window > 0.0 && setup.step > 0.0 && setup.step <= setup.window) {
        return Err(ExperimentError::EmptyGrid("times"));
    }
    let cells: Vec<(f64, f64)> = fluxes.iter().flat_map(|&p| fields.iter().map(move |&f| (p, f))).collect();
    try_map_indexed(exec, &cells, |_, &(p, f)| hall_point(model, p, f, setup))
}

/// CSV with columns `flux_rad, F_over_J, ybar`.
pub fn hall_csv(records: &[HallRecord]) -> Result<String, Error> {
    let header = ["flux_rad".to_string(), "F_over_J".into(), "ybar".into()];
    render(&header, records.iter().map(|r| vec![fmt_f64(r.flux), fmt_f64(r.field), fmt_f64(r.ybar)]))
}

/// Ordinary least-squares line through ⟨ȳ⟩(F).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HallCoefficient {
    pub flux: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Hall coefficient Δ⟨ȳ⟩/ΔF from records at one flux.
pub fn hall_coefficient(records: &[HallRecord]) -> Result<HallCoefficient, ExperimentError> {
    let fields: Vec<f64> = records.iter().map(|r| r.field).collect();
    let mut distinct = fields.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let spans_zero = distinct.first().is_some_and(|&a| a <= 0.0) && distinct.last().is_some_and(|&b| b >= 0.0);
    if distinct.len() < 3 || !spans_zero {
        return Err(ExperimentError::DegenerateFieldGrid);
    }
    let n = records.len() as f64;
    let mf = fields.iter().sum::<f64>() / n;
    let my = records.iter().map(|r| r.ybar).sum::<f64>() / n;
    let sxx: f64 = fields.iter().map(|f| (f - mf).powi(2)).sum();
    let sxy: f64 = records.iter().map(|r| (r.field - mf) * (r.ybar - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mf;
    Ok(HallCoefficient {
        flux: records[0].flux,
        slope,
        intercept,
        residuals: records.iter().map(|r| r.ybar - intercept - slope * r.field).collect(),
    })
}

/// Groups records by flux (in order of first appearance) and fits each.
pub fn hall_coefficients(records: &[HallRecord]) -> Result<Vec<HallCoefficient>, ExperimentError> {
    let mut fluxes: Vec<f64> = Vec::new();
    for r in records {
        if !fluxes.contains(&r.flux) {
            fluxes.push(r.flux);
        }
    }
    fluxes
        .iter()
        .map(|&p| {
            let group: Vec<HallRecord> = records.iter().filter(|r| r.flux == p).cloned().collect();
            hall_coefficient(&group)
        })
        .collect()
}

/// Shot-noise estimate of the site populations.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotEstimate {
    pub times: Vec<f64>,
    pub sites: Vec<Site>,
    /// Post-selected frequency of each site, `[time][site]`.
    pub populations: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// Shots surviving post-selection per time.
    pub kept: Vec<u64>,
}

/// Draws `shots` projective outcomes per time (one site or vacuum), keeps
/// the single-excitation shots and returns normalised frequencies with
/// binomial standard errors. Time index `i` uses ChaCha stream `i`.
pub fn sample_shots(result: &EvolutionResult, shots: u64, seed: u64) -> Result<ShotEstimate, ExperimentError> {
    if shots == 0 {
        return Err(ExperimentError::NoShots);
    }
    let mut populations = Vec::with_capacity(result.times.len());
    let mut std_errors = Vec::with_capacity(result.times.len());
    let mut kept = Vec::with_capacity(result.times.len());
    for (i, (t, p)) in result.times.iter().zip(&result.populations).enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let probs: Vec<f64> = p.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let mut remaining = shots;
        let mut mass = probs.iter().sum::<f64>().max(1.0);
        let mut counts = Vec::with_capacity(probs.len());
        for &q in &probs {
            let c = if remaining == 0 || mass <= 0.0 {
                0
            } else {
                let r = (q / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, r).expect("probability in [0, 1]").sample(&mut rng)
            };
            counts.push(c);
            remaining -= c;
            mass -= q;
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(ExperimentError::AllPostSelected(*t));
        }
        let n = total as f64;
        let est: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        std_errors.push(est.iter().map(|&q| (q * (1.0 - q) / n).sqrt()).collect());
        populations.push(est);
        kept.push(total);
    }
    Ok(ShotEstimate { times: result.times.clone(), sites: result.sites.clone(), populations, std_errors, kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{EvolutionMetadata, Method};
    use crate::model::ModelVariant;
    use std::f64::consts::{PI, SQRT_2};

    fn s(label: usize) -> Site {
        Site::from_label(label).unwrap()
    }

    fn result(populations: Vec<Vec<f64>>, sites: Vec<Site>) -> EvolutionResult {
        let times: Vec<f64> = (0..populations.len()).map(|k| k as f64).collect();
        let total = populations.iter().map(|p| p.iter().sum()).collect();
        EvolutionResult {
            times,
            sites,
            populations,
            total,
            metadata: EvolutionMetadata {
                variant: ModelVariant::RotatingFrameUniform,
                method: Method::Eigendecomposition,
                tolerance: None,
                seed: None,
                samples: 1,
                steps: 0,
            },
        }
    }

    #[test]
    fn presets_are_counterclockwise_loops() {
        let l = RingPreset::Ring8.uniform_lattice(1.0).unwrap();
        assert_eq!(l.active_sites().len(), 8);
        let r = RingPreset::Ring8.ring(&l).unwrap();
        let labels: Vec<usize> = r.sites.iter().map(|s| s.label()).collect();
        assert_eq!(labels, [1, 2, 3, 6, 9, 8, 7, 4]);
        assert_eq!((r.start, r.target), (s(1), s(9)));
        let up = RingPreset::Ring8.placement(&l, Placement::Upper).unwrap();
        assert_eq!((up[0].from, up[0].to), (s(8), s(7)));
        let thirds = RingPreset::Ring8.placement(&l, Placement::SplitThirds).unwrap();
        let pairs: Vec<(usize, usize)> = thirds.iter().map(|p| (p.from.label(), p.to.label())).collect();
        assert_eq!(pairs, [(1, 2), (3, 6), (9, 8)]);
    }

    #[test]
    fn open_ring_rejected() {
        let l = LatticeSpec::uniform(2, 2, 1.0).unwrap();
        let r = Ring::new(&l, vec![s(1), s(2), s(3)], s(1), s(3));
        assert!(matches!(r, Err(ExperimentError::OpenLoop(..))));
        let r = Ring::new(&l, vec![s(1), s(2), s(4), s(3)], s(1), s(5));
        assert!(r.is_err());
    }

    #[test]
    fn plaquette_caging_and_transfer() {
        let l = LatticeSpec::uniform(2, 2, 1.0).unwrap();
        let m = ModelSpec::rotating_frame_uniform(l.clone(), GaugeField::zero(&l), 1.0).unwrap();
        let ring = RingPreset::Plaquette.ring(&l).unwrap();
        let place = RingPreset::Plaquette.placement(&l, Placement::Lower).unwrap();
        let times = crate::units::linspace(0.0, 5.0, 51);
        let p = aharonov_bohm_scan(
            &m,
            &ring,
            &place,
            &[0.0, PI],
            &times,
            &NoiseSpec::default(),
            &Default::default(),
            Execution::Sequential,
        )
        .unwrap();
        for (t, v) in times.iter().zip(&p.population[0]) {
            assert!((v - t.sin().powi(4)).abs() < 1e-10);
        }
        assert!(p.population[1].iter().all(|v| *v < 1e-10));
        let csv = p.to_csv().unwrap();
        assert!(csv.starts_with("phase,time_us,population\n0,0,"));
        assert_eq!(csv.lines().count(), 1 + 2 * 51);
    }

    #[test]
    fn even_chain_rejected() {
        let l = LatticeSpec::uniform(1, 4, 1.0).unwrap();
        let m = ModelSpec::rotating_frame_uniform(l.clone(), GaugeField::zero(&l), 1.0).unwrap();
        let path: Vec<Site> = (1..=4).map(s).collect();
        assert_eq!(
            wannier_stark_chain(&m, &path, 1.0, &[0.0], &NoiseSpec::default(), &Default::default()).unwrap_err(),
            ExperimentError::EvenChain(4)
        );
    }

    #[test]
    fn mean_positions_examples() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        let sites = l.active_sites().to_vec();
        let mut corner = vec![0.0; 16];
        corner[0] = 1.0;
        let mut far = vec![0.0; 16];
        far[15] = 1.0;
        let uniform = vec![0.5 / 16.0; 16];
        let r = result(vec![corner, far, uniform], sites);
        let (x, y) = mean_positions(&r, &l).unwrap();
        assert_eq!((x[0], y[0]), (0.0, 0.0));
        assert!((x[1] - 3.0 * SQRT_2).abs() < 1e-12 && y[1].abs() < 1e-12);
        assert!((x[2] - 1.5 * SQRT_2).abs() < 1e-12 && y[2].abs() < 1e-12);
        let empty = result(vec![vec![0.0; 16]], l.active_sites().to_vec());
        assert_eq!(mean_positions(&empty, &l), Err(ExperimentError::ZeroPopulation(0.0)));
    }

    #[test]
    fn linear_slope_is_exact() {
        let recs: Vec<HallRecord> = [-0.4, -0.2, 0.0, 0.2, 0.4]
            .iter()
            .map(|&f| HallRecord { flux: 0.5, field: f, ybar: 0.7 * f + 0.1, times: vec![], x: vec![], y: vec![] })
            .collect();
        let c = hall_coefficient(&recs).unwrap();
        assert!((c.slope - 0.7).abs() < 1e-12);
        assert!((c.intercept - 0.1).abs() < 1e-12);
        assert!(hall_coefficient(&recs[..2]).is_err());
        assert!(hall_coefficient(&recs[2..]).is_ok());
        assert!(hall_coefficient(&recs[3..]).is_err());
    }

    #[test]
    fn shots_on_a_single_site_all_land_there() {
        let r = result(vec![vec![0.0, 1.0, 0.0]], vec![s(1), s(2), s(3)]);
        let e = sample_shots(&r, 500, 3).unwrap();
        assert_eq!(e.populations[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(e.kept[0], 500);
        assert_eq!(sample_shots(&r, 0, 3), Err(ExperimentError::NoShots));
    }

    #[test]
    fn shots_converge_and_are_deterministic() {
        let r = result(vec![vec![0.2, 0.5, 0.1], vec![0.3, 0.3, 0.3]], vec![s(1), s(2), s(3)]);
        let a = sample_shots(&r, 1_000_000, 11).unwrap();
        let b = sample_shots(&r, 1_000_000, 11).unwrap();
        assert_eq!(a, b);
        for (t, p) in r.populations.iter().enumerate() {
            let total: f64 = p.iter().sum();
            for (k, pk) in p.iter().enumerate() {
                let exact = pk / total;
                assert!((a.populations[t][k] - exact).abs() < 3.0 * a.std_errors[t][k].max(1e-4));
            }
        }
        let vac = result(vec![vec![0.0, 0.0]], vec![s(1), s(2)]);
        assert!(matches!(sample_shots(&vac, 10, 0), Err(ExperimentError::AllPostSelected(_))));
    }
}
