//! Runs one configured experiment and writes its artifacts.
//!
//! Every artifact is computed in memory first; files only appear once the
//! whole run has succeeded, and they are moved into place from a staging
//! directory so a failed write leaves nothing behind.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use gaugesim::calibrate::{
    calibrate_bonds, fit_hopping_rate, CalibrationError, CalibrationOptions, DrivenBond, HoppingFit, SpectatorTone,
};
use gaugesim::evolve::{evolve_schrodinger, IntegratorOptions, NoiseSpec, QuantumState};
use gaugesim::exec::{with_threads, Execution};
use gaugesim::experiments::{
    aharonov_bohm_scan, hall_coefficients, hall_csv, hall_experiment, sample_shots, wannier_stark_chain, HallSetup,
    InterferencePattern, Placement, Ring, RingPreset, ShotEstimate,
};
use gaugesim::lattice::{
    build_lattice, gauge_transform, loop_flux, uniform_field_gauge, BareRates, Corner, GaugeLayout, LatticeSpec,
    ScalarField, Site,
};
use gaugesim::model::{device, effective_rate, effective_rate_dual, realised_gauge, DriveTone, ModelSpec};
use gaugesim::semiclassical::{eigencheck, hall_velocity_ensemble, reconstruct_corner, Linearization};
use gaugesim::table::{fmt_f64, render};
use gaugesim::units::{angular_to_mhz, linspace, mhz_to_angular, ns_to_us, phase_distance, trapezoid};

use crate::config::{
    ExperimentKind, LayoutCode, LinearizationCode, OriginCode, PlacementCode, RingCode, RunConfig, VariantCode,
};
use crate::CliError;

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Already resolved from the flag or `GAUGESIM_THREADS`.
    pub threads: Option<usize>,
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

const DEFAULT_OUT: &str = "out";
const MANIFEST: &str = "manifest.json";

/// Applies overrides, computes every artifact and writes them to the
/// output directory together with `manifest.json`.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunOutput, CliError> {
    let mut cfg = config.clone();
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let threads = options.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(CliError::Invalid("threads must be at least 1".into()));
    }
    let dir = options
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut artifacts = with_threads(threads, || compute(&cfg, Execution::default()))?;
    artifacts.push(manifest(&cfg, &artifacts)?);
    write_all(&dir, &artifacts)?;
    Ok(RunOutput { dir, artifacts })
}

/// Computes the artifacts of `cfg` without touching the filesystem.
pub fn compute(cfg: &RunConfig, exec: Execution) -> Result<Vec<Artifact>, CliError> {
    let ctx = Context::new(cfg, exec);
    match cfg.experiment {
        ExperimentKind::TwoSite => ctx.two_site(),
        ExperimentKind::AbScan => ctx.ab_scan(),
        ExperimentKind::GaugeCheck => ctx.gauge_check(),
        ExperimentKind::WannierStark => ctx.wannier_stark(),
        ExperimentKind::Hall => ctx.hall(),
        ExperimentKind::Semiclassical => ctx.semiclassical(),
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    bytes: usize,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(cfg: &RunConfig, artifacts: &[Artifact]) -> Result<Artifact, CliError> {
    let entries: Vec<ManifestEntry> = artifacts
        .iter()
        .map(|a| ManifestEntry { name: &a.name, bytes: a.contents.len(), sha256: sha256_hex(a.contents.as_bytes()) })
        .collect();
    let value = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config_sha256": cfg.hash()?,
        "artifacts": entries,
    });
    Ok(Artifact { name: MANIFEST.into(), contents: pretty(&value)? })
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    let io = |what: &str, p: &Path, e: std::io::Error| CliError::Io(format!("{what} {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io("cannot create", dir, e))?;
    let staging = dir.join(format!(".staging-{}", std::process::id()));
    fs::create_dir_all(&staging).map_err(|e| io("cannot create", &staging, e))?;
    let result = (|| {
        for a in artifacts {
            let p = staging.join(&a.name);
            fs::write(&p, &a.contents).map_err(|e| io("cannot write", &p, e))?;
        }
        for a in artifacts {
            let (from, to) = (staging.join(&a.name), dir.join(&a.name));
            fs::rename(&from, &to).map_err(|e| io("cannot move into", &to, e))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

fn csv_artifact(name: &str, csv: Result<String, gaugesim::Error>) -> Result<Artifact, CliError> {
    Ok(artifact(name, csv?))
}

/// Labels of the device periphery path used for chains on the 4×4 lattice.
const PERIPHERY_PATH: [usize; 11] = [9, 5, 1, 2, 3, 4, 8, 12, 16, 15, 14];

struct Context<'a> {
    cfg: &'a RunConfig,
    exec: Execution,
    integrator: IntegratorOptions,
    rate: f64,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a RunConfig, exec: Execution) -> Self {
        Context {
            cfg,
            exec,
            integrator: IntegratorOptions {
                tolerance: cfg.tolerance,
                max_steps: cfg.max_steps.unwrap_or(IntegratorOptions::default().max_steps),
            },
            rate: mhz_to_angular(cfg.model.hopping_mhz),
        }
    }

    fn origin(&self) -> Corner {
        let code = self.cfg.lattice.as_ref().map(|l| l.origin).unwrap_or_default();
        match code {
            OriginCode::Auto if self.cfg.is_driven() => Corner::TopLeft,
            OriginCode::Auto | OriginCode::BottomLeft => Corner::BottomLeft,
            OriginCode::BottomRight => Corner::BottomRight,
            OriginCode::TopLeft => Corner::TopLeft,
            OriginCode::TopRight => Corner::TopRight,
        }
    }

    fn layout(&self) -> GaugeLayout {
        match self.cfg.gauge.layout {
            LayoutCode::Symmetric => GaugeLayout::Symmetric,
            LayoutCode::Landau => GaugeLayout::Landau,
        }
    }

    fn bare(&self) -> f64 {
        mhz_to_angular(self.cfg.model.bare_rate_mhz)
    }

    fn times(&self, default_ns: (f64, f64, usize)) -> Vec<f64> {
        let ns = match &self.cfg.grids.times_ns {
            Some(g) => g.values(),
            None => linspace(default_ns.0, default_ns.1, default_ns.2),
        };
        ns.into_iter().map(ns_to_us).collect()
    }

    /// Mask from `lattice.inactive`, if any.
    fn config_mask(&self, rows: usize, cols: usize) -> Vec<bool> {
        let mut mask = vec![true; rows * cols];
        if let Some(l) = &self.cfg.lattice {
            for &label in &l.inactive {
                mask[label - 1] = false;
            }
        }
        mask
    }

    fn device_rates(&self) -> BareRates {
        match &self.cfg.model.disorder {
            Some(d) => device::synthetic_bare_rates(self.cfg.seed, d.nearest_sigma_mhz, d.next_nearest),
            None => BareRates::uniform(self.bare()),
        }
    }

    fn device_lattice(&self, mask: &[bool]) -> Result<LatticeSpec, CliError> {
        Ok(device::lattice(&self.device_rates(), Some(mask), self.origin())?)
    }

    /// The lattice given in the file, or `rows × cols` with uniform rates.
    fn plain_lattice(&self, rows: usize, cols: usize) -> Result<LatticeSpec, CliError> {
        let (rows, cols) = self.cfg.lattice.as_ref().map(|l| (l.rows, l.cols)).unwrap_or((rows, cols));
        if self.cfg.on_device() {
            return self.device_lattice(&self.config_mask(rows, cols));
        }
        let mask = self.config_mask(rows, cols);
        Ok(build_lattice(rows, cols, &BareRates::uniform(self.bare()), Some(&mask), self.origin())?)
    }

    /// Model of the configured variant on `lattice` with flux `flux` per plaquette.
    fn model(&self, lattice: LatticeSpec, flux: f64) -> Result<ModelSpec, CliError> {
        let m = &self.cfg.model;
        let driven_tones = |l: &LatticeSpec| -> Vec<DriveTone> {
            let phase_flux = if self.layout() == GaugeLayout::Symmetric { flux } else { 0.0 };
            device::tones(phase_flux, m.drive_ratio, l.active_mask())
        };
        let model = match m.variant {
            VariantCode::H1 => {
                let tones = driven_tones(&lattice);
                ModelSpec::lab_frame(lattice, device::onsite(), tones, self.rate)?
            }
            VariantCode::H2 => {
                let tones = driven_tones(&lattice);
                ModelSpec::lab_frame_uniform(lattice, self.bare(), device::onsite(), tones, self.rate)?
            }
            VariantCode::H3 => {
                let gauge = uniform_field_gauge(&lattice, flux, self.layout());
                let reference =
                    if m.disorder.is_some() { mhz_to_angular(device::NEAREST_MEAN_MHZ) } else { self.bare() };
                ModelSpec::rotating_frame(lattice, gauge, self.rate, reference)?
            }
            VariantCode::H4 => {
                let gauge = uniform_field_gauge(&lattice, flux, self.layout());
                ModelSpec::rotating_frame_uniform(lattice, gauge, self.rate)?
            }
        };
        if model.variant().is_driven() && self.layout() == GaugeLayout::Landau {
            let gauge = uniform_field_gauge(model.lattice(), flux, GaugeLayout::Landau);
            return Ok(model.with_gauge(&gauge)?);
        }
        Ok(model)
    }

    fn noise(&self) -> NoiseSpec {
        let n = &self.cfg.noise;
        let table = |t: &[f64; 16]| n.device_coherence.then(|| t.to_vec());
        NoiseSpec {
            t1_us: n.t1_us.clone().or_else(|| table(&device::T1_US)),
            tphi_us: n.tphi_us.clone().or_else(|| table(&device::TPHI_US)),
            disorder_sigma: mhz_to_angular(n.disorder_mhz),
            samples: n.samples,
            seed: self.cfg.seed,
        }
    }

    fn two_site(&self) -> Result<Vec<Artifact>, CliError> {
        let ts = &self.cfg.two_site;
        let bare = mhz_to_angular(ts.bare_rate_mhz);
        let detuning = mhz_to_angular(ts.detuning_mhz);
        let options = CalibrationOptions { integrator: self.integrator, execution: self.exec, ..Default::default() };
        let calibration = match ts.target_mhz {
            Some(target) => {
                let bond = DrivenBond { driver: 1, partner: 2, bare_rate: bare, detuning };
                Some(calibrate_bonds(&[bond], mhz_to_angular(target), &options)?)
            }
            None => None,
        };
        let amplitude = calibration.as_ref().map_or(self.cfg.model.drive_ratio * detuning.abs(), |c| c.amplitude);
        let partner = ts.partner.as_ref().map(|p| {
            let frequency = mhz_to_angular(p.detuning_mhz);
            SpectatorTone { amplitude: p.drive_ratio * frequency.abs(), frequency }
        });
        let predicted = match partner {
            Some(p) => effective_rate_dual(bare, amplitude, detuning, p.amplitude, p.frequency)?,
            None => effective_rate(bare, amplitude, detuning)?,
        };
        let times = match &self.cfg.grids.times_ns {
            Some(_) => self.times((0.0, 0.0, 0)),
            None => {
                let t_max = (options.half_periods * PI / predicted.abs().max(1e-9)).min(10.0);
                linspace(0.0, t_max, options.samples)
            }
        };
        let lattice = LatticeSpec::uniform(1, 2, bare)?;
        let (a, b) = (Site::from_index(0), Site::from_index(1));
        let mut tones = vec![DriveTone::new(a, amplitude, detuning, 0.0)];
        if let Some(p) = partner {
            tones.push(DriveTone::new(b, p.amplitude, p.frequency, 0.0));
        }
        let model = ModelSpec::lab_frame(lattice.clone(), vec![detuning, 0.0], tones, predicted.abs())?;
        let psi = QuantumState::localised(&lattice, a)?;
        let result = evolve_schrodinger(&model, &psi, &times, &self.integrator)?;
        let fit = match fit_hopping_rate(&result, b) {
            Ok(f) => Some(f),
            Err(CalibrationError::FlatSignal) => None,
            Err(e) => return Err(e.into()),
        };
        let fit_mhz = |f: &HoppingFit| {
            json!({
                "rate_mhz": angular_to_mhz(f.rate),
                "amplitude": f.amplitude,
                "phase": f.phase,
                "offset": f.offset,
                "residual_rms": f.residual_rms,
            })
        };
        let summary = json!({
            "bare_rate_mhz": ts.bare_rate_mhz,
            "detuning_mhz": ts.detuning_mhz,
            "tone_amplitude_mhz": angular_to_mhz(amplitude),
            "drive_ratio": amplitude / detuning.abs(),
            "predicted_rate_mhz": angular_to_mhz(predicted),
            "fit": fit.as_ref().map(fit_mhz),
            "calibration": calibration.as_ref().map(|c| json!({
                "target_mhz": angular_to_mhz(c.target_rate),
                "ratio": c.ratio,
                "sweep": c.sweep.iter().map(|(amp, r)| [amp / detuning.abs(), angular_to_mhz(*r)]).collect::<Vec<_>>(),
                "quadratic": c.quadratic,
            })),
        });
        let mut out = vec![csv_artifact("populations.csv", result.to_csv())?, artifact("fit.json", pretty(&summary)?)];
        if let Some(shots) = self.cfg.shots {
            let estimate = sample_shots(&result, shots, self.cfg.seed)?;
            out.push(csv_artifact("shots.csv", shots_csv(&estimate))?);
        }
        Ok(out)
    }

    fn ring_preset(&self) -> RingPreset {
        match self.cfg.ring.preset {
            RingCode::Plaquette => RingPreset::Plaquette,
            RingCode::Ring8 => RingPreset::Ring8,
            RingCode::Ring12 => RingPreset::Ring12,
        }
    }

    fn ring_model(&self, preset: RingPreset) -> Result<(ModelSpec, Ring), CliError> {
        let lattice = if self.cfg.on_device() {
            let full = LatticeSpec::uniform(device::ROWS, device::COLS, 1.0)?;
            self.device_lattice(&preset.mask(&full))?
        } else {
            preset.uniform_lattice(self.bare())?.with_origin(self.origin())
        };
        let ring = preset.ring(&lattice)?;
        Ok((self.model(lattice, self.cfg.gauge.flux_rad)?, ring))
    }

    fn scan(&self, model: &ModelSpec, ring: &Ring, placement: Placement) -> Result<InterferencePattern, CliError> {
        let preset = self.ring_preset();
        let placement = preset.placement(model.lattice(), placement)?;
        let times = self.times((0.0, 500.0, 101));
        Ok(aharonov_bohm_scan(
            model,
            ring,
            &placement,
            &self.cfg.phases(),
            &times,
            &self.noise(),
            &self.integrator,
            self.exec,
        )?)
    }

    fn ab_scan(&self) -> Result<Vec<Artifact>, CliError> {
        let (model, ring) = self.ring_model(self.ring_preset())?;
        let placement = match self.cfg.ring.placement {
            PlacementCode::Lower => Placement::Lower,
            PlacementCode::Upper => Placement::Upper,
            PlacementCode::SplitThirds => Placement::SplitThirds,
            PlacementCode::ZeroNet => Placement::ZeroNet,
        };
        let pattern = self.scan(&model, &ring, placement)?;
        let summary = json!({
            "ring": ring,
            "placement": pattern.placement,
            "phases_rad": pattern.phases,
            "final_population": pattern.population.iter().map(|p| p[p.len() - 1]).collect::<Vec<_>>(),
            "mean_population": pattern.population.iter().map(|p| time_mean(&pattern.times, p)).collect::<Vec<_>>(),
        });
        Ok(vec![csv_artifact("pattern.csv", pattern.to_csv())?, artifact("summary.json", pretty(&summary)?)])
    }

    fn gauge_check(&self) -> Result<Vec<Artifact>, CliError> {
        let (model, ring) = self.ring_model(self.ring_preset())?;
        let named = [
            ("lower", Placement::Lower),
            ("upper", Placement::Upper),
            ("split_thirds", Placement::SplitThirds),
            ("zero_net", Placement::ZeroNet),
        ];
        let mut patterns = Vec::new();
        for (name, p) in named {
            patterns.push((name, self.scan(&model, &ring, p)?));
        }
        let mut differences = serde_json::Map::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = patterns[i].1.max_difference(&patterns[j].1)?;
                differences.insert(format!("{}_vs_{}", patterns[i].0, patterns[j].0), json!(d));
            }
        }
        // With no net flux the scanned phase must not matter.
        let zero_net = &patterns[3].1;
        let zero_net_spread = (0..zero_net.times.len())
            .map(|t| {
                let col = zero_net.population.iter().map(|p| p[t]);
                col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);

        let base = match model.gauge() {
            Some(g) => g.clone(),
            None => realised_gauge(&model)?,
        };
        let lattice = model.lattice();
        let flux = loop_flux(&base, &ring.sites)?;
        let mut transforms = Vec::new();
        for k in 0..3u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(k);
            let lambda: Vec<f64> = (0..lattice.site_count()).map(|_| rng.random_range(-PI..PI)).collect();
            let transformed = gauge_transform(&base, &ScalarField::new(lattice, lambda)?);
            let flux_change = phase_distance(flux, loop_flux(&transformed, &ring.sites)?);
            // Driven models realise a gauge only up to their own tone
            // layout, so populations are compared for static models alone.
            let population_change = if model.variant().is_driven() {
                None
            } else {
                let m = model.clone().with_gauge(&transformed)?;
                Some(self.scan(&m, &ring, Placement::Lower)?.max_difference(&patterns[0].1)?)
            };
            transforms.push(json!({"flux_change": flux_change, "population_change": population_change}));
        }
        let summary = json!({
            "ring": ring,
            "loop_flux_rad": flux,
            "max_difference": differences,
            "zero_net_spread": zero_net_spread,
            "random_gauges": transforms,
        });
        let mut out = Vec::new();
        for (name, p) in &patterns[..3] {
            out.push(csv_artifact(&format!("pattern_{name}.csv"), p.to_csv())?);
        }
        out.push(artifact("summary.json", pretty(&summary)?));
        Ok(out)
    }

    fn chain(&self) -> Result<(ModelSpec, Vec<Site>), CliError> {
        if self.cfg.on_device() {
            let mask = device::mask_from_labels(&PERIPHERY_PATH);
            let lattice = self.device_lattice(&mask)?;
            let path = PERIPHERY_PATH.iter().map(|&l| Site::from_index(l - 1)).collect();
            return Ok((self.model(lattice, self.cfg.gauge.flux_rad)?, path));
        }
        let lattice = self.plain_lattice(1, 11)?;
        if lattice.rows() != 1 && lattice.cols() != 1 {
            return Err(CliError::Invalid("wannier_stark needs a single-row or single-column lattice".into()));
        }
        let path = lattice.active_sites().to_vec();
        Ok((self.model(lattice, self.cfg.gauge.flux_rad)?, path))
    }

    fn wannier_stark(&self) -> Result<Vec<Artifact>, CliError> {
        let (model, path) = self.chain()?;
        let fields = self.cfg.grids.fields_over_j.as_ref().map_or(vec![self.cfg.field.f_over_j], |g| g.values());
        let times = self.times((0.0, 1000.0, 201));
        let noise = self.noise();
        let chains = gaugesim::exec::try_map_indexed(self.exec, &fields, |_, &f| {
            wannier_stark_chain(&model, &path, f, &times, &noise, &self.integrator)
        })?;
        let mut out = Vec::new();
        let mut rows = Vec::new();
        for (k, (f, c)) in fields.iter().zip(&chains).enumerate() {
            out.push(csv_artifact(&format!("chain_{k}.csv"), c.to_csv())?);
            let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
            rows.push(json!({
                "file": format!("chain_{k}.csv"),
                "f_over_j": f,
                "centre_mean": time_mean(&times, &c.at_distance(0).unwrap_or_default()),
                "beyond_1_max": max(c.beyond(1)),
                "beyond_2_max": max(c.beyond(2)),
            }));
        }
        let summary = json!({"path": path, "fields": rows});
        out.push(artifact("summary.json", pretty(&summary)?));
        Ok(out)
    }

    fn hall(&self) -> Result<Vec<Artifact>, CliError> {
        let lattice = self.plain_lattice(device::ROWS, device::COLS)?;
        let model = self.model(lattice, 0.0)?;
        let g = &self.cfg.grids;
        let fluxes = g.fluxes_rad.as_ref().map_or(vec![-PI / 2.0, 0.0, PI / 2.0], |g| g.values());
        let fields = g.fields_over_j.as_ref().map_or(vec![-0.4, -0.2, 0.0, 0.2, 0.4], |g| g.values());
        let defaults = HallSetup::for_model(&model);
        let setup = HallSetup {
            layout: self.layout(),
            window: g.window_ns.map_or(defaults.window, ns_to_us),
            step: ns_to_us(g.step_ns),
            noise: self.noise(),
            integrator: self.integrator,
        };
        let records = hall_experiment(&model, &fluxes, &fields, &setup, self.exec)?;
        let coefficients = hall_coefficients(&records)?;
        Ok(vec![csv_artifact("hall.csv", hall_csv(&records))?, artifact("coefficients.json", pretty(&coefficients)?)])
    }

    fn semiclassical(&self) -> Result<Vec<Artifact>, CliError> {
        let s = &self.cfg.semiclassical;
        let linearization = match s.linearization {
            LinearizationCode::Full => Linearization::Full,
            LinearizationCode::SmallKappa => Linearization::SmallKappa,
        };
        let times = self.times((0.0, 500.0, 501));
        let e0 = s.e0_over_j * self.rate;
        let trajectory = hall_velocity_ensemble(
            e0,
            self.cfg.gauge.flux_rad,
            self.rate,
            s.nx,
            s.ny,
            &times,
            linearization,
            self.exec,
        )?;
        let corner = reconstruct_corner(s.nx, s.ny)?;
        let corner_error =
            corner.iter().enumerate().map(|(i, v)| (v - if i == 0 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
        let summary = json!({
            "nx": s.nx,
            "ny": s.ny,
            "flux_rad": self.cfg.gauge.flux_rad,
            "e0_over_j": s.e0_over_j,
            "eigencheck_residual": eigencheck(s.nx, s.ny, self.rate)?,
            "corner_reconstruction_error": corner_error,
        });
        Ok(vec![csv_artifact("trajectory.csv", trajectory.to_csv())?, artifact("summary.json", pretty(&summary)?)])
    }
}

fn time_mean(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    trapezoid(times, values) / (times[times.len() - 1] - times[0])
}

/// CSV with columns `time_us, site_<label>, site_<label>_err..., kept`.
fn shots_csv(estimate: &ShotEstimate) -> Result<String, gaugesim::Error> {
    let mut header = vec!["time_us".to_string()];
    for s in &estimate.sites {
        header.push(format!("site_{}", s.label()));
        header.push(format!("site_{}_err", s.label()));
    }
    header.push("kept".into());
    render(
        &header,
        estimate.times.iter().enumerate().map(|(i, t)| {
            let mut row = vec![fmt_f64(*t)];
            for k in 0..estimate.sites.len() {
                row.push(fmt_f64(estimate.populations[i][k]));
                row.push(fmt_f64(estimate.std_errors[i][k]));
            }
            row.push(estimate.kept[i].to_string());
            row
        }),
    )
}
