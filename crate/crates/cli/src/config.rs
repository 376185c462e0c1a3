//! Run configuration: JSON schema, defaults and validation.
//!
//! Frequencies are ordinary MHz and times are ns in the file; conversion to
//! rad/µs and µs happens in the runner.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gaugesim::model::ModelVariant;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TwoSite,
    AbScan,
    GaugeCheck,
    WannierStark,
    Hall,
    Semiclassical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantCode {
    H1,
    H2,
    H3,
    H4,
}

impl VariantCode {
    pub fn variant(self) -> ModelVariant {
        match self {
            VariantCode::H1 => ModelVariant::LabFrame,
            VariantCode::H2 => ModelVariant::LabFrameUniform,
            VariantCode::H3 => ModelVariant::RotatingFrame,
            VariantCode::H4 => ModelVariant::RotatingFrameUniform,
        }
    }
}

/// A grid given either explicitly or as an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => gaugesim::units::linspace(*start, *stop, *count),
        }
    }

    fn check(&self, name: &str) -> Result<(), CliError> {
        let v = self.values();
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Invalid(format!("grids.{name} must be non-empty and finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderBlock {
    #[serde(default = "default_sigma")]
    pub nearest_sigma_mhz: f64,
    #[serde(default = "default_true")]
    pub next_nearest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "default_variant")]
    pub variant: VariantCode,
    /// Nominal hopping rate J/2π.
    #[serde(default = "default_hopping")]
    pub hopping_mhz: f64,
    /// Uniform bare coupling J0/2π of the driven and H3 models.
    #[serde(default = "default_bare")]
    pub bare_rate_mhz: f64,
    /// Tone amplitude as a fraction of the modulation frequency.
    #[serde(default = "default_ratio")]
    pub drive_ratio: f64,
    /// Seeded Gaussian bare couplings of the 4×4 device.
    #[serde(default)]
    pub disorder: Option<DisorderBlock>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            variant: default_variant(),
            hopping_mhz: default_hopping(),
            bare_rate_mhz: default_bare(),
            drive_ratio: default_ratio(),
            disorder: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OriginCode {
    /// Top-left for the driven models, bottom-left otherwise.
    #[default]
    Auto,
    BottomLeft,
    BottomRight,
    TopLeft,
    TopRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub rows: usize,
    pub cols: usize,
    /// One-based labels of switched-off sites.
    #[serde(default)]
    pub inactive: Vec<usize>,
    #[serde(default)]
    pub origin: OriginCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LayoutCode {
    #[default]
    Symmetric,
    Landau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GaugeBlock {
    #[serde(default)]
    pub flux_rad: f64,
    #[serde(default)]
    pub layout: LayoutCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    /// Force in units of J.
    #[serde(default)]
    pub f_over_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    /// Use the device T1 and Tφ tables (4×4 lattices only).
    #[serde(default)]
    pub device_coherence: bool,
    /// Per-site T1 in µs, overriding the device table.
    #[serde(default)]
    pub t1_us: Option<Vec<f64>>,
    #[serde(default)]
    pub tphi_us: Option<Vec<f64>>,
    /// Standard deviation of quasi-static frequency offsets.
    #[serde(default)]
    pub disorder_mhz: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsBlock {
    #[serde(default)]
    pub phases_rad: Option<Grid>,
    #[serde(default)]
    pub fluxes_rad: Option<Grid>,
    #[serde(default)]
    pub fields_over_j: Option<Grid>,
    #[serde(default)]
    pub times_ns: Option<Grid>,
    /// Hall averaging window; default 0.25/J.
    #[serde(default)]
    pub window_ns: Option<f64>,
    #[serde(default = "default_step")]
    pub step_ns: f64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock {
            device_coherence: false,
            t1_us: None,
            tphi_us: None,
            disorder_mhz: 0.0,
            samples: default_samples(),
        }
    }
}

impl Default for GridsBlock {
    fn default() -> Self {
        GridsBlock {
            phases_rad: None,
            fluxes_rad: None,
            fields_over_j: None,
            times_ns: None,
            window_ns: None,
            step_ns: default_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RingCode {
    #[default]
    Plaquette,
    Ring8,
    Ring12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlacementCode {
    #[default]
    Lower,
    Upper,
    SplitThirds,
    ZeroNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RingBlock {
    #[serde(default)]
    pub preset: RingCode,
    #[serde(default)]
    pub placement: PlacementCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerBlock {
    /// Signed modulation frequency of the partner's own tone.
    pub detuning_mhz: f64,
    pub drive_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSiteBlock {
    #[serde(default = "default_bare")]
    pub bare_rate_mhz: f64,
    /// Signed detuning of the driven site from its partner.
    #[serde(default = "default_detuning")]
    pub detuning_mhz: f64,
    /// Calibrate the amplitude to this rate instead of using `model.drive_ratio`.
    #[serde(default)]
    pub target_mhz: Option<f64>,
    #[serde(default)]
    pub partner: Option<PartnerBlock>,
}

impl Default for TwoSiteBlock {
    fn default() -> Self {
        TwoSiteBlock {
            bare_rate_mhz: default_bare(),
            detuning_mhz: default_detuning(),
            target_mhz: None,
            partner: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationCode {
    #[default]
    Full,
    SmallKappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalBlock {
    #[serde(default = "default_modes")]
    pub nx: usize,
    #[serde(default = "default_modes")]
    pub ny: usize,
    /// Diagonal field in units of J.
    #[serde(default = "default_e0")]
    pub e0_over_j: f64,
    #[serde(default)]
    pub linearization: LinearizationCode,
}

impl Default for SemiclassicalBlock {
    fn default() -> Self {
        SemiclassicalBlock {
            nx: default_modes(),
            ny: default_modes(),
            e0_over_j: default_e0(),
            linearization: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub lattice: Option<LatticeBlock>,
    #[serde(default)]
    pub gauge: GaugeBlock,
    #[serde(default)]
    pub field: FieldBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub grids: GridsBlock,
    #[serde(default)]
    pub ring: RingBlock,
    #[serde(default)]
    pub two_site: TwoSiteBlock,
    #[serde(default)]
    pub semiclassical: SemiclassicalBlock,
    /// Shots per time point for a sampled copy of the populations.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Step budget of the adaptive integrator per evolution.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_variant() -> VariantCode {
    VariantCode::H4
}
fn default_hopping() -> f64 {
    2.0
}
fn default_bare() -> f64 {
    5.9
}
fn default_ratio() -> f64 {
    0.94
}
fn default_sigma() -> f64 {
    0.4
}
fn default_true() -> bool {
    true
}
fn default_samples() -> usize {
    1
}
fn default_step() -> f64 {
    1.0
}
fn default_detuning() -> f64 {
    155.0
}
fn default_modes() -> usize {
    20
}
fn default_e0() -> f64 {
    0.6
}
fn default_tolerance() -> f64 {
    1e-10
}

impl RunConfig {
    /// Parses JSON, reporting the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Invalid(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn is_driven(&self) -> bool {
        matches!(self.model.variant, VariantCode::H1 | VariantCode::H2)
    }

    /// Whether the experiment runs on the 4×4 device footprint.
    pub fn on_device(&self) -> bool {
        self.is_driven() || self.model.disorder.is_some() || self.noise.device_coherence
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Invalid(m.to_string()));
        let m = &self.model;
        for (name, v) in [("model.hopping_mhz", m.hopping_mhz), ("model.bare_rate_mhz", m.bare_rate_mhz)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(m.drive_ratio.is_finite() && m.drive_ratio >= 0.0) {
            return bad("model.drive_ratio must be non-negative");
        }
        if let Some(d) = &m.disorder {
            if !(d.nearest_sigma_mhz.is_finite() && d.nearest_sigma_mhz >= 0.0) {
                return bad("model.disorder.nearest_sigma_mhz must be non-negative");
            }
        }
        if let Some(l) = &self.lattice {
            if l.rows == 0 || l.cols == 0 {
                return bad("lattice.rows and lattice.cols must be at least 1");
            }
            if let Some(x) = l.inactive.iter().find(|&&x| x == 0 || x > l.rows * l.cols) {
                return bad(&format!("lattice.inactive references unknown site {x}"));
            }
            if self.on_device() && (l.rows, l.cols) != (4, 4) {
                return bad("driven models, bare-rate disorder and device coherence need a 4x4 lattice");
            }
        }
        if !self.gauge.flux_rad.is_finite() || !self.field.f_over_j.is_finite() {
            return bad("gauge.flux_rad and field.f_over_j must be finite");
        }
        let n = &self.noise;
        if !(n.disorder_mhz.is_finite() && n.disorder_mhz >= 0.0) || n.samples == 0 {
            return bad("noise.disorder_mhz must be >= 0 and noise.samples >= 1");
        }
        for (name, v) in [("noise.t1_us", &n.t1_us), ("noise.tphi_us", &n.tphi_us)] {
            if let Some(v) = v {
                if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad(&format!("{name} entries must be positive"));
                }
            }
        }
        let g = &self.grids;
        for (name, grid) in [
            ("phases_rad", &g.phases_rad),
            ("fluxes_rad", &g.fluxes_rad),
            ("fields_over_j", &g.fields_over_j),
            ("times_ns", &g.times_ns),
        ] {
            if let Some(grid) = grid {
                grid.check(name)?;
            }
        }
        if let Some(t) = &g.times_ns {
            let v = t.values();
            if v[0] < 0.0 || v.windows(2).any(|w| w[1] <= w[0]) {
                return bad("grids.times_ns must be non-negative and strictly increasing");
            }
        }
        if !(g.step_ns.is_finite() && g.step_ns > 0.0)
            || g.window_ns.is_some_and(|w| !(w.is_finite() && w >= g.step_ns))
        {
            return bad("grids.step_ns must be positive and grids.window_ns at least one step");
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if self.shots == Some(0) {
            return bad("shots must be at least 1");
        }
        let t = &self.two_site;
        if !(t.bare_rate_mhz.is_finite() && t.bare_rate_mhz > 0.0)
            || !(t.detuning_mhz.is_finite() && t.detuning_mhz != 0.0)
        {
            return bad("two_site.bare_rate_mhz must be positive and two_site.detuning_mhz non-zero");
        }
        if t.target_mhz.is_some_and(|x| !(x.is_finite() && x >= 0.0)) {
            return bad("two_site.target_mhz must be non-negative");
        }
        if let Some(p) = &t.partner {
            if !(p.detuning_mhz.is_finite() && p.detuning_mhz != 0.0 && p.drive_ratio.is_finite()) {
                return bad("two_site.partner needs a non-zero detuning and finite ratio");
            }
            if (p.detuning_mhz.abs() - t.detuning_mhz.abs()).abs() < 1e-9 {
                return bad("two_site.partner must be modulated at a different frequency");
            }
        }
        let s = &self.semiclassical;
        if s.nx == 0 || s.ny == 0 || !s.e0_over_j.is_finite() {
            return bad("semiclassical.nx, ny must be >= 1 and e0_over_j finite");
        }
        if self.experiment == ExperimentKind::Hall {
            if let Some(f) = &g.fields_over_j {
                let v = f.values();
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut d = v.clone();
                d.sort_by(f64::total_cmp);
                d.dedup();
                if d.len() < 3 || lo > 0.0 || hi < 0.0 {
                    return bad("grids.fields_over_j needs at least 3 distinct values spanning 0 for hall");
                }
            }
        }
        Ok(())
    }

    /// Phase grid, default 41 points over [−π, π].
    pub fn phases(&self) -> Vec<f64> {
        self.grids.phases_rad.as_ref().map(Grid::values).unwrap_or_else(|| gaugesim::units::linspace(-PI, PI, 41))
    }

    /// Semantic content of the configuration: everything except where the
    /// output goes and how many threads compute it, keys sorted.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        let mut v = serde_json::to_value(self).map_err(|e| CliError::Invalid(e.to_string()))?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
            obj.remove("threads");
        }
        serde_json::to_string(&v).map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn hash(&self) -> Result<String, CliError> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"experiment": "ab_scan"}"#).unwrap();
        assert_eq!(c.model.variant, VariantCode::H4);
        assert_eq!(c.phases().len(), 41);
        assert_eq!(c.tolerance, 1e-10);
    }

    #[test]
    fn unknown_fields_report_their_path() {
        let e = RunConfig::from_json(r#"{"experiment": "hall", "model": {"hoping_mhz": 2}}"#).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
        assert!(RunConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        assert!(RunConfig::from_json("{").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        for bad in [
            r#"{"experiment": "ab_scan", "grids": {"phases_rad": []}}"#,
            r#"{"experiment": "ab_scan", "lattice": {"rows": 2, "cols": 2, "inactive": [7]}}"#,
            r#"{"experiment": "hall", "model": {"variant": "h1"}, "lattice": {"rows": 2, "cols": 2}}"#,
            r#"{"experiment": "hall", "grids": {"fields_over_j": [0.1, 0.2, 0.3]}}"#,
            r#"{"experiment": "two_site", "tolerance": 0}"#,
            r#"{"experiment": "two_site", "grids": {"times_ns": [0, 5, 5]}}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_output_and_threads_only() {
        let a = RunConfig::from_json(r#"{"experiment": "hall"}"#).unwrap();
        let b = RunConfig::from_json(r#"{"experiment": "hall", "output": "x", "threads": 3}"#).unwrap();
        let c = RunConfig::from_json(r#"{"experiment": "hall", "seed": 1}"#).unwrap();
        let d = RunConfig::from_json(r#"{"experiment": "hall", "gauge": {"flux_rad": 0.0}}"#).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap(), d.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }
}
