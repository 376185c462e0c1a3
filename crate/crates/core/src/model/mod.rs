//! Hamiltonian models: the driven lab-frame models and their stationary
//! rotating-frame counterparts, drive tones and closed-form rates.

pub mod bessel;
pub mod device;
pub mod rates;
mod tones;

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::error::Error;
use crate::lattice::{BondKind, GaugeField, LatticeError, LatticeSpec, PotentialField, Site};
use crate::table::{fmt_f64, render};

pub use bessel::bessel_j;
pub use rates::{effective_rate, effective_rate_dual, frequency_shift_factor};
pub use tones::{realised_gauge, synthetic_efield_tones};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("Bessel argument {0} outside |x| <= 50")]
    BesselArgument(f64),
    #[error("detuning must be non-zero")]
    ZeroDetuning,
    #[error("shift factor needs theta >= 0 and asymmetry in [0, 1], got {theta}, {asymmetry}")]
    ShiftArguments { theta: f64, asymmetry: f64 },
    #[error("tone on site {0} which is inactive or outside the lattice")]
    ToneSite(Site),
    #[error("more than one tone on site {0}")]
    DuplicateTone(Site),
    #[error("tone on site {0} has invalid parameters")]
    InvalidTone(Site),
    #[error("tone on site {site}: detuning sign disagrees with on-site frequencies of bond {a}-{b}")]
    ToneSign { site: Site, a: Site, b: Site },
    #[error("bond {0}-{1} is resonant with tones on both of its sites")]
    AmbiguousDriver(Site, Site),
    #[error("on-site frequency vector has {got} entries, expected {expected}")]
    OnsiteLength { expected: usize, got: usize },
    #[error("non-finite model parameter: {0}")]
    NonFinite(&'static str),
    #[error("{0} is not available for the {1} model")]
    WrongVariant(&'static str, ModelVariant),
    #[error("requested gauge is not realisable with the available tones (residual {0:.3e})")]
    UnrealisableGauge(f64),
    #[error("requested field is not realisable with the available tones (residual {0:.3e})")]
    UnrealisableField(f64),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// The four model variants, from the full lab-frame description down to the
/// ideal uniform rotating-frame lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Modulated sites with per-bond bare rates, next-nearest bonds included.
    LabFrame,
    /// Modulated sites with one uniform nearest-neighbour bare rate.
    LabFrameUniform,
    /// Stationary complex hopping with per-bond rates scaled from the bare rates.
    RotatingFrame,
    /// Stationary complex hopping with one uniform rate.
    RotatingFrameUniform,
}

impl ModelVariant {
    /// Short identifier used in configs and output metadata.
    pub fn code(self) -> &'static str {
        match self {
            ModelVariant::LabFrame => "h1",
            ModelVariant::LabFrameUniform => "h2",
            ModelVariant::RotatingFrame => "h3",
            ModelVariant::RotatingFrameUniform => "h4",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "h1" => Some(ModelVariant::LabFrame),
            "h2" => Some(ModelVariant::LabFrameUniform),
            "h3" => Some(ModelVariant::RotatingFrame),
            "h4" => Some(ModelVariant::RotatingFrameUniform),
            _ => None,
        }
    }

    pub fn is_driven(self) -> bool {
        matches!(self, ModelVariant::LabFrame | ModelVariant::LabFrameUniform)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A sinusoidal frequency modulation `Ω·sin(|δ|t + φ + φ̇t)` on one site.
///
/// `frequency` is signed: δ = ω_site − ω_partner for the bond the tone drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTone {
    pub site: Site,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub phase_drift: f64,
}

impl DriveTone {
    pub fn new(site: Site, amplitude: f64, frequency: f64, phase: f64) -> Self {
        DriveTone { site, amplitude, frequency, phase, phase_drift: 0.0 }
    }

    /// Instantaneous modulation `Ω·sin(|δ|t + φ + φ̇t)`.
    pub fn waveform(&self, t: f64) -> f64 {
        self.amplitude * (self.angular_speed() * t + self.phase).sin()
    }

    /// Total angular speed of the modulation argument.
    pub fn angular_speed(&self) -> f64 {
        self.frequency.abs() + self.phase_drift
    }
}

/// How the coupling on one nearest bond arises in the driven models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BondDrive {
    /// Resonantly driven by `tone`; `sign` = sign(ω_driver − ω_partner);
    /// `driver_is_from` tells which end carries the tone.
    Tone { tone: usize, sign: f64, driver_is_from: bool },
    /// Sites already resonant; real stationary coupling.
    Resonant,
    /// Neither end resonant; the coupling averages out.
    OffResonant,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Dynamics {
    Driven {
        onsite: Vec<f64>,
        tones: Vec<DriveTone>,
        /// Per entry of `lattice.bonds()`.
        couplings: Vec<f64>,
        /// Per entry of `lattice.bonds()`.
        drives: Vec<BondDrive>,
    },
    Rotating {
        gauge: GaugeField,
        /// Per gauge link.
        couplings: Vec<f64>,
        potential: Option<PotentialField>,
    },
}

/// A complete Hamiltonian description on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    variant: ModelVariant,
    lattice: LatticeSpec,
    nominal_rate: f64,
    offsets: Vec<f64>,
    dynamics: Dynamics,
}

impl ModelSpec {
    /// Lab-frame model with the lattice's bare rates, next-nearest included.
    pub fn lab_frame(
        lattice: LatticeSpec,
        onsite: Vec<f64>,
        tones: Vec<DriveTone>,
        nominal_rate: f64,
    ) -> Result<Self, ModelError> {
        let couplings = lattice.bonds().iter().map(|b| b.bare_rate).collect();
        Self::driven(ModelVariant::LabFrame, lattice, onsite, tones, couplings, nominal_rate)
    }

    /// Lab-frame model with a uniform nearest-neighbour bare rate and no
    /// next-nearest coupling.
    pub fn lab_frame_uniform(
        lattice: LatticeSpec,
        bare_rate: f64,
        onsite: Vec<f64>,
        tones: Vec<DriveTone>,
        nominal_rate: f64,
    ) -> Result<Self, ModelError> {
        let couplings =
            lattice.bonds().iter().map(|b| if b.kind == BondKind::Nearest { bare_rate } else { 0.0 }).collect();
        Self::driven(ModelVariant::LabFrameUniform, lattice, onsite, tones, couplings, nominal_rate)
    }

    /// Rotating-frame model with rates `rate·J0_ij/reference_bare`.
    pub fn rotating_frame(
        lattice: LatticeSpec,
        gauge: GaugeField,
        rate: f64,
        reference_bare: f64,
    ) -> Result<Self, ModelError> {
        if !(reference_bare.is_finite() && reference_bare > 0.0) {
            return Err(ModelError::NonFinite("reference bare rate"));
        }
        let couplings = lattice.nearest_bonds().map(|b| rate * b.bare_rate / reference_bare).collect();
        Self::rotating(ModelVariant::RotatingFrame, lattice, gauge, couplings, rate)
    }

    /// Rotating-frame model with explicit per-bond rates (in nearest-bond order).
    pub fn rotating_frame_with_rates(
        lattice: LatticeSpec,
        gauge: GaugeField,
        couplings: Vec<f64>,
        nominal_rate: f64,
    ) -> Result<Self, ModelError> {
        Self::rotating(ModelVariant::RotatingFrame, lattice, gauge, couplings, nominal_rate)
    }

    /// Ideal rotating-frame model with uniform rate.
    pub fn rotating_frame_uniform(lattice: LatticeSpec, gauge: GaugeField, rate: f64) -> Result<Self, ModelError> {
        let couplings = vec![rate; lattice.nearest_bonds().count()];
        Self::rotating(ModelVariant::RotatingFrameUniform, lattice, gauge, couplings, rate)
    }

    fn rotating(
        variant: ModelVariant,
        lattice: LatticeSpec,
        gauge: GaugeField,
        couplings: Vec<f64>,
        nominal_rate: f64,
    ) -> Result<Self, ModelError> {
        if !gauge.matches(&lattice) || couplings.len() != gauge.links().len() {
            return Err(LatticeError::GaugeMismatch.into());
        }
        if couplings.iter().any(|c| !c.is_finite()) || !nominal_rate.is_finite() {
            return Err(ModelError::NonFinite("hopping rate"));
        }
        let offsets = vec![0.0; lattice.site_count()];
        Ok(ModelSpec {
            variant,
            lattice,
            nominal_rate,
            offsets,
            dynamics: Dynamics::Rotating { gauge, couplings, potential: None },
        })
    }

    fn driven(
        variant: ModelVariant,
        lattice: LatticeSpec,
        onsite: Vec<f64>,
        tones: Vec<DriveTone>,
        couplings: Vec<f64>,
        nominal_rate: f64,
    ) -> Result<Self, ModelError> {
        if onsite.len() != lattice.site_count() {
            return Err(ModelError::OnsiteLength { expected: lattice.site_count(), got: onsite.len() });
        }
        if onsite.iter().any(|w| !w.is_finite()) || !nominal_rate.is_finite() {
            return Err(ModelError::NonFinite("on-site frequency"));
        }
        let drives = classify_bonds(&lattice, &onsite, &tones)?;
        let offsets = vec![0.0; lattice.site_count()];
        Ok(ModelSpec {
            variant,
            lattice,
            nominal_rate,
            offsets,
            dynamics: Dynamics::Driven { onsite, tones, couplings, drives },
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Reference hopping rate J used to express fields and times in units of J.
    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    /// Static per-site frequency offsets (quasi-static disorder).
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub(crate) fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn tones(&self) -> &[DriveTone] {
        match &self.dynamics {
            Dynamics::Driven { tones, .. } => tones,
            Dynamics::Rotating { .. } => &[],
        }
    }

    pub fn onsite(&self) -> Option<&[f64]> {
        match &self.dynamics {
            Dynamics::Driven { onsite, .. } => Some(onsite),
            Dynamics::Rotating { .. } => None,
        }
    }

    pub fn gauge(&self) -> Option<&GaugeField> {
        match &self.dynamics {
            Dynamics::Rotating { gauge, .. } => Some(gauge),
            Dynamics::Driven { .. } => None,
        }
    }

    pub fn potential(&self) -> Option<&PotentialField> {
        match &self.dynamics {
            Dynamics::Rotating { potential, .. } => potential.as_ref(),
            Dynamics::Driven { .. } => None,
        }
    }

    /// Coupling per bond: all bonds for driven models, nearest bonds otherwise.
    pub fn couplings(&self) -> &[f64] {
        match &self.dynamics {
            Dynamics::Driven { couplings, .. } | Dynamics::Rotating { couplings, .. } => couplings,
        }
    }

    /// True when the Hamiltonian depends on time.
    pub fn is_time_dependent(&self) -> bool {
        match &self.dynamics {
            Dynamics::Driven { .. } => true,
            Dynamics::Rotating { gauge, .. } => !gauge.is_static(),
        }
    }

    /// Replaces the static on-site offsets.
    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self, ModelError> {
        if offsets.len() != self.lattice.site_count() {
            return Err(ModelError::OnsiteLength { expected: self.lattice.site_count(), got: offsets.len() });
        }
        if offsets.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("on-site offset"));
        }
        self.offsets = offsets;
        Ok(self)
    }

    /// Adds a potential to a rotating-frame model.
    pub fn with_potential(mut self, field: PotentialField) -> Result<Self, ModelError> {
        match &mut self.dynamics {
            Dynamics::Rotating { potential, .. } => {
                *potential = (!field.is_zero()).then_some(field);
                Ok(self)
            }
            Dynamics::Driven { .. } => Err(ModelError::WrongVariant("an explicit potential", self.variant)),
        }
    }

    /// Replaces the drive tones of a driven model.
    pub fn with_tones(mut self, new_tones: Vec<DriveTone>) -> Result<Self, ModelError> {
        let variant = self.variant;
        match &mut self.dynamics {
            Dynamics::Driven { onsite, tones, drives, .. } => {
                *drives = classify_bonds(&self.lattice, onsite, &new_tones)?;
                *tones = new_tones;
                Ok(self)
            }
            Dynamics::Rotating { .. } => Err(ModelError::WrongVariant("drive tones", variant)),
        }
    }

    /// Imposes a gauge: replaced directly in rotating-frame models, realised
    /// through the tone phases (up to a gauge transform) in driven models.
    pub fn with_gauge(mut self, target: &GaugeField) -> Result<Self, ModelError> {
        if !target.matches(&self.lattice) {
            return Err(LatticeError::GaugeMismatch.into());
        }
        match &mut self.dynamics {
            Dynamics::Rotating { gauge, .. } => {
                let drifts: Vec<f64> = gauge.links().iter().map(|l| l.drift).collect();
                let mut g = target.clone();
                for (l, d) in target.links().iter().zip(drifts) {
                    g.set_drift(l.from, l.to, d)?;
                }
                *gauge = g;
                Ok(self)
            }
            Dynamics::Driven { .. } => {
                let tones = tones::tones_for_gauge(&self, target)?;
                self.with_tones(tones)
            }
        }
    }

    /// Applies a synthetic electric field given as a potential: added as an
    /// on-site term in rotating-frame models, realised as tone phase drifts
    /// in driven models.
    pub fn with_field(self, field: &PotentialField) -> Result<Self, ModelError> {
        if self.variant.is_driven() {
            let tones = synthetic_efield_tones(&self, field)?;
            self.with_tones(tones)
        } else {
            self.with_potential(field.clone())
        }
    }

    /// Pairs of adjacent modulated sites whose drive frequencies differ by
    /// less than ten times the nominal rate.
    pub fn warnings(&self) -> Vec<String> {
        let tones = self.tones();
        let mut out = Vec::new();
        for b in self.lattice.nearest_bonds() {
            let ta = tones.iter().find(|t| t.site == b.from);
            let tb = tones.iter().find(|t| t.site == b.to);
            if let (Some(a), Some(c)) = (ta, tb) {
                let gap = (a.frequency.abs() - c.frequency.abs()).abs();
                if gap < 10.0 * self.nominal_rate {
                    out.push(format!(
                        "sites {} and {} have drive frequencies within {:.3} rad/us (< 10 J)",
                        b.from, b.to, gap
                    ));
                }
            }
        }
        out
    }

    pub(crate) fn bond_drives(&self) -> Option<&[BondDrive]> {
        match &self.dynamics {
            Dynamics::Driven { drives, .. } => Some(drives),
            Dynamics::Rotating { .. } => None,
        }
    }
}

fn classify_bonds(lattice: &LatticeSpec, onsite: &[f64], tones: &[DriveTone]) -> Result<Vec<BondDrive>, ModelError> {
    for (k, t) in tones.iter().enumerate() {
        if !lattice.is_active(t.site) {
            return Err(ModelError::ToneSite(t.site));
        }
        if tones[..k].iter().any(|u| u.site == t.site) {
            return Err(ModelError::DuplicateTone(t.site));
        }
        let finite = [t.amplitude, t.frequency, t.phase, t.phase_drift].iter().all(|v| v.is_finite());
        if !finite || t.frequency == 0.0 {
            return Err(ModelError::InvalidTone(t.site));
        }
    }
    lattice
        .bonds()
        .iter()
        .map(|b| {
            if b.kind == BondKind::NextNearest {
                return Ok(BondDrive::OffResonant);
            }
            let gap = onsite[b.from.index()] - onsite[b.to.index()];
            let scale = gap.abs().max(1.0);
            if gap.abs() <= 1e-9 * scale {
                return Ok(BondDrive::Resonant);
            }
            let resonant = |s: Site| {
                tones.iter().position(|t| t.site == s && (t.frequency.abs() - gap.abs()).abs() <= 1e-9 * scale)
            };
            match (resonant(b.from), resonant(b.to)) {
                (Some(_), Some(_)) => Err(ModelError::AmbiguousDriver(b.from, b.to)),
                (Some(k), None) => {
                    let sign = gap.signum();
                    if tones[k].frequency.signum() != sign {
                        return Err(ModelError::ToneSign { site: b.from, a: b.from, b: b.to });
                    }
                    Ok(BondDrive::Tone { tone: k, sign, driver_is_from: true })
                }
                (None, Some(k)) => {
                    let sign = -gap.signum();
                    if tones[k].frequency.signum() != sign {
                        return Err(ModelError::ToneSign { site: b.to, a: b.from, b: b.to });
                    }
                    Ok(BondDrive::Tone { tone: k, sign, driver_is_from: false })
                }
                (None, None) => Ok(BondDrive::OffResonant),
            }
        })
        .collect()
}

/// A Hamiltonian snapshot over the active sites (no vacuum level).
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<Complex64>,
    pub sites: Vec<Site>,
    pub time_dependent: bool,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.sites.len()
    }

    /// Largest |H − H†| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Exports `row,col,re,im` for every non-zero entry, one-based site labels.
    pub fn to_csv(&self) -> Result<String, Error> {
        let mut rows = Vec::new();
        for i in 0..self.dimension() {
            for j in 0..self.dimension() {
                let z = self.matrix[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    rows.push(vec![
                        self.sites[i].label().to_string(),
                        self.sites[j].label().to_string(),
                        fmt_f64(z.re),
                        fmt_f64(z.im),
                    ]);
                }
            }
        }
        render(&["row".into(), "col".into(), "re".into(), "im".into()], rows)
    }
}

/// The Hamiltonian of `model` at time `t` (µs), in the lab frame for driven
/// models and the rotating frame otherwise.
pub fn build_hamiltonian(model: &ModelSpec, t: f64) -> Result<HamiltonianMatrix, ModelError> {
    if !(t >= 0.0) {
        return Err(ModelError::NegativeTime(t));
    }
    let lattice = model.lattice();
    let sites = lattice.active_sites().to_vec();
    let n = sites.len();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let idx = |s: Site| lattice.basis_index(s).expect("bond endpoints are active");
    for (k, &s) in sites.iter().enumerate() {
        h[(k, k)] = Complex64::new(model.offsets()[s.index()], 0.0);
    }
    match model.dynamics() {
        Dynamics::Driven { onsite, tones, couplings, .. } => {
            for (k, &s) in sites.iter().enumerate() {
                h[(k, k)].re += onsite[s.index()];
            }
            for tone in tones {
                let k = idx(tone.site);
                h[(k, k)].re += tone.waveform(t);
            }
            for (bond, &rate) in lattice.bonds().iter().zip(couplings) {
                let (i, j) = (idx(bond.from), idx(bond.to));
                h[(i, j)] += Complex64::new(rate, 0.0);
                h[(j, i)] += Complex64::new(rate, 0.0);
            }
        }
        Dynamics::Rotating { gauge, couplings, potential } => {
            if let Some(p) = potential {
                for (k, &s) in sites.iter().enumerate() {
                    h[(k, k)].re += p.energy(s);
                }
            }
            for (link, &rate) in gauge.links().iter().zip(couplings) {
                let (i, j) = (idx(link.from), idx(link.to));
                let z = Complex64::from_polar(rate, -(link.phase + link.drift * t));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
    }
    Ok(HamiltonianMatrix { matrix: h, sites, time_dependent: model.is_time_dependent() })
}
