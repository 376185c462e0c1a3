//! Square-lattice geometry, bonds, plaquettes and Peierls-phase algebra.
//!
//! Sites are numbered row-major from the bottom-left corner. Labels shown to
//! users start at 1; [`Site::index`] is the zero-based position used for
//! per-site vectors.

use std::collections::VecDeque;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use thiserror::Error;

use crate::error::Error;
use crate::table::{fmt_f64, render};
use crate::units::wrap_phase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice needs at least one row and one column, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("active mask has {got} entries, lattice has {expected} sites")]
    MaskLength { expected: usize, got: usize },
    #[error("site {0} is outside the lattice")]
    UnknownSite(usize),
    #[error("sites {0} and {1} are not nearest or next-nearest neighbours")]
    NotABond(Site, Site),
    #[error("bond {0}-{1} references inactive site")]
    InactiveSite(Site, Site),
    #[error("bond {0}-{1} given conflicting rates {2} and {3}")]
    InconsistentRate(Site, Site, f64, f64),
    #[error("bond {0}-{1} has non-positive or non-finite rate {2}")]
    InvalidRate(Site, Site, f64),
    #[error("sites do not form a counterclockwise unit plaquette of active sites")]
    NotAPlaquette,
    #[error("loop step {0}->{1} is not a nearest-neighbour bond")]
    BrokenLoop(Site, Site),
    #[error("value vector has {got} entries, lattice has {expected} sites")]
    FieldLength { expected: usize, got: usize },
    #[error("non-finite value at site {0}")]
    NonFinite(Site),
    #[error("direction vector must have unit length, got norm {0}")]
    NotUnitDirection(f64),
    #[error("gauge field does not match the lattice bond list")]
    GaugeMismatch,
}

/// A lattice site, stored as its zero-based row-major index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(usize);

impl Site {
    pub const fn from_index(index: usize) -> Self {
        Site(index)
    }

    /// Builds a site from its one-based label.
    pub fn from_label(label: usize) -> Option<Self> {
        label.checked_sub(1).map(Site)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn label(self) -> usize {
        self.0 + 1
    }
}

/// Serialised as its one-based label.
impl serde::Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.label() as u64)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondKind {
    Nearest,
    NextNearest,
}

/// An oriented coupling between two active sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub from: Site,
    pub to: Site,
    pub kind: BondKind,
    /// Bare exchange rate in rad/µs.
    pub bare_rate: f64,
}

impl Bond {
    /// +1 if `a -> b` matches this bond's orientation, −1 if reversed.
    pub fn orientation(&self, a: Site, b: Site) -> Option<f64> {
        if self.from == a && self.to == b {
            Some(1.0)
        } else if self.from == b && self.to == a {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn other(&self, s: Site) -> Option<Site> {
        if s == self.from {
            Some(self.to)
        } else if s == self.to {
            Some(self.from)
        } else {
            None
        }
    }
}

/// The corner where particles are initialised; fixes the rotated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Corner {
    #[default]
    BottomLeft,
    BottomRight,
    TopLeft,
    TopRight,
}

/// Grid position (column, row) and rotated coordinates (x, y).
///
/// `x` runs along the diagonal from the origin corner towards the opposite
/// corner; `y` is `x` rotated by −90°. Both are zero at the origin corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub col: f64,
    pub row: f64,
    pub x: f64,
    pub y: f64,
}

/// A rate assigned to one specific bond, in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOverride {
    pub a: Site,
    pub b: Site,
    pub rate: f64,
}

/// Bare couplings: defaults per bond kind plus per-bond overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BareRates {
    pub nearest: f64,
    /// Zero means next-nearest bonds are absent unless overridden.
    pub next_nearest: f64,
    pub overrides: Vec<RateOverride>,
}

impl BareRates {
    pub fn uniform(nearest: f64) -> Self {
        BareRates { nearest, next_nearest: 0.0, overrides: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    rows: usize,
    cols: usize,
    active: Vec<bool>,
    origin: Corner,
    positions: Vec<Position>,
    bonds: Vec<Bond>,
    basis: Vec<Option<usize>>,
    active_sites: Vec<Site>,
}

/// Builds a lattice from its size, rates and active-site mask.
pub fn build_lattice(
    rows: usize,
    cols: usize,
    rates: &BareRates,
    active: Option<&[bool]>,
    origin: Corner,
) -> Result<LatticeSpec, LatticeError> {
    if rows == 0 || cols == 0 {
        return Err(LatticeError::EmptyGrid { rows, cols });
    }
    let n = rows * cols;
    let active = match active {
        Some(m) if m.len() != n => return Err(LatticeError::MaskLength { expected: n, got: m.len() }),
        Some(m) => m.to_vec(),
        None => vec![true; n],
    };
    let rc = |s: Site| (s.index() / cols, s.index() % cols);
    let kind_of = |a: Site, b: Site| -> Option<BondKind> {
        let (ra, ca) = rc(a);
        let (rb, cb) = rc(b);
        match (ra.abs_diff(rb), ca.abs_diff(cb)) {
            (0, 1) | (1, 0) => Some(BondKind::Nearest),
            (1, 1) => Some(BondKind::NextNearest),
            _ => None,
        }
    };

    let mut explicit: Vec<(Site, Site, f64)> = Vec::new();
    for o in &rates.overrides {
        for s in [o.a, o.b] {
            if s.index() >= n {
                return Err(LatticeError::UnknownSite(s.label()));
            }
        }
        if o.a == o.b || kind_of(o.a, o.b).is_none() {
            return Err(LatticeError::NotABond(o.a, o.b));
        }
        if !active[o.a.index()] || !active[o.b.index()] {
            return Err(LatticeError::InactiveSite(o.a, o.b));
        }
        if !(o.rate.is_finite() && o.rate > 0.0) {
            return Err(LatticeError::InvalidRate(o.a, o.b, o.rate));
        }
        let key = (o.a.min(o.b), o.a.max(o.b));
        match explicit.iter().find(|e| (e.0, e.1) == key) {
            Some(e) if e.2 != o.rate => return Err(LatticeError::InconsistentRate(o.a, o.b, e.2, o.rate)),
            Some(_) => {}
            None => explicit.push((key.0, key.1, o.rate)),
        }
    }

    let mut bonds = Vec::new();
    let mut push = |a: Site, b: Site, kind: BondKind| -> Result<(), LatticeError> {
        if !active[a.index()] || !active[b.index()] {
            return Ok(());
        }
        let default = match kind {
            BondKind::Nearest => rates.nearest,
            BondKind::NextNearest => rates.next_nearest,
        };
        let rate = explicit.iter().find(|e| e.0 == a && e.1 == b).map(|e| e.2).unwrap_or(default);
        if kind == BondKind::NextNearest && rate == 0.0 {
            return Ok(());
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(LatticeError::InvalidRate(a, b, rate));
        }
        bonds.push(Bond { from: a, to: b, kind, bare_rate: rate });
        Ok(())
    };
    let at = |r: usize, c: usize| Site(r * cols + c);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                push(at(r, c), at(r, c + 1), BondKind::Nearest)?;
            }
            if r + 1 < rows {
                push(at(r, c), at(r + 1, c), BondKind::Nearest)?;
            }
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols.saturating_sub(1) {
            push(at(r, c), at(r + 1, c + 1), BondKind::NextNearest)?;
            push(at(r, c + 1), at(r + 1, c), BondKind::NextNearest)?;
        }
    }

    let (r0, c0) = match origin {
        Corner::BottomLeft => (0, 0),
        Corner::BottomRight => (0, cols - 1),
        Corner::TopLeft => (rows - 1, 0),
        Corner::TopRight => (rows - 1, cols - 1),
    };
    let sc = if c0 == 0 { 1.0 } else { -1.0 };
    let sr = if r0 == 0 { 1.0 } else { -1.0 };
    let positions = (0..n)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            let dc = c as f64 - c0 as f64;
            let dr = r as f64 - r0 as f64;
            Position {
                col: c as f64,
                row: r as f64,
                x: (sc * dc + sr * dr) * FRAC_1_SQRT_2,
                y: (sr * dc - sc * dr) * FRAC_1_SQRT_2,
            }
        })
        .collect();

    let mut basis = vec![None; n];
    let mut active_sites = Vec::new();
    for (k, &on) in active.iter().enumerate() {
        if on {
            basis[k] = Some(active_sites.len());
            active_sites.push(Site(k));
        }
    }

    Ok(LatticeSpec { rows, cols, active, origin, positions, bonds, basis, active_sites })
}

impl LatticeSpec {
    /// Fully active lattice with a uniform nearest-neighbour rate.
    pub fn uniform(rows: usize, cols: usize, rate: f64) -> Result<Self, LatticeError> {
        build_lattice(rows, cols, &BareRates::uniform(rate), None, Corner::BottomLeft)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn site_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn origin(&self) -> Corner {
        self.origin
    }

    pub fn origin_site(&self) -> Site {
        let (r, c) = match self.origin {
            Corner::BottomLeft => (0, 0),
            Corner::BottomRight => (0, self.cols - 1),
            Corner::TopLeft => (self.rows - 1, 0),
            Corner::TopRight => (self.rows - 1, self.cols - 1),
        };
        Site(r * self.cols + c)
    }

    /// Unit vector along the rotated x axis, in grid (col, row) components.
    pub fn x_hat(&self) -> [f64; 2] {
        let o = self.position(self.origin_site());
        let sc = if o.col == 0.0 { 1.0 } else { -1.0 };
        let sr = if o.row == 0.0 { 1.0 } else { -1.0 };
        [sc * FRAC_1_SQRT_2, sr * FRAC_1_SQRT_2]
    }

    pub fn contains(&self, s: Site) -> bool {
        s.index() < self.site_count()
    }

    pub fn is_active(&self, s: Site) -> bool {
        self.active.get(s.index()).copied().unwrap_or(false)
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    /// Active sites in increasing index order; this is the Hilbert-space basis.
    pub fn active_sites(&self) -> &[Site] {
        &self.active_sites
    }

    /// Position of an active site in the Hilbert-space basis.
    pub fn basis_index(&self, s: Site) -> Option<usize> {
        self.basis.get(s.index()).copied().flatten()
    }

    pub fn site_at(&self, row: usize, col: usize) -> Option<Site> {
        (row < self.rows && col < self.cols).then_some(Site(row * self.cols + col))
    }

    pub fn row_col(&self, s: Site) -> (usize, usize) {
        (s.index() / self.cols, s.index() % self.cols)
    }

    pub fn position(&self, s: Site) -> Position {
        self.positions[s.index()]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn nearest_bonds(&self) -> impl Iterator<Item = &Bond> {
        self.bonds.iter().filter(|b| b.kind == BondKind::Nearest)
    }

    /// Index into [`Self::bonds`] plus the orientation of `a -> b`.
    pub fn find_bond(&self, a: Site, b: Site) -> Option<(usize, f64)> {
        self.bonds.iter().enumerate().find_map(|(k, bond)| bond.orientation(a, b).map(|o| (k, o)))
    }

    /// All unit plaquettes whose four corners are active.
    pub fn plaquettes(&self) -> Vec<Plaquette> {
        let mut out = Vec::new();
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols.saturating_sub(1) {
                let p = Plaquette { row: r, col: c };
                if p.sites(self).iter().all(|&s| self.is_active(s)) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Same geometry and rates with a different origin corner.
    pub fn with_origin(&self, origin: Corner) -> Self {
        let rates = self.bare_rates();
        build_lattice(self.rows, self.cols, &rates, Some(&self.active), origin)
            .expect("re-building a valid lattice cannot fail")
    }

    /// The bare rates of this lattice as explicit overrides.
    pub fn bare_rates(&self) -> BareRates {
        BareRates {
            nearest: 1.0,
            next_nearest: 0.0,
            overrides: self.bonds.iter().map(|b| RateOverride { a: b.from, b: b.to, rate: b.bare_rate }).collect(),
        }
    }

    /// Nearest-neighbour sites of `s` among active sites.
    pub fn neighbours(&self, s: Site) -> Vec<Site> {
        self.nearest_bonds().filter_map(|b| b.other(s)).collect()
    }

    /// Breadth-first distances on the nearest-neighbour graph.
    pub fn graph_distances(&self, from: Site) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.site_count()];
        let mut queue = VecDeque::new();
        dist[from.index()] = Some(0);
        queue.push_back(from);
        while let Some(s) = queue.pop_front() {
            let d = dist[s.index()].unwrap_or(0);
            for n in self.neighbours(s) {
                if dist[n.index()].is_none() {
                    dist[n.index()] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

/// A unit square identified by its bottom-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plaquette {
    pub row: usize,
    pub col: usize,
}

impl Plaquette {
    /// Corners in counterclockwise order starting at the bottom-left.
    pub fn sites(&self, lattice: &LatticeSpec) -> [Site; 4] {
        let at = |r: usize, c: usize| Site(r * lattice.cols + c);
        [at(self.row, self.col), at(self.row, self.col + 1), at(self.row + 1, self.col + 1), at(self.row + 1, self.col)]
    }

    /// Recognises four sites given in counterclockwise order (any start).
    pub fn from_sites(lattice: &LatticeSpec, loop_sites: [Site; 4]) -> Result<Self, LatticeError> {
        if loop_sites.iter().any(|&s| !lattice.is_active(s)) {
            return Err(LatticeError::NotAPlaquette);
        }
        let (r, c) = loop_sites.iter().map(|&s| lattice.row_col(s)).min().ok_or(LatticeError::NotAPlaquette)?;
        if r + 1 >= lattice.rows || c + 1 >= lattice.cols {
            return Err(LatticeError::NotAPlaquette);
        }
        let p = Plaquette { row: r, col: c };
        let ccw = p.sites(lattice);
        let start = ccw.iter().position(|&s| s == loop_sites[0]).ok_or(LatticeError::NotAPlaquette)?;
        if (0..4).all(|k| ccw[(start + k) % 4] == loop_sites[k]) {
            Ok(p)
        } else {
            Err(LatticeError::NotAPlaquette)
        }
    }
}

/// One nearest-neighbour link of a gauge field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: Site,
    pub to: Site,
    /// Peierls phase for hopping `from -> to`, in (−π, π].
    pub phase: f64,
    /// Linear phase drift in rad/µs (synthetic electric field).
    pub drift: f64,
}

/// Peierls phases on the nearest-neighbour bonds of a lattice.
///
/// Next-nearest bonds carry no phase in any gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    links: Vec<Link>,
}

impl GaugeField {
    pub fn zero(lattice: &LatticeSpec) -> Self {
        Self::from_fn(lattice, |_, _| 0.0)
    }

    /// Phase for each nearest bond, oriented as in [`LatticeSpec::bonds`].
    pub fn from_fn(lattice: &LatticeSpec, phase: impl Fn(Site, Site) -> f64) -> Self {
        let links = lattice
            .nearest_bonds()
            .map(|b| Link { from: b.from, to: b.to, phase: wrap_phase(phase(b.from, b.to)), drift: 0.0 })
            .collect();
        GaugeField { links }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    fn locate(&self, a: Site, b: Site) -> Option<(usize, f64)> {
        self.links.iter().enumerate().find_map(|(k, l)| {
            if l.from == a && l.to == b {
                Some((k, 1.0))
            } else if l.from == b && l.to == a {
                Some((k, -1.0))
            } else {
                None
            }
        })
    }

    /// Phase for hopping `a -> b`; antisymmetric in the arguments.
    pub fn phase(&self, a: Site, b: Site) -> Option<f64> {
        self.locate(a, b).map(|(k, o)| {
            let p = self.links[k].phase;
            if o > 0.0 {
                p
            } else {
                wrap_phase(-p)
            }
        })
    }

    /// Phase drift rate for `a -> b`, antisymmetric.
    pub fn drift(&self, a: Site, b: Site) -> Option<f64> {
        self.locate(a, b).map(|(k, o)| o * self.links[k].drift)
    }

    /// Adds `delta` to the phase of `a -> b`.
    pub fn add_phase(&mut self, a: Site, b: Site, delta: f64) -> Result<(), LatticeError> {
        let (k, o) = self.locate(a, b).ok_or(LatticeError::BrokenLoop(a, b))?;
        self.links[k].phase = wrap_phase(self.links[k].phase + o * delta);
        Ok(())
    }

    /// Sets the drift of `a -> b`.
    pub fn set_drift(&mut self, a: Site, b: Site, drift: f64) -> Result<(), LatticeError> {
        let (k, o) = self.locate(a, b).ok_or(LatticeError::BrokenLoop(a, b))?;
        self.links[k].drift = o * drift;
        Ok(())
    }

    /// True when every link carries zero drift.
    pub fn is_static(&self) -> bool {
        self.links.iter().all(|l| l.drift == 0.0)
    }

    /// Checks that the links follow the nearest bonds of `lattice`.
    pub fn matches(&self, lattice: &LatticeSpec) -> bool {
        let mut bonds = lattice.nearest_bonds();
        self.links.iter().all(|l| bonds.next().is_some_and(|b| b.from == l.from && b.to == l.to))
            && bonds.next().is_none()
    }

    /// Exports `i,j,phase` rows with one-based site labels.
    pub fn to_csv(&self) -> Result<String, Error> {
        render(
            &["i".into(), "j".into(), "phase".into()],
            self.links.iter().map(|l| vec![l.from.label().to_string(), l.to.label().to_string(), fmt_f64(l.phase)]),
        )
    }
}

/// A real value per site (gauge function Λ).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(lattice: &LatticeSpec, values: Vec<f64>) -> Result<Self, LatticeError> {
        check_site_values(lattice, &values)?;
        Ok(ScalarField { values })
    }

    pub fn value(&self, s: Site) -> f64 {
        self.values[s.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// On-site energy per site in rad/µs.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    energy: Vec<f64>,
}

impl PotentialField {
    pub fn new(lattice: &LatticeSpec, energy: Vec<f64>) -> Result<Self, LatticeError> {
        check_site_values(lattice, &energy)?;
        Ok(PotentialField { energy })
    }

    pub fn zero(lattice: &LatticeSpec) -> Self {
        PotentialField { energy: vec![0.0; lattice.site_count()] }
    }

    pub fn energy(&self, s: Site) -> f64 {
        self.energy[s.index()]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energy
    }

    pub fn is_zero(&self) -> bool {
        self.energy.iter().all(|&e| e == 0.0)
    }
}

fn check_site_values(lattice: &LatticeSpec, values: &[f64]) -> Result<(), LatticeError> {
    if values.len() != lattice.site_count() {
        return Err(LatticeError::FieldLength { expected: lattice.site_count(), got: values.len() });
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(LatticeError::NonFinite(Site(k))),
        None => Ok(()),
    }
}

/// Oriented phase sum around a closed loop of nearest-neighbour sites,
/// reduced to (−π, π]. The loop closes back to its first site implicitly.
pub fn loop_flux(gauge: &GaugeField, loop_sites: &[Site]) -> Result<f64, LatticeError> {
    let n = loop_sites.len();
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (loop_sites[k], loop_sites[(k + 1) % n]);
        total += gauge.phase(a, b).ok_or(LatticeError::BrokenLoop(a, b))?;
    }
    Ok(wrap_phase(total))
}

/// Flux through one unit plaquette, traversed counterclockwise.
pub fn plaquette_flux(gauge: &GaugeField, lattice: &LatticeSpec, plaquette: &Plaquette) -> Result<f64, LatticeError> {
    if plaquette.row + 1 >= lattice.rows() || plaquette.col + 1 >= lattice.cols() {
        return Err(LatticeError::NotAPlaquette);
    }
    let sites = plaquette.sites(lattice);
    if sites.iter().any(|&s| !lattice.is_active(s)) {
        return Err(LatticeError::NotAPlaquette);
    }
    loop_flux(gauge, &sites)
}

/// Applies φ_ij → φ_ij + Λ_j − Λ_i on every link; drifts are untouched.
pub fn gauge_transform(gauge: &GaugeField, lambda: &ScalarField) -> GaugeField {
    GaugeField {
        links: gauge
            .links
            .iter()
            .map(|l| Link { phase: wrap_phase(l.phase + lambda.value(l.to) - lambda.value(l.from)), ..*l })
            .collect(),
    }
}

/// Phase pattern used for a uniform field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeLayout {
    /// Phases in multiples of Φ/2 arranged symmetrically about the lattice centre,
    /// as realised by the modulation-tone layout of the 4×4 device.
    #[default]
    Symmetric,
    /// All phase on horizontal bonds, growing with row.
    Landau,
}

/// A gauge with flux `flux` through every unit plaquette.
pub fn uniform_field_gauge(lattice: &LatticeSpec, flux: f64, layout: GaugeLayout) -> GaugeField {
    let centre = (lattice.rows() + lattice.cols()) as f64 / 2.0 - 1.0;
    GaugeField::from_fn(lattice, |a, b| {
        let (r, c) = lattice.row_col(a);
        let (r, c) = (r as f64, c as f64);
        let horizontal = lattice.row_col(b).0 == lattice.row_col(a).0;
        match (layout, horizontal) {
            (GaugeLayout::Symmetric, true) => flux * (centre - r - c) / 2.0,
            (GaugeLayout::Symmetric, false) => flux * (r + c + 1.0 - centre) / 2.0,
            (GaugeLayout::Landau, true) => -flux * r,
            (GaugeLayout::Landau, false) => 0.0,
        }
    })
}

/// Linear potential `strength · (r − r_origin)·direction`, referenced to the
/// lattice origin corner.
pub fn linear_potential(
    lattice: &LatticeSpec,
    strength: f64,
    direction: [f64; 2],
) -> Result<PotentialField, LatticeError> {
    linear_potential_about(lattice, strength, direction, lattice.origin_site())
}

/// Linear potential zero-referenced at `reference`.
pub fn linear_potential_about(
    lattice: &LatticeSpec,
    strength: f64,
    direction: [f64; 2],
    reference: Site,
) -> Result<PotentialField, LatticeError> {
    let norm = direction[0].hypot(direction[1]);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(LatticeError::NotUnitDirection(norm));
    }
    if !lattice.contains(reference) {
        return Err(LatticeError::UnknownSite(reference.label()));
    }
    let p0 = lattice.position(reference);
    let energy = (0..lattice.site_count())
        .map(|k| {
            let p = lattice.position(Site(k));
            strength * ((p.col - p0.col) * direction[0] + (p.row - p0.row) * direction[1])
        })
        .collect();
    PotentialField::new(lattice, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2, TAU};

    fn s(label: usize) -> Site {
        Site::from_label(label).unwrap()
    }

    #[test]
    fn four_by_four_has_24_nearest_bonds() {
        let l = LatticeSpec::uniform(4, 4, TAU * 5.9).unwrap();
        assert_eq!(l.nearest_bonds().count(), 24);
        assert_eq!(l.bonds().len(), 24);
        assert_eq!(l.plaquettes().len(), 9);
    }

    #[test]
    fn smallest_lattice_has_one_bond() {
        let l = LatticeSpec::uniform(1, 2, 1.0).unwrap();
        assert_eq!(l.bonds().len(), 1);
        assert_eq!(l.active_sites().len(), 2);
    }

    #[test]
    fn ring_of_twelve_from_mask() {
        let mut mask = vec![true; 16];
        for label in [6, 7, 10, 11] {
            mask[label - 1] = false;
        }
        let l = build_lattice(4, 4, &BareRates::uniform(1.0), Some(&mask), Corner::BottomLeft).unwrap();
        // brute-force count of active unit-distance pairs
        let mut count = 0;
        for a in 0..16 {
            for b in (a + 1)..16 {
                let (ra, ca) = (a / 4, a % 4);
                let (rb, cb) = (b / 4, b % 4);
                if mask[a] && mask[b] && ra.abs_diff(rb) + ca.abs_diff(cb) == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 12);
        assert_eq!(l.nearest_bonds().count(), 12);
    }

    #[test]
    fn next_nearest_defaults_to_absent() {
        let mut rates = BareRates::uniform(1.0);
        rates.overrides.push(RateOverride { a: s(1), b: s(6), rate: 0.3 });
        let l = build_lattice(4, 4, &rates, None, Corner::BottomLeft).unwrap();
        let nnn: Vec<_> = l.bonds().iter().filter(|b| b.kind == BondKind::NextNearest).collect();
        assert_eq!(nnn.len(), 1);
        assert_eq!(nnn[0].bare_rate, 0.3);
    }

    #[test]
    fn conflicting_orientations_rejected() {
        let rates = BareRates {
            nearest: 1.0,
            next_nearest: 0.0,
            overrides: vec![RateOverride { a: s(1), b: s(2), rate: 1.0 }, RateOverride { a: s(2), b: s(1), rate: 1.5 }],
        };
        assert!(matches!(
            build_lattice(2, 2, &rates, None, Corner::BottomLeft),
            Err(LatticeError::InconsistentRate(..))
        ));
    }

    #[test]
    fn bonds_to_inactive_sites_rejected() {
        let rates = BareRates {
            nearest: 1.0,
            next_nearest: 0.0,
            overrides: vec![RateOverride { a: s(1), b: s(2), rate: 1.0 }],
        };
        let mask = [true, false, true, true];
        assert!(matches!(
            build_lattice(2, 2, &rates, Some(&mask), Corner::BottomLeft),
            Err(LatticeError::InactiveSite(..))
        ));
        let bad = BareRates {
            nearest: 1.0,
            next_nearest: 0.0,
            overrides: vec![RateOverride { a: s(1), b: s(3), rate: 1.0 }],
        };
        assert!(matches!(build_lattice(1, 3, &bad, None, Corner::BottomLeft), Err(LatticeError::NotABond(..))));
    }

    #[test]
    fn rotated_coordinates() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        let far = l.position(s(16));
        assert!((far.x - 3.0 * SQRT_2).abs() < 1e-12);
        assert!(far.y.abs() < 1e-12);
        let top = l.position(s(13));
        assert!((top.y + 3.0 / SQRT_2).abs() < 1e-12);
        let o = l.position(s(1));
        assert_eq!((o.x, o.y), (0.0, 0.0));
        for k in 0..16 {
            let p = l.position(Site(k));
            assert!((p.x - (p.col + p.row) / SQRT_2).abs() < 1e-12);
            assert!((p.y - (p.col - p.row) / SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn top_left_origin_frame() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap().with_origin(Corner::TopLeft);
        assert_eq!(l.origin_site(), s(13));
        let p = l.position(s(4));
        assert!((p.x - 3.0 * SQRT_2).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
        let x = l.x_hat();
        assert!((x[0] - 1.0 / SQRT_2).abs() < 1e-15 && (x[1] + 1.0 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_gauge_has_zero_flux() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        let g = GaugeField::zero(&l);
        for p in l.plaquettes() {
            assert_eq!(plaquette_flux(&g, &l, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn gauge_phase_is_antisymmetric() {
        let l = LatticeSpec::uniform(3, 3, 1.0).unwrap();
        let g = GaugeField::from_fn(&l, |a, b| 0.1 * a.index() as f64 - 0.37 * b.index() as f64);
        for b in l.nearest_bonds() {
            let f = g.phase(b.from, b.to).unwrap();
            let r = g.phase(b.to, b.from).unwrap();
            assert!(wrap_phase(f + r).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_layouts_give_requested_flux() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        for layout in [GaugeLayout::Symmetric, GaugeLayout::Landau] {
            for flux in [0.0, PI / 6.0, -PI / 2.0, PI] {
                let g = uniform_field_gauge(&l, flux, layout);
                for p in l.plaquettes() {
                    let f = plaquette_flux(&g, &l, &p).unwrap();
                    assert!(crate::units::phase_distance(f, flux) < 1e-12, "{layout:?} {flux} {f}");
                }
            }
        }
        let g = uniform_field_gauge(&l, 0.0, GaugeLayout::Symmetric);
        assert!(g.links().iter().all(|k| k.phase == 0.0));
    }

    #[test]
    fn symmetric_layout_uses_half_flux_steps() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        let flux = 0.2;
        let g = uniform_field_gauge(&l, flux, GaugeLayout::Symmetric);
        for link in g.links() {
            let m = link.phase / (flux / 2.0);
            assert!((m - m.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_loop_flux_adds() {
        let l = LatticeSpec::uniform(3, 3, 1.0).unwrap();
        let g = GaugeField::from_fn(&l, |a, b| (a.index() * 7 + b.index() * 3) as f64 * 0.41);
        let p1 = plaquette_flux(&g, &l, &Plaquette { row: 0, col: 0 }).unwrap();
        let p2 = plaquette_flux(&g, &l, &Plaquette { row: 0, col: 1 }).unwrap();
        let both = loop_flux(&g, &[s(1), s(2), s(3), s(6), s(5), s(4)]).unwrap();
        assert!(crate::units::phase_distance(both, p1 + p2) < 1e-12);
    }

    #[test]
    fn constant_lambda_leaves_gauge_unchanged() {
        let l = LatticeSpec::uniform(3, 3, 1.0).unwrap();
        let g = uniform_field_gauge(&l, 0.7, GaugeLayout::Landau);
        let lam = ScalarField::new(&l, vec![1.3; 9]).unwrap();
        let h = gauge_transform(&g, &lam);
        for (a, b) in g.links().iter().zip(h.links()) {
            assert!(crate::units::phase_distance(a.phase, b.phase) < 1e-14);
        }
    }

    #[test]
    fn plaquette_recognition() {
        let l = LatticeSpec::uniform(3, 3, 1.0).unwrap();
        assert_eq!(Plaquette::from_sites(&l, [s(5), s(6), s(9), s(8)]).unwrap(), Plaquette { row: 1, col: 1 });
        assert_eq!(Plaquette::from_sites(&l, [s(9), s(8), s(5), s(6)]).unwrap(), Plaquette { row: 1, col: 1 });
        assert!(Plaquette::from_sites(&l, [s(5), s(8), s(9), s(6)]).is_err());
        assert!(Plaquette::from_sites(&l, [s(1), s(2), s(6), s(4)]).is_err());
    }

    #[test]
    fn chain_potential_about_centre() {
        let l = LatticeSpec::uniform(1, 11, 1.0).unwrap();
        let v = linear_potential_about(&l, 2.0, [1.0, 0.0], s(6)).unwrap();
        for j in 0..11 {
            assert!((v.energy(Site(j)) - 2.0 * (j as f64 - 5.0)).abs() < 1e-12);
        }
        let z = linear_potential(&l, 0.0, [1.0, 0.0]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn diagonal_potential_by_hand() {
        let l = LatticeSpec::uniform(4, 4, 1.0).unwrap();
        let f = 0.8;
        let v = linear_potential(&l, f, l.x_hat()).unwrap();
        for k in 0..16 {
            let (r, c) = (k / 4, k % 4);
            let expect = f * (r + c) as f64 / SQRT_2;
            assert!((v.energy(Site(k)) - expect).abs() < 1e-12);
        }
        assert!((v.energy(s(16)) - v.energy(s(1)) - f * 3.0 * SQRT_2).abs() < 1e-12);
        assert!(linear_potential(&l, 1.0, [1.0, 1.0]).is_err());
    }

    #[test]
    fn gauge_csv_has_header() {
        let l = LatticeSpec::uniform(1, 2, 1.0).unwrap();
        let mut g = GaugeField::zero(&l);
        g.add_phase(s(1), s(2), 0.5).unwrap();
        assert_eq!(g.to_csv().unwrap(), "i,j,phase\n1,2,0.5\n");
    }
}
