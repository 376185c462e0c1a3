//! Single-excitation dynamics: closed-system evolution, Lindblad master
//! equation and quasi-static disorder ensembles.
//!
//! The basis is the active sites of the lattice followed by one vacuum level.

mod generator;
mod integrator;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::error::Error;
use crate::exec::{try_map_indexed, Execution};
use crate::lattice::{LatticeError, LatticeSpec, Site};
use crate::model::{ModelError, ModelSpec, ModelVariant};
use crate::table::{fmt_f64, render};

pub use generator::max_step;
pub use integrator::IntegratorOptions;

use generator::{Generator, Operator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("initial state norm {0} differs from 1")]
    NotNormalised(f64),
    #[error("state vector has {got} entries, basis has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("time grid must be non-empty, finite, non-negative and strictly increasing")]
    InvalidTimes,
    #[error("density matrix invalid: {0}")]
    InvalidDensity(String),
    #[error("noise specification invalid: {0}")]
    InvalidNoise(String),
    #[error("integrator tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("step budget of {steps} exhausted at t = {time} us")]
    StepBudget { steps: usize, time: f64 },
    #[error("step size underflow at t = {time} us")]
    StepUnderflow { time: f64 },
    #[error("non-finite state at t = {time} us")]
    NonFinite { time: f64 },
    #[error("site {0} is not active")]
    InactiveSite(Site),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl EvolveError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EvolveError::StepBudget { .. } | EvolveError::StepUnderflow { .. } | EvolveError::NonFinite { .. }
        )
    }
}

/// Pure state over the active sites plus vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<Complex64>,
    sites: Vec<Site>,
}

impl QuantumState {
    /// One excitation on `site`.
    pub fn localised(lattice: &LatticeSpec, site: Site) -> Result<Self, EvolveError> {
        let k = lattice.basis_index(site).ok_or(EvolveError::InactiveSite(site))?;
        let mut amplitudes = DVector::zeros(lattice.active_sites().len() + 1);
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { amplitudes, sites: lattice.active_sites().to_vec() })
    }

    /// State from explicit amplitudes (active sites then vacuum); must be normalised.
    pub fn from_amplitudes(lattice: &LatticeSpec, amplitudes: Vec<Complex64>) -> Result<Self, EvolveError> {
        let expected = lattice.active_sites().len() + 1;
        if amplitudes.len() != expected {
            return Err(EvolveError::StateLength { expected, got: amplitudes.len() });
        }
        let state = QuantumState { amplitudes: DVector::from_vec(amplitudes), sites: lattice.active_sites().to_vec() };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(EvolveError::NotNormalised(norm));
        }
        Ok(state)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Site populations in basis order (vacuum excluded).
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().take(self.sites.len()).map(|a| a.norm_sqr()).collect()
    }
}

/// Density matrix over the same basis as [`QuantumState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    sites: Vec<Site>,
}

impl DensityMatrix {
    pub fn from_state(state: &QuantumState) -> Self {
        let a = &state.amplitudes;
        DensityMatrix { matrix: a * a.adjoint(), sites: state.sites.clone() }
    }

    /// Validates trace, Hermiticity and positivity (to 1e−9).
    pub fn new(lattice: &LatticeSpec, matrix: DMatrix<Complex64>) -> Result<Self, EvolveError> {
        let n = lattice.active_sites().len() + 1;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(EvolveError::InvalidDensity(format!("expected {n}x{n}")));
        }
        let rho = DensityMatrix { matrix, sites: lattice.active_sites().to_vec() };
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(EvolveError::InvalidDensity(format!("trace {tr}")));
        }
        if rho.hermiticity_defect() > 1e-9 {
            return Err(EvolveError::InvalidDensity("not Hermitian".into()));
        }
        let eig = rho.matrix.clone().symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(EvolveError::InvalidDensity(format!("eigenvalue {min}")));
        }
        Ok(rho)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.sites.len()).map(|k| self.matrix[(k, k)].re).collect()
    }
}

/// Decoherence and disorder parameters. Per-site vectors are indexed by
/// site index over the whole lattice (inactive entries are ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Energy relaxation times in µs.
    pub t1_us: Option<Vec<f64>>,
    /// Pure dephasing times in µs.
    pub tphi_us: Option<Vec<f64>>,
    /// Standard deviation of static on-site offsets in rad/µs.
    pub disorder_sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { t1_us: None, tphi_us: None, disorder_sigma: 0.0, samples: 1, seed: 0 }
    }
}

impl NoiseSpec {
    fn validate(&self, lattice: &LatticeSpec) -> Result<(), EvolveError> {
        for (name, v) in [("t1", &self.t1_us), ("tphi", &self.tphi_us)] {
            if let Some(v) = v {
                if v.len() != lattice.site_count() {
                    return Err(EvolveError::InvalidNoise(format!("{name} needs one entry per site")));
                }
                if v.iter().any(|&x| !(x > 0.0)) {
                    return Err(EvolveError::InvalidNoise(format!("{name} must be positive")));
                }
            }
        }
        if !(self.disorder_sigma >= 0.0 && self.disorder_sigma.is_finite()) {
            return Err(EvolveError::InvalidNoise("disorder sigma must be finite and >= 0".into()));
        }
        if self.samples == 0 {
            return Err(EvolveError::InvalidNoise("samples must be >= 1".into()));
        }
        Ok(())
    }

    fn has_decoherence(&self) -> bool {
        self.t1_us.is_some() || self.tphi_us.is_some()
    }
}

/// How the populations were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Eigendecomposition,
    RungeKutta,
    Lindblad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMetadata {
    pub variant: ModelVariant,
    pub method: Method,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub samples: usize,
    pub steps: usize,
}

/// Site populations on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub sites: Vec<Site>,
    /// `populations[t][k]` for basis site `k`.
    pub populations: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub metadata: EvolutionMetadata,
}

impl EvolutionResult {
    /// Population time series of `site`.
    pub fn series(&self, site: Site) -> Option<Vec<f64>> {
        let k = self.sites.iter().position(|&s| s == site)?;
        Some(self.populations.iter().map(|p| p[k]).collect())
    }

    /// CSV with columns `time_us, site_<label>..., total`.
    pub fn to_csv(&self) -> Result<String, Error> {
        let mut header = vec!["time_us".to_string()];
        header.extend(self.sites.iter().map(|s| format!("site_{}", s.label())));
        header.push("total".into());
        render(
            &header,
            self.times.iter().zip(&self.populations).zip(&self.total).map(|((t, p), tot)| {
                let mut row = vec![fmt_f64(*t)];
                row.extend(p.iter().map(|&x| fmt_f64(x)));
                row.push(fmt_f64(*tot));
                row
            }),
        )
    }
}

fn check_times(times: &[f64]) -> Result<(), EvolveError> {
    let ok = !times.is_empty()
        && times.iter().all(|t| t.is_finite())
        && times[0] >= 0.0
        && times.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(EvolveError::InvalidTimes)
    }
}

fn check_tolerance(options: &IntegratorOptions) -> Result<(), EvolveError> {
    if options.tolerance > 0.0 && options.tolerance.is_finite() {
        Ok(())
    } else {
        Err(EvolveError::InvalidTolerance(options.tolerance))
    }
}

fn populations_of(amplitudes: &[Complex64], n: usize) -> (Vec<f64>, f64) {
    let p: Vec<f64> = amplitudes[..n].iter().map(|a| a.norm_sqr()).collect();
    let total = p.iter().sum();
    (p, total)
}

/// Closed-system evolution `i dψ/dt = H(t) ψ`.
///
/// Stationary models are propagated through the eigendecomposition of H;
/// time-dependent ones with the adaptive integrator in the frame that
/// removes the diagonal part, which leaves populations unchanged.
pub fn evolve_schrodinger(
    model: &ModelSpec,
    psi0: &QuantumState,
    times: &[f64],
    options: &IntegratorOptions,
) -> Result<EvolutionResult, EvolveError> {
    check_times(times)?;
    check_tolerance(options)?;
    let lattice = model.lattice();
    let n = lattice.active_sites().len();
    if psi0.amplitudes.len() != n + 1 || psi0.sites != lattice.active_sites() {
        return Err(EvolveError::StateLength { expected: n + 1, got: psi0.amplitudes.len() });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(EvolveError::NotNormalised(norm));
    }
    let mut populations = Vec::with_capacity(times.len());
    let mut total = Vec::with_capacity(times.len());

    if !model.is_time_dependent() {
        let h = crate::model::build_hamiltonian(model, 0.0)?.matrix;
        let eig = h.symmetric_eigen();
        let coeffs = eig.eigenvectors.adjoint() * psi0.amplitudes.rows(0, n);
        for &t in times {
            if t == 0.0 {
                let (p, tot) = populations_of(psi0.amplitudes.as_slice(), n);
                populations.push(p);
                total.push(tot);
                continue;
            }
            let phased = DVector::from_iterator(
                n,
                coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
            );
            let psi = &eig.eigenvectors * phased;
            let (p, tot) = populations_of(psi.as_slice(), n);
            populations.push(p);
            total.push(tot);
        }
        return Ok(EvolutionResult {
            times: times.to_vec(),
            sites: lattice.active_sites().to_vec(),
            populations,
            total,
            metadata: EvolutionMetadata {
                variant: model.variant(),
                method: Method::Eigendecomposition,
                tolerance: None,
                seed: None,
                samples: 1,
                steps: 0,
            },
        });
    }

    let generator = Generator::new(model);
    let mut op = Operator::new(n + 1);
    let steps = integrator::integrate(
        |t, y, dy| {
            generator.fill(t, &mut op);
            op.apply_minus_i(y, dy);
        },
        psi0.amplitudes.iter().copied().collect(),
        times,
        options,
        max_step(model),
        |_, y| {
            let (p, tot) = populations_of(y, n);
            populations.push(p);
            total.push(tot);
        },
    )?;
    Ok(EvolutionResult {
        times: times.to_vec(),
        sites: lattice.active_sites().to_vec(),
        populations,
        total,
        metadata: EvolutionMetadata {
            variant: model.variant(),
            method: Method::RungeKutta,
            tolerance: Some(options.tolerance),
            seed: None,
            samples: 1,
            steps,
        },
    })
}

/// Lindblad evolution with relaxation `|vac⟩⟨i|` at rate 1/T1 and dephasing
/// `n̂_i` at rate 2/Tφ, so that the coherence between a site and the vacuum
/// decays as e^{−t/Tφ}.
pub fn evolve_lindblad(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    noise: &NoiseSpec,
    times: &[f64],
    options: &IntegratorOptions,
) -> Result<EvolutionResult, EvolveError> {
    check_times(times)?;
    check_tolerance(options)?;
    let lattice = model.lattice();
    noise.validate(lattice)?;
    let n = lattice.active_sites().len();
    let d = n + 1;
    if rho0.matrix.nrows() != d {
        return Err(EvolveError::StateLength { expected: d, got: rho0.matrix.nrows() });
    }
    let mut populations = Vec::with_capacity(times.len());
    let mut total = Vec::with_capacity(times.len());
    let steps = run_lindblad(model, rho0, noise, times, options, |_, y| {
        let p: Vec<f64> = (0..n).map(|k| y[k + k * d].re).collect();
        total.push(p.iter().sum());
        populations.push(p);
    })?;
    Ok(EvolutionResult {
        times: times.to_vec(),
        sites: lattice.active_sites().to_vec(),
        populations,
        total,
        metadata: EvolutionMetadata {
            variant: model.variant(),
            method: Method::Lindblad,
            tolerance: Some(options.tolerance),
            seed: None,
            samples: 1,
            steps,
        },
    })
}

/// Density matrix at time `t` under the same master equation as
/// [`evolve_lindblad`].
pub fn final_density(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    noise: &NoiseSpec,
    t: f64,
    options: &IntegratorOptions,
) -> Result<DensityMatrix, EvolveError> {
    check_times(&[t])?;
    check_tolerance(options)?;
    noise.validate(model.lattice())?;
    let d = model.lattice().active_sites().len() + 1;
    if rho0.matrix.nrows() != d {
        return Err(EvolveError::StateLength { expected: d, got: rho0.matrix.nrows() });
    }
    let mut last = DMatrix::zeros(d, d);
    run_lindblad(model, rho0, noise, &[t], options, |_, y| last = DMatrix::from_column_slice(d, d, y))?;
    Ok(DensityMatrix { matrix: last, sites: rho0.sites.clone() })
}

fn run_lindblad<G>(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    noise: &NoiseSpec,
    times: &[f64],
    options: &IntegratorOptions,
    emit: G,
) -> Result<usize, EvolveError>
where
    G: FnMut(usize, &[Complex64]),
{
    let lattice = model.lattice();
    let n = lattice.active_sites().len();
    let d = n + 1;
    let rate = |v: &Option<Vec<f64>>, scale: f64| -> Vec<f64> {
        lattice.active_sites().iter().map(|s| v.as_ref().map(|v| scale / v[s.index()]).unwrap_or(0.0)).collect()
    };
    let relax = rate(&noise.t1_us, 1.0);
    let dephase = rate(&noise.tphi_us, 2.0);
    // Decay rate of each density-matrix element (column-major a + b·d).
    let mut decay = vec![0.0; d * d];
    for b in 0..d {
        for a in 0..d {
            let mut g = 0.0;
            if a < n {
                g += 0.5 * (relax[a] + dephase[a]);
            }
            if b < n {
                g += 0.5 * (relax[b] + dephase[b]);
            }
            if a == b && a < n {
                // dephasing leaves populations alone
                g -= dephase[a];
            }
            decay[a + b * d] = g;
        }
    }
    let generator = Generator::new(model);
    let mut op = Operator::new(d);
    integrator::integrate(
        |t, y, dy| {
            generator.fill(t, &mut op);
            op.commutator_minus_i(y, dy);
            for (k, g) in decay.iter().enumerate() {
                dy[k] -= y[k] * *g;
            }
            let gain: f64 = (0..n).map(|k| relax[k] * y[k + k * d].re).sum();
            dy[n + n * d] += Complex64::new(gain, 0.0);
        },
        rho0.matrix.iter().copied().collect(),
        times,
        options,
        max_step(model),
        emit,
    )
}

/// Averages populations over quasi-static on-site disorder.
///
/// Sample `k` draws its offsets from a ChaCha stream `k` seeded with
/// `noise.seed`, so results do not depend on execution order. With
/// `disorder_sigma == 0` a single run is made.
pub fn disorder_average(
    model: &ModelSpec,
    psi0: &QuantumState,
    noise: &NoiseSpec,
    times: &[f64],
    options: &IntegratorOptions,
    exec: Execution,
) -> Result<EvolutionResult, EvolveError> {
    let lattice = model.lattice();
    noise.validate(lattice)?;
    let samples = if noise.disorder_sigma == 0.0 { 1 } else { noise.samples };
    let indices: Vec<u64> = (0..samples as u64).collect();
    let runs = try_map_indexed(exec, &indices, |_, &k| -> Result<EvolutionResult, EvolveError> {
        let mut offsets = model.offsets().to_vec();
        if noise.disorder_sigma > 0.0 {
            let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
            rng.set_stream(k);
            let dist = Normal::new(0.0, noise.disorder_sigma).expect("validated sigma");
            for o in offsets.iter_mut() {
                *o += dist.sample(&mut rng);
            }
        }
        let m = model.clone().with_offsets(offsets)?;
        if noise.has_decoherence() {
            evolve_lindblad(&m, &DensityMatrix::from_state(psi0), noise, times, options)
        } else {
            evolve_schrodinger(&m, psi0, times, options)
        }
    })?;
    let mut out = runs[0].clone();
    if runs.len() > 1 {
        let inv = 1.0 / runs.len() as f64;
        for (ti, row) in out.populations.iter_mut().enumerate() {
            for (k, p) in row.iter_mut().enumerate() {
                *p = runs.iter().map(|r| r.populations[ti][k]).sum::<f64>() * inv;
            }
        }
        for (ti, tot) in out.total.iter_mut().enumerate() {
            *tot = runs.iter().map(|r| r.total[ti]).sum::<f64>() * inv;
        }
        out.metadata.steps = runs.iter().map(|r| r.metadata.steps).sum();
    }
    out.metadata.seed = Some(noise.seed);
    out.metadata.samples = samples;
    Ok(out)
}
