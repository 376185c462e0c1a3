//! Wave-packet picture of the Hall response on an open square lattice.
//!
//! Units inside this module: ħ = q = a = 1; rates in rad/µs, times in µs.
//! The band is ε(k) = −2J(cos kx + cos ky) and κ = k − (π/2, π/2).

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::error::Error;
use crate::exec::{map_indexed, Execution};
use crate::table::{fmt_f64, render};
use crate::units::wrap_phase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiclassicalError {
    #[error("lattice dimensions must be at least 1, got {0}x{1}")]
    EmptyLattice(usize, usize),
    #[error("step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("energy drifted by {0} at zero field")]
    EnergyDrift(f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

impl SemiclassicalError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, SemiclassicalError::EnergyDrift(_))
    }
}

/// Open-boundary sine mode `sin(kx·x)·sin(ky·y)`, x = 1..Nx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObcMode {
    pub kx: f64,
    pub ky: f64,
    pub energy: f64,
    /// Amplitude of this mode in the corner state (see [`corner_overlap`]).
    pub weight: f64,
}

pub fn band_energy(k: [f64; 2], rate: f64) -> f64 {
    -2.0 * rate * (k[0].cos() + k[1].cos())
}

/// Group velocity ∂ε/∂k.
pub fn band_velocity(k: [f64; 2], rate: f64) -> [f64; 2] {
    [2.0 * rate * k[0].sin(), 2.0 * rate * k[1].sin()]
}

fn check_dims(nx: usize, ny: usize) -> Result<(), SemiclassicalError> {
    if nx == 0 || ny == 0 {
        Err(SemiclassicalError::EmptyLattice(nx, ny))
    } else {
        Ok(())
    }
}

fn allowed(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |l| l as f64 * std::f64::consts::PI / (n + 1) as f64)
}

/// All Nx·Ny modes, kx-major, carrying their corner weights.
pub fn obc_modes(nx: usize, ny: usize, rate: f64) -> Result<Vec<ObcMode>, SemiclassicalError> {
    check_dims(nx, ny)?;
    let pref = 4.0 / ((nx + 1) * (ny + 1)) as f64;
    Ok(allowed(nx)
        .flat_map(|kx| {
            allowed(ny).map(move |ky| ObcMode {
                kx,
                ky,
                energy: band_energy([kx, ky], rate),
                weight: pref * kx.sin() * ky.sin(),
            })
        })
        .collect())
}

/// Coefficients c(kx, ky) = 4/((Nx+1)(Ny+1))·sin kx·sin ky of the state
/// localised on site (1, 1), in [`obc_modes`] order.
pub fn corner_overlap(nx: usize, ny: usize) -> Result<Vec<f64>, SemiclassicalError> {
    Ok(obc_modes(nx, ny, 1.0)?.into_iter().map(|m| m.weight).collect())
}

/// Σ_k c_k·sin(kx·x)·sin(ky·y) at every site, row-major over y then x.
pub fn reconstruct_corner(nx: usize, ny: usize) -> Result<Vec<f64>, SemiclassicalError> {
    let modes = obc_modes(nx, ny, 1.0)?;
    let mut out = Vec::with_capacity(nx * ny);
    for y in 1..=ny {
        for x in 1..=nx {
            out.push(modes.iter().map(|m| m.weight * (m.kx * x as f64).sin() * (m.ky * y as f64).sin()).sum());
        }
    }
    Ok(out)
}

/// Uniform open-boundary tight-binding matrix with hopping −J, sites
/// indexed `(y−1)·Nx + (x−1)`.
pub fn obc_hamiltonian(nx: usize, ny: usize, rate: f64) -> Result<DMatrix<f64>, SemiclassicalError> {
    check_dims(nx, ny)?;
    let n = nx * ny;
    let mut h = DMatrix::zeros(n, n);
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            if x + 1 < nx {
                h[(i, i + 1)] = -rate;
                h[(i + 1, i)] = -rate;
            }
            if y + 1 < ny {
                h[(i, i + nx)] = -rate;
                h[(i + nx, i)] = -rate;
            }
        }
    }
    Ok(h)
}

/// Largest ‖Hψ − εψ‖ over all normalised sine modes.
pub fn eigencheck(nx: usize, ny: usize, rate: f64) -> Result<f64, SemiclassicalError> {
    let h = obc_hamiltonian(nx, ny, rate)?;
    let modes = obc_modes(nx, ny, rate)?;
    let mut worst: f64 = 0.0;
    for m in modes {
        let psi = DVector::from_iterator(
            nx * ny,
            (0..ny).flat_map(|y| (0..nx).map(move |x| (m.kx * (x + 1) as f64).sin() * (m.ky * (y + 1) as f64).sin())),
        );
        let psi = psi.normalize();
        worst = worst.max((&h * &psi - &psi * m.energy).norm());
    }
    Ok(worst)
}

/// Which equations of motion to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linearization {
    /// κ̇x = Ex + 2JBz·cos κy, κ̇y = Ey − 2JBz·cos κx.
    #[default]
    Full,
    /// cos κ ≈ 1 in the force: κ̇ = E + 2JBz·(1, −1).
    SmallKappa,
}

/// Drive parameters shared by all trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    /// Force (Ex, Ey) in rad/µs per lattice constant.
    pub field: [f64; 2],
    /// Flux per plaquette in radians.
    pub flux: f64,
    /// Hopping rate J in rad/µs.
    pub rate: f64,
    pub linearization: Linearization,
}

impl Drive {
    /// Field of magnitude `e0` along (x̂ + ŷ)/√2.
    pub fn diagonal(e0: f64, flux: f64, rate: f64) -> Self {
        Drive { field: [e0 / SQRT_2, e0 / SQRT_2], flux, rate, linearization: Linearization::Full }
    }

    fn step_bound(&self) -> f64 {
        let fastest = self.field[0]
            .abs()
            .max(self.field[1].abs())
            .max(2.0 * self.rate.abs() * self.flux.abs())
            .max(self.rate.abs());
        0.01 / fastest.max(f64::MIN_POSITIVE)
    }

    fn rhs(&self, k: [f64; 2]) -> [f64; 2] {
        let b = 2.0 * self.rate * self.flux;
        match self.linearization {
            Linearization::Full => {
                [self.field[0] + b * (k[1] - FRAC_PI_2).cos(), self.field[1] - b * (k[0] - FRAC_PI_2).cos()]
            }
            Linearization::SmallKappa => [self.field[0] + b, self.field[1] - b],
        }
    }

    fn rk4(&self, k: [f64; 2], h: f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = self.rhs(k);
        let k2 = self.rhs(add(k, k1, 0.5 * h));
        let k3 = self.rhs(add(k, k2, 0.5 * h));
        let k4 = self.rhs(add(k, k3, h));
        [
            k[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            k[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    fn is_free(&self) -> bool {
        self.field == [0.0, 0.0] && self.flux == 0.0
    }
}

/// Momentum at each of `times` (which must start at 0 and increase),
/// using RK4 substeps no longer than `dt`.
fn propagate(drive: &Drive, k0: [f64; 2], times: &[f64], dt: f64) -> Vec<[f64; 2]> {
    let mut k = k0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / dt).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                k = drive.rk4(k, h);
            }
            t = target;
        }
        out.push(k);
    }
    out
}

fn check_step(drive: &Drive, dt: f64, times: &[f64]) -> Result<(), SemiclassicalError> {
    let finite = drive.field.iter().chain([&drive.flux, &drive.rate]).all(|v| v.is_finite());
    if !finite || !(drive.rate > 0.0) {
        return Err(SemiclassicalError::InvalidInput("field, flux and a positive rate must be finite"));
    }
    let ok_times = !times.is_empty()
        && times[0] >= 0.0
        && times.iter().all(|t| t.is_finite())
        && times.windows(2).all(|w| w[1] > w[0]);
    if !ok_times {
        return Err(SemiclassicalError::InvalidInput("times must be non-negative and increasing"));
    }
    let bound = drive.step_bound();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(SemiclassicalError::StepTooLarge { dt, bound });
    }
    Ok(())
}

/// Momentum, velocity and projected velocities along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Momentum wrapped to (−π, π].
    pub k: Vec<[f64; 2]>,
    pub velocity: Vec<[f64; 2]>,
    /// Along (x̂ + ŷ)/√2.
    pub longitudinal: Vec<f64>,
    /// Along (x̂ − ŷ)/√2.
    pub hall: Vec<f64>,
}

impl Trajectory {
    fn from_momenta(times: Vec<f64>, ks: Vec<[f64; 2]>, rate: f64) -> Self {
        let velocity: Vec<[f64; 2]> = ks.iter().map(|k| band_velocity(*k, rate)).collect();
        Trajectory {
            longitudinal: velocity.iter().map(|v| (v[0] + v[1]) / SQRT_2).collect(),
            hall: velocity.iter().map(|v| (v[0] - v[1]) / SQRT_2).collect(),
            k: ks.iter().map(|k| [wrap_phase(k[0]), wrap_phase(k[1])]).collect(),
            velocity,
            times,
        }
    }

    /// CSV with columns `t, kx, ky, vx, vy, v_L, v_H`.
    pub fn to_csv(&self) -> Result<String, Error> {
        let header: Vec<String> = ["t", "kx", "ky", "vx", "vy", "v_L", "v_H"].iter().map(|s| s.to_string()).collect();
        render(
            &header,
            (0..self.times.len()).map(|i| {
                [
                    self.times[i],
                    self.k[i][0],
                    self.k[i][1],
                    self.velocity[i][0],
                    self.velocity[i][1],
                    self.longitudinal[i],
                    self.hall[i],
                ]
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
            }),
        )
    }
}

/// Integrates one wave packet from `k0` to `tmax` with fixed step `dt`,
/// reporting every step.
pub fn integrate_eom(drive: &Drive, k0: [f64; 2], tmax: f64, dt: f64) -> Result<Trajectory, SemiclassicalError> {
    if !(tmax >= 0.0 && tmax.is_finite()) {
        return Err(SemiclassicalError::InvalidInput("tmax must be finite and non-negative"));
    }
    let n = (tmax / dt).ceil().max(0.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).min(tmax)).collect();
    let mut times = times;
    times.dedup();
    check_step(drive, dt, &times)?;
    let ks = propagate(drive, k0, &times, dt);
    if drive.is_free() {
        let e0 = band_energy(k0, drive.rate);
        let drift = ks.iter().map(|k| (band_energy(*k, drive.rate) - e0).abs()).fold(0.0, f64::max);
        if drift > 1e-10 * 2.0 * drive.rate.abs() {
            return Err(SemiclassicalError::EnergyDrift(drift));
        }
    }
    Ok(Trajectory::from_momenta(times, ks, drive.rate))
}

/// Weighted initial momenta for an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub momenta: Vec<[f64; 2]>,
    /// Normalised probabilities.
    pub weights: Vec<f64>,
}

impl Ensemble {
    /// Sine modes of an Nx×Ny lattice weighted by c² of the corner state.
    pub fn corner(nx: usize, ny: usize) -> Result<Self, SemiclassicalError> {
        let modes = obc_modes(nx, ny, 1.0)?;
        let total: f64 = modes.iter().map(|m| m.weight * m.weight).sum();
        Ok(Ensemble {
            momenta: modes.iter().map(|m| [m.kx, m.ky]).collect(),
            weights: modes.iter().map(|m| m.weight * m.weight / total).collect(),
        })
    }
}

/// Ensemble-averaged trajectory quantities.
pub fn ensemble_velocity(
    drive: &Drive,
    ensemble: &Ensemble,
    times: &[f64],
    dt: f64,
    exec: Execution,
) -> Result<Trajectory, SemiclassicalError> {
    check_step(drive, dt, times)?;
    let runs = map_indexed(exec, &ensemble.momenta, |_, &k0| propagate(drive, k0, times, dt));
    let n = times.len();
    let mut k = vec![[0.0; 2]; n];
    let mut velocity = vec![[0.0; 2]; n];
    for (run, w) in runs.iter().zip(&ensemble.weights) {
        for i in 0..n {
            let v = band_velocity(run[i], drive.rate);
            for d in 0..2 {
                k[i][d] += w * run[i][d];
                velocity[i][d] += w * v[d];
            }
        }
    }
    Ok(Trajectory {
        longitudinal: velocity.iter().map(|v| (v[0] + v[1]) / SQRT_2).collect(),
        hall: velocity.iter().map(|v| (v[0] - v[1]) / SQRT_2).collect(),
        k,
        velocity,
        times: times.to_vec(),
    })
}

/// Hall and longitudinal velocity of the corner state of an Nx×Ny lattice
/// under a diagonal field `e0` and flux `flux`.
#[allow(clippy::too_many_arguments)]
pub fn hall_velocity_ensemble(
    e0: f64,
    flux: f64,
    rate: f64,
    nx: usize,
    ny: usize,
    times: &[f64],
    linearization: Linearization,
    exec: Execution,
) -> Result<Trajectory, SemiclassicalError> {
    let drive = Drive { linearization, ..Drive::diagonal(e0, flux, rate) };
    let dt = drive.step_bound();
    ensemble_velocity(&drive, &Ensemble::corner(nx, ny)?, times, dt, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_lattice() {
        let m = obc_modes(1, 1, 2.0).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].kx - FRAC_PI_2).abs() < 1e-15 && (m[0].ky - FRAC_PI_2).abs() < 1e-15);
        assert!(m[0].energy.abs() < 1e-15);
        assert!((m[0].weight - 1.0).abs() < 1e-15);
        assert!(obc_modes(0, 3, 1.0).is_err());
    }

    #[test]
    fn spectrum_is_symmetric() {
        let m = obc_modes(4, 3, 1.3).unwrap();
        for a in &m {
            assert!(m.iter().any(|b| (a.energy + b.energy).abs() < 1e-12));
        }
    }

    #[test]
    fn corner_state_is_reconstructed() {
        for (nx, ny) in [(4, 4), (5, 3), (20, 20)] {
            let r = reconstruct_corner(nx, ny).unwrap();
            for (i, v) in r.iter().enumerate() {
                let want = if i == 0 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "{nx}x{ny} site {i}: {v}");
            }
        }
    }

    #[test]
    fn weights_are_reflection_symmetric() {
        let m = obc_modes(6, 6, 1.0).unwrap();
        for a in &m {
            let b =
                m.iter().find(|b| (b.kx - (PI - a.kx)).abs() < 1e-12 && (b.ky - (PI - a.ky)).abs() < 1e-12).unwrap();
            assert!((a.weight - b.weight).abs() < 1e-14);
        }
    }

    #[test]
    fn free_motion_and_pure_field() {
        let d = Drive::diagonal(0.0, 0.0, 1.0);
        let t = integrate_eom(&d, [0.3, 1.1], 10.0, 0.01).unwrap();
        assert!(t.k.iter().all(|k| (k[0] - 0.3).abs() < 1e-15 && (k[1] - 1.1).abs() < 1e-15));
        let d = Drive { field: [0.2, -0.1], flux: 0.0, rate: 1.0, linearization: Linearization::Full };
        let t = integrate_eom(&d, [0.3, 1.1], 5.0, 0.01).unwrap();
        for (time, k) in t.times.iter().zip(&t.k) {
            assert!((k[0] - wrap_phase(0.3 + 0.2 * time)).abs() < 1e-12);
            assert!((k[1] - wrap_phase(1.1 - 0.1 * time)).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_step_rejected() {
        let d = Drive::diagonal(1.0, 0.5, 1.0);
        assert!(matches!(integrate_eom(&d, [0.0, 0.0], 1.0, 0.1), Err(SemiclassicalError::StepTooLarge { .. })));
    }

    #[test]
    fn small_kappa_tracks_linear_solution() {
        let d = Drive { field: [0.01, 0.01], flux: 0.005, rate: 1.0, linearization: Linearization::Full };
        let k0 = [FRAC_PI_2 + 0.01, FRAC_PI_2 + 0.01];
        let t = integrate_eom(&d, k0, 2.0, 1e-3).unwrap();
        let b = 2.0 * d.rate * d.flux;
        for (time, k) in t.times.iter().zip(&t.k) {
            let lin = [0.01 + (d.field[0] + b) * time, 0.01 + (d.field[1] - b) * time];
            let kappa = lin[0].abs().max(lin[1].abs());
            let bound = b.abs() * kappa * kappa * time + 1e-13;
            assert!((k[0] - FRAC_PI_2 - lin[0]).abs() <= bound);
            assert!((k[1] - FRAC_PI_2 - lin[1]).abs() <= bound);
        }
    }
}
