//! Time-dependent generators for the integrator.
//!
//! Driven models are integrated in the frame that rotates with each site's
//! instantaneous frequency, where only the hopping terms remain:
//! `M_ij(t) = J_ij·exp(i(Φ_i(t) − Φ_j(t)))` with `Φ_i = ∫ h_ii`. This frame
//! change is a diagonal unitary, so populations are unaffected.

use num_complex::Complex64;

use crate::model::{Dynamics, ModelSpec};

/// Sparse Hermitian operator: real diagonal plus upper-triangle hops.
pub(crate) struct Operator {
    diag: Vec<f64>,
    hops: Vec<(usize, usize, Complex64)>,
    dim: usize,
}

impl Operator {
    pub(crate) fn new(dim: usize) -> Self {
        Operator { diag: vec![0.0; dim], hops: Vec::new(), dim }
    }

    /// `dy = −i·H·y`.
    pub(crate) fn apply_minus_i(&self, y: &[Complex64], dy: &mut [Complex64]) {
        for a in 0..self.dim {
            dy[a] = Complex64::new(0.0, -self.diag[a]) * y[a];
        }
        for &(i, j, c) in &self.hops {
            dy[i] += Complex64::new(c.im, -c.re) * y[j];
            dy[j] += Complex64::new(-c.im, -c.re) * y[i];
        }
    }

    /// `dy = −i·[H, ρ]` for column-major ρ.
    pub(crate) fn commutator_minus_i(&self, rho: &[Complex64], dy: &mut [Complex64]) {
        let d = self.dim;
        for b in 0..d {
            for a in 0..d {
                dy[a + b * d] = rho[a + b * d] * (self.diag[a] - self.diag[b]);
            }
        }
        for &(i, j, c) in &self.hops {
            let cc = c.conj();
            for b in 0..d {
                let (rjb, rib) = (rho[j + b * d], rho[i + b * d]);
                dy[i + b * d] += c * rjb;
                dy[j + b * d] += cc * rib;
            }
            for a in 0..d {
                let (rai, raj) = (rho[a + i * d], rho[a + j * d]);
                dy[a + j * d] -= rai * c;
                dy[a + i * d] -= raj * cc;
            }
        }
        for z in dy.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }
}

struct FrameTone {
    basis: usize,
    amplitude: f64,
    speed: f64,
    phase: f64,
}

enum Kind {
    Frame { base: Vec<f64>, tones: Vec<FrameTone>, bonds: Vec<(usize, usize, f64)> },
    Direct { diag: Vec<f64>, links: Vec<(usize, usize, f64, f64, f64)> },
}

pub(crate) struct Generator {
    kind: Kind,
    dim: usize,
}

impl Generator {
    pub(crate) fn new(model: &ModelSpec) -> Self {
        let lattice = model.lattice();
        let sites = lattice.active_sites();
        let dim = sites.len() + 1;
        let idx = |s| lattice.basis_index(s).expect("active");
        let kind = match model.dynamics() {
            Dynamics::Driven { onsite, tones, couplings, .. } => {
                let raw: Vec<f64> = sites.iter().map(|s| onsite[s.index()] + model.offsets()[s.index()]).collect();
                let reference = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
                let base = raw.iter().map(|w| w - reference).collect();
                let tones = tones
                    .iter()
                    .map(|t| FrameTone {
                        basis: idx(t.site),
                        amplitude: t.amplitude,
                        speed: t.angular_speed(),
                        phase: t.phase,
                    })
                    .collect();
                let bonds = lattice
                    .bonds()
                    .iter()
                    .zip(couplings)
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(b, &c)| (idx(b.from), idx(b.to), c))
                    .collect();
                Kind::Frame { base, tones, bonds }
            }
            Dynamics::Rotating { gauge, couplings, potential } => {
                let mut diag: Vec<f64> = sites.iter().map(|s| model.offsets()[s.index()]).collect();
                if let Some(p) = potential {
                    for (k, s) in sites.iter().enumerate() {
                        diag[k] += p.energy(*s);
                    }
                }
                diag.push(0.0);
                let links = gauge
                    .links()
                    .iter()
                    .zip(couplings)
                    .map(|(l, &c)| (idx(l.from), idx(l.to), c, l.phase, l.drift))
                    .collect();
                Kind::Direct { diag, links }
            }
        };
        Generator { kind, dim }
    }

    pub(crate) fn fill(&self, t: f64, op: &mut Operator) {
        op.hops.clear();
        match &self.kind {
            Kind::Frame { base, tones, bonds } => {
                let mut angle: Vec<f64> = base.iter().map(|w| w * t).collect();
                for tone in tones {
                    if tone.speed != 0.0 {
                        angle[tone.basis] +=
                            tone.amplitude / tone.speed * (tone.phase.cos() - (tone.speed * t + tone.phase).cos());
                    } else {
                        angle[tone.basis] += tone.amplitude * tone.phase.sin() * t;
                    }
                }
                let rot: Vec<Complex64> = angle.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
                op.diag.iter_mut().for_each(|d| *d = 0.0);
                for &(i, j, c) in bonds {
                    op.hops.push((i, j, rot[i] * rot[j].conj() * c));
                }
            }
            Kind::Direct { diag, links } => {
                op.diag.copy_from_slice(diag);
                for &(i, j, c, phase, drift) in links {
                    op.hops.push((i, j, Complex64::from_polar(c, -(phase + drift * t))));
                }
            }
        }
        debug_assert_eq!(op.dim, self.dim);
    }
}

/// Largest step the integrator may take for `model`: 1/(50·max(|δ|+|Ω|))
/// for driven models, 1/(50·‖H‖) otherwise.
pub fn max_step(model: &ModelSpec) -> f64 {
    let fastest = match model.dynamics() {
        Dynamics::Driven { onsite, tones, .. } => {
            let tone = tones.iter().map(|t| t.angular_speed().abs() + t.amplitude.abs()).fold(0.0, f64::max);
            let gap = model
                .lattice()
                .bonds()
                .iter()
                .map(|b| (onsite[b.from.index()] - onsite[b.to.index()]).abs())
                .fold(0.0, f64::max);
            tone.max(gap)
        }
        Dynamics::Rotating { couplings, potential, gauge } => {
            let hop: f64 = couplings.iter().map(|c| c.abs()).fold(0.0, f64::max) * 4.0;
            let pot =
                potential.as_ref().map(|p| p.energies().iter().map(|e| e.abs()).fold(0.0, f64::max)).unwrap_or(0.0);
            let drift = gauge.links().iter().map(|l| l.drift.abs()).fold(0.0, f64::max);
            hop + pot + drift
        }
    };
    let offsets = model.offsets().iter().map(|o| o.abs()).fold(0.0, f64::max);
    1.0 / (50.0 * (fastest + offsets).max(1e-9))
}
