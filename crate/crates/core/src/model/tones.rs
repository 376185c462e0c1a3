//! Mapping between tone phases/drifts and the Peierls phases they realise.
//!
//! A tone on site d driving the bond d→p realises the phase `s·φ_d + π/2`
//! (s = sign(ω_d − ω_p)) and the drift `s·φ̇_d`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use super::{BondDrive, DriveTone, ModelError, ModelSpec};
use crate::lattice::{GaugeField, PotentialField, Site};
use crate::units::wrap_phase;

struct Edge {
    from: Site,
    to: Site,
    /// Coefficient of the tone phase in the realised phase of `from -> to`.
    gain: f64,
    tone: Option<usize>,
    constant: f64,
}

fn coupled_edges(model: &ModelSpec) -> Result<Vec<Edge>, ModelError> {
    let drives = model.bond_drives().ok_or(ModelError::WrongVariant("tone synthesis", model.variant()))?;
    Ok(model
        .lattice()
        .bonds()
        .iter()
        .zip(drives)
        .filter_map(|(b, d)| match *d {
            BondDrive::Tone { tone, sign, driver_is_from } => {
                let sigma = if driver_is_from { 1.0 } else { -1.0 };
                Some(Edge { from: b.from, to: b.to, gain: sigma * sign, tone: Some(tone), constant: sigma * FRAC_PI_2 })
            }
            BondDrive::Resonant => Some(Edge { from: b.from, to: b.to, gain: 0.0, tone: None, constant: 0.0 }),
            BondDrive::OffResonant => None,
        })
        .collect())
}

/// Fundamental cycles of the edge graph as (edge, orientation) lists.
fn fundamental_cycles(site_count: usize, edges: &[Edge]) -> Vec<Vec<(usize, f64)>> {
    let mut adjacency: Vec<Vec<(usize, Site)>> = vec![Vec::new(); site_count];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.from.index()].push((k, e.to));
        adjacency[e.to.index()].push((k, e.from));
    }
    let mut parent: Vec<Option<(Site, usize)>> = vec![None; site_count];
    let mut depth: Vec<Option<usize>> = vec![None; site_count];
    let mut in_tree = vec![false; edges.len()];
    for root in 0..site_count {
        if depth[root].is_some() || adjacency[root].is_empty() {
            continue;
        }
        depth[root] = Some(0);
        let mut queue = std::collections::VecDeque::from([Site::from_index(root)]);
        while let Some(x) = queue.pop_front() {
            let dx = depth[x.index()].unwrap_or(0);
            for &(k, y) in &adjacency[x.index()] {
                if depth[y.index()].is_none() {
                    depth[y.index()] = Some(dx + 1);
                    parent[y.index()] = Some((x, k));
                    in_tree[k] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    let orient = |k: usize, a: Site| if edges[k].from == a { 1.0 } else { -1.0 };
    let mut cycles = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        if in_tree[k] {
            continue;
        }
        let mut steps = vec![(k, 1.0)];
        let (mut up, mut down) = (e.to, e.from);
        let d = |s: Site| depth[s.index()].unwrap_or(0);
        let mut descend = Vec::new();
        while up != down {
            if d(up) >= d(down) {
                let (p, pk) = parent[up.index()].expect("non-root has a parent");
                steps.push((pk, orient(pk, up)));
                up = p;
            } else {
                let (p, pk) = parent[down.index()].expect("non-root has a parent");
                descend.push((pk, orient(pk, p)));
                down = p;
            }
        }
        steps.extend(descend);
        cycles.push(steps);
    }
    cycles
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    a.clone().svd(true, true).solve(b, 1e-12).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Tone phases whose realised Peierls phases have the same loop fluxes as
/// `target`; the current phases are kept wherever they already satisfy it.
pub(super) fn tones_for_gauge(model: &ModelSpec, target: &GaugeField) -> Result<Vec<DriveTone>, ModelError> {
    let edges = coupled_edges(model)?;
    let cycles = fundamental_cycles(model.lattice().site_count(), &edges);
    let mut tones = model.tones().to_vec();
    if cycles.is_empty() {
        return Ok(tones);
    }
    let mut a = DMatrix::<f64>::zeros(cycles.len(), tones.len());
    let mut rhs = DVector::<f64>::zeros(cycles.len());
    for (c, cycle) in cycles.iter().enumerate() {
        let mut want = 0.0;
        let mut have = 0.0;
        for &(k, o) in cycle {
            let e = &edges[k];
            let phase = target.phase(e.from, e.to).ok_or(crate::lattice::LatticeError::GaugeMismatch)?;
            want += o * phase;
            have += o * e.constant;
            if let Some(t) = e.tone {
                a[(c, t)] += o * e.gain;
                have += o * e.gain * tones[t].phase;
            }
        }
        rhs[c] = wrap_phase(want - have);
    }
    let delta = least_squares(&a, &rhs);
    let residual = (&a * &delta - &rhs).iter().map(|r| wrap_phase(*r).abs()).fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(ModelError::UnrealisableGauge(residual));
    }
    for (t, d) in tones.iter_mut().zip(delta.iter()) {
        t.phase = wrap_phase(t.phase + d);
    }
    Ok(tones)
}

/// Tones whose phase drifts make every coupled bond i→j drift at
/// `V_j − V_i`, reproducing the potential `field` up to a time-dependent gauge.
pub fn synthetic_efield_tones(model: &ModelSpec, field: &PotentialField) -> Result<Vec<DriveTone>, ModelError> {
    let edges = coupled_edges(model)?;
    let mut tones = model.tones().to_vec();
    let mut a = DMatrix::<f64>::zeros(edges.len(), tones.len());
    let mut rhs = DVector::<f64>::zeros(edges.len());
    for (k, e) in edges.iter().enumerate() {
        if let Some(t) = e.tone {
            a[(k, t)] = e.gain;
        }
        rhs[k] = field.energy(e.to) - field.energy(e.from);
    }
    let drift = least_squares(&a, &rhs);
    let scale = rhs.amax().max(1.0);
    let residual = (&a * &drift - &rhs).amax();
    if residual > 1e-9 * scale {
        return Err(ModelError::UnrealisableField(residual));
    }
    for (t, d) in tones.iter_mut().zip(drift.iter()) {
        t.phase_drift = *d;
    }
    Ok(tones)
}

/// Peierls phases currently realised by the tones of a driven model, on the
/// coupled nearest bonds (others get zero).
pub fn realised_gauge(model: &ModelSpec) -> Result<GaugeField, ModelError> {
    let edges = coupled_edges(model)?;
    let tones = model.tones();
    Ok(GaugeField::from_fn(model.lattice(), |a, b| {
        edges
            .iter()
            .find(|e| e.from == a && e.to == b)
            .map(|e| e.constant + e.tone.map(|t| e.gain * tones[t].phase).unwrap_or(0.0))
            .unwrap_or(0.0)
    }))
}
