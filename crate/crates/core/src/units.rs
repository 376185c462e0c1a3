//! Unit conversions and phase arithmetic.
//!
//! Internally every rate is an angular frequency in rad/µs and every time is in µs.

use std::f64::consts::{PI, TAU};

/// Converts an ordinary frequency in MHz to an angular frequency in rad/µs.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz
}

/// Converts an angular frequency in rad/µs to an ordinary frequency in MHz.
pub fn angular_to_mhz(rate: f64) -> f64 {
    rate / TAU
}

/// Converts nanoseconds to microseconds.
pub fn ns_to_us(ns: f64) -> f64 {
    ns * 1e-3
}

/// Reduces a phase to the half-open interval (−π, π].
pub fn wrap_phase(phase: f64) -> f64 {
    if phase > -PI && phase <= PI {
        return phase;
    }
    let mut r = phase.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can return exactly TAU for tiny negative inputs.
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Shortest distance between two phases on the circle, in [0, π].
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Evenly spaced grid including both end points.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|k| if k == count - 1 { stop } else { start + step * k as f64 }).collect()
        }
    }
}

/// Trapezoidal integral of `values` sampled at `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}
