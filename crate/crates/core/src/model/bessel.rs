//! Bessel functions of the first kind for integer order.

use super::ModelError;

/// Largest accepted |x|.
pub const MAX_ARGUMENT: f64 = 50.0;
const SERIES_LIMIT: f64 = 12.0;

/// J_n(x) for `|x| <= 50`.
///
/// Uses the ascending series for `|x| <= 12` and normalised downward
/// recurrence beyond.
pub fn bessel_j(n: u32, x: f64) -> Result<f64, ModelError> {
    if !x.is_finite() || x.abs() > MAX_ARGUMENT {
        return Err(ModelError::BesselArgument(x));
    }
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT { series(n, ax) } else { miller(n, ax) };
    Ok(sign * v)
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= -q / (k * (k + n as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > q.sqrt() {
            break;
        }
        k += 1.0;
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let start = (n.max(x.ceil() as u32) + 40 + (2.0 * x.sqrt()) as u32) & !1;
    let (mut above, mut current) = (0.0_f64, 1e-300_f64);
    let mut wanted = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            wanted *= 1e-250;
            norm *= 1e-250;
        }
        let order = k - 1;
        if order == n {
            wanted = current;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * current;
        }
    }
    norm += current;
    wanted / norm
}

/// Location and value of the first maximum of J₁ on x ≥ 0.
pub fn first_order_peak() -> (f64, f64) {
    // J1' = J0 − J1/x vanishes at the peak; bisect it on [1.5, 2.2].
    let slope = |x: f64| series(0, x) - series(1, x) / x;
    let (mut lo, mut hi) = (1.5, 2.2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, series(1, x))
}
