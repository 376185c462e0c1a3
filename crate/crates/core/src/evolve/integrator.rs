//! Adaptive Dormand–Prince 5(4) stepping for complex state vectors.

use num_complex::Complex64;

use super::EvolveError;

/// Step control for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Bound on the max-abs local error estimate per step.
    pub tolerance: f64,
    /// Maximum number of attempted steps before giving up.
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { tolerance: 1e-10, max_steps: 20_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrates `dy/dt = rhs(t, y)` from t = 0, stopping exactly on every
/// entry of `outputs` and handing the state to `emit`. Returns the number of
/// accepted steps.
pub(crate) fn integrate<F, G>(
    mut rhs: F,
    mut y: Vec<Complex64>,
    outputs: &[f64],
    options: &IntegratorOptions,
    max_step: f64,
    mut emit: G,
) -> Result<usize, EvolveError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    G: FnMut(usize, &[Complex64]),
{
    let n = y.len();
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![Complex64::new(0.0, 0.0); n];
    let mut y_new = vec![Complex64::new(0.0, 0.0); n];
    let mut t = 0.0;
    let mut h = max_step.min(outputs.last().copied().unwrap_or(1.0).max(1e-6) * 1e-2);
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    rhs(t, &y, &mut k[0]);

    for (idx, &target) in outputs.iter().enumerate() {
        while t < target {
            attempts += 1;
            if attempts > options.max_steps {
                return Err(EvolveError::StepBudget { steps: options.max_steps, time: t });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step <= 1e-15 * t.max(1.0) && !last {
                return Err(EvolveError::StepUnderflow { time: t });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * A[s][j];
                        }
                    }
                    stage[i] = y[i] + acc * step;
                }
                rhs(t + C[s] * step, &stage, &mut k[s]);
            }
            // stage now holds the fifth-order solution (row 7 equals the weights)
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = Complex64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * E[j];
                    }
                }
                err = err.max((e * step).norm());
            }
            if !err.is_finite() {
                return Err(EvolveError::NonFinite { time: t });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (options.tolerance / err).powf(0.2)).clamp(0.2, 5.0) };
            if err <= options.tolerance {
                y_new.copy_from_slice(&stage);
                std::mem::swap(&mut y, &mut y_new);
                t = if last { target } else { t + step };
                k.swap(0, 6);
                accepted += 1;
                if !last || factor < 1.0 {
                    h = (step * factor).min(max_step);
                }
            } else {
                h = (step * factor).min(max_step);
            }
        }
        emit(idx, &y);
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_accurate_and_lands_on_outputs() {
        // y' = -i w y  =>  y = exp(-i w t)
        let w = 7.3;
        let outputs: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let mut seen = Vec::new();
        let steps = integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -w) * y[0],
            vec![Complex64::new(1.0, 0.0)],
            &outputs,
            &IntegratorOptions::default(),
            0.05,
            |i, y| seen.push((i, y[0])),
        )
        .unwrap();
        assert!(steps > 0);
        assert_eq!(seen.len(), outputs.len());
        for (i, y) in seen {
            let exact = Complex64::from_polar(1.0, -w * outputs[i]);
            assert!((y - exact).norm() < 1e-9, "t={} err={}", outputs[i], (y - exact).norm());
        }
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = IntegratorOptions { tolerance: 1e-12, max_steps: 10 };
        let r = integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -50.0) * y[0],
            vec![Complex64::new(1.0, 0.0)],
            &[10.0],
            &opts,
            1.0,
            |_, _| {},
        );
        assert!(matches!(r, Err(EvolveError::StepBudget { .. })));
    }
}
