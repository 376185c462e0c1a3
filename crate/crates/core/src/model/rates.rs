//! Closed-form parametric coupling rates and the modulation frequency shift.

use super::bessel::bessel_j;
use super::ModelError;

/// Stationary exchange rate `J0·J1(Ω/δ)` of a single-tone parametric drive.
pub fn effective_rate(bare: f64, amplitude: f64, detuning: f64) -> Result<f64, ModelError> {
    if detuning == 0.0 {
        return Err(ModelError::ZeroDetuning);
    }
    Ok(bare * bessel_j(1, amplitude / detuning)?)
}

/// Rate when both sites are modulated: `J0·J1(Ωi/δi)·J0(Ωj/δj)`.
pub fn effective_rate_dual(
    bare: f64,
    amplitude_i: f64,
    detuning_i: f64,
    amplitude_j: f64,
    detuning_j: f64,
) -> Result<f64, ModelError> {
    if detuning_i == 0.0 || detuning_j == 0.0 {
        return Err(ModelError::ZeroDetuning);
    }
    Ok(effective_rate(bare, amplitude_i, detuning_i)? * bessel_j(0, amplitude_j / detuning_j)?)
}

/// Reduction of the effective Josephson energy under flux modulation of
/// amplitude `theta` for junction asymmetry `asymmetry`.
pub fn frequency_shift_factor(theta: f64, asymmetry: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&asymmetry) || theta < 0.0 {
        return Err(ModelError::ShiftArguments { theta, asymmetry });
    }
    Ok(bessel_j(0, theta / 2.0)? * bessel_j(0, asymmetry * theta / 2.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn no_drive_no_coupling() {
        assert_eq!(effective_rate(5.0, 0.0, 3.0).unwrap(), 0.0);
        assert!(effective_rate(5.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_tone_rate_near_two_and_a_half_mhz() {
        let j = effective_rate(TAU * 5.9, 0.94 * TAU * 155.0, TAU * 155.0).unwrap();
        assert!((j / TAU - 2.478).abs() < 0.01);
    }

    #[test]
    fn dual_reduces_to_single_without_partner_drive() {
        let a = effective_rate(2.0, 1.1, 3.0).unwrap();
        let b = effective_rate_dual(2.0, 1.1, 3.0, 0.0, 5.0).unwrap();
        assert_eq!(a, b);
        assert!(effective_rate_dual(2.0, 1.1, 3.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn shift_factor_limits() {
        assert_eq!(frequency_shift_factor(0.0, 0.3).unwrap(), 1.0);
        assert!(frequency_shift_factor(0.5, 0.3).unwrap() < 1.0);
        assert!(frequency_shift_factor(0.5, 1.3).is_err());
    }
}
