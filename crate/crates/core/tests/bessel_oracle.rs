//! Bessel values checked against an independent quadrature of the integral
//! representation J_n(x) = (1/π) ∫₀^π cos(nτ − x sin τ) dτ.

use gaugesim::model::bessel::{bessel_j, first_order_peak};
use gaugesim::model::{effective_rate, effective_rate_dual};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (left, right) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, left, tol / 2.0, depth - 1) + adaptive(f, m, b, right, tol / 2.0, depth - 1)
}

fn oracle(n: u32, x: f64) -> f64 {
    let f = move |t: f64| (n as f64 * t - x * t.sin()).cos();
    let pi = std::f64::consts::PI;
    adaptive(&f, 0.0, pi, simpson(&f, 0.0, pi), 1e-14, 40) / pi
}

// Frozen from the quadrature oracle above.
const J1_AT_094: f64 = 0.419_964_911_971;
const J0_AT_094: f64 = 0.791_003_877_452;
const J1_PEAK_X: f64 = 1.841_183_78;
const J1_PEAK: f64 = 0.581_865_224_282;

#[test]
fn frozen_values_match_the_oracle() {
    assert!((oracle(1, 0.94) - J1_AT_094).abs() < 1e-9);
    assert!((oracle(0, 0.94) - J0_AT_094).abs() < 1e-9);
    assert!((oracle(1, J1_PEAK_X) - J1_PEAK).abs() < 1e-11);
    // the maximum is flat: J1' changes sign across the frozen abscissa
    assert!(oracle(1, J1_PEAK_X - 1e-6) < J1_PEAK && oracle(1, J1_PEAK_X + 1e-6) < J1_PEAK);
}

#[test]
fn series_and_recurrence_agree_with_quadrature() {
    for n in 0..4 {
        for k in 0..=400 {
            let x = k as f64 * 0.05;
            let (got, want) = (bessel_j(n, x).unwrap(), oracle(n, x));
            assert!((got - want).abs() < 1e-12, "J{n}({x}): {got} vs {want}");
        }
    }
    for x in [25.0, 37.5, 49.9] {
        assert!((bessel_j(1, x).unwrap() - oracle(1, x)).abs() < 1e-11);
    }
}

#[test]
fn drive_point_values() {
    assert!((bessel_j(1, 0.94).unwrap() - J1_AT_094).abs() < 1e-10);
    assert!((bessel_j(0, 0.94).unwrap() - J0_AT_094).abs() < 1e-10);
    let (x, peak) = first_order_peak();
    assert!((x - J1_PEAK_X).abs() < 1e-7);
    assert!((peak - J1_PEAK).abs() < 1e-10);
}

#[test]
fn rates_are_bessel_products() {
    let bare = 37.07;
    let single = effective_rate(bare, 0.94 * 973.9, 973.9).unwrap();
    assert!((single - bare * J1_AT_094).abs() < 1e-8);
    let dual = effective_rate_dual(bare, 0.94 * 973.9, 973.9, 0.94 * 659.7, 659.7).unwrap();
    assert!((dual / single - J0_AT_094).abs() < 1e-10);
}
