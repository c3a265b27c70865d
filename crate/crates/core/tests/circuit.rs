use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use snailkit::circuit::*;

const TWO_PI: f64 = 2.0 * PI;
const STAR: f64 = 0.3930;

fn device() -> CircuitParams {
    CircuitParams::reference_device()
}

fn potential(p: &CircuitParams, phi: f64, phi_e: f64) -> f64 {
    let n = p.n_junctions as f64;
    -(p.beta * phi.cos() + n * ((TWO_PI * phi_e - phi) / n).cos())
}

#[test]
fn minimum_matches_dense_grid_scan() {
    let p = device();
    let n = 2_000_001;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for k in 0..n {
        let phi = -PI + 2.0 * PI * k as f64 / (n - 1) as f64;
        let u = potential(&p, phi, STAR);
        if u < best {
            best = u;
            arg = phi;
        }
    }
    let root = potential_minimum(STAR, &p).unwrap();
    assert!((root - arg).abs() < 1e-5, "{root} vs grid {arg}");
    // the grid spacing bounds the scan; refine with a local parabola
    let h = 2.0 * PI / (n - 1) as f64;
    let (a, b, c) = (potential(&p, arg - h, STAR), best, potential(&p, arg + h, STAR));
    let refined = arg + 0.5 * h * (a - c) / (a - 2.0 * b + c);
    assert!((root - refined).abs() < 1e-6, "{root} vs {refined}");
}

#[test]
fn third_and_fourth_derivatives_match_finite_differences() {
    // third differences of U itself lose ~1e-3 to rounding at h = 1e-4, so
    // each order is differenced from the analytic order below it
    let p = device();
    let phi_m = potential_minimum(STAR, &p).unwrap();
    let c = potential_derivatives(STAR, &p, 4).unwrap();
    let h = 1e-4;
    let d = |order: usize, k: f64| potential_phase_derivative(&p, order, phi_m + k * h, TWO_PI * STAR);
    let c3 = (d(2, 1.0) - d(2, -1.0)) / (2.0 * h);
    let c4 = (d(3, 1.0) - d(3, -1.0)) / (2.0 * h);
    assert_relative_eq!(c[2], c3, max_relative = 1e-6);
    assert_relative_eq!(c[3], c4, max_relative = 1e-6);
    // the potential itself still fixes the curvature
    let u = |k: f64| potential(&p, phi_m + k * h, STAR);
    assert_relative_eq!(c[1], (u(1.0) - 2.0 * u(0.0) + u(-1.0)) / (h * h), max_relative = 1e-5);
}

#[test]
fn kerr_free_flux_frequency() {
    let w = resonator_frequency(STAR, &device()).unwrap().omega0;
    assert!((w / TWO_PI - 4.158e9).abs() < 50e6, "{}", w / TWO_PI);
}

#[test]
fn frequency_is_periodic_and_even() {
    let p = device();
    let w = |phi: f64| resonator_frequency(phi, &p).unwrap().omega0;
    assert_relative_eq!(w(1.2), w(0.2), max_relative = 1e-10);
    assert_relative_eq!(w(-0.2), w(0.2), max_relative = 1e-10);
}

#[test]
#[ignore = "known red: reference parameters give g3_ac/2pi = +38 MHz per flux quantum"]
fn cubic_drive_coefficient() {
    let t = hamiltonian_coefficients(STAR, &device(), 6).unwrap();
    let g3 = t.gac(3) / TWO_PI;
    assert!((g3 + 10e6).abs() < 3e6, "{g3}");
}

#[test]
fn linear_to_cubic_drive_ratio() {
    let t = hamiltonian_coefficients(STAR, &device(), 6).unwrap();
    let ratio = (t.gac(1) / t.gac(3)).abs();
    assert!((ratio - 2100.0).abs() < 0.15 * 2100.0, "{ratio}");
}

#[test]
fn drive_coefficients_are_flux_derivatives_at_fixed_phase() {
    let p = device();
    let phi = 0.35;
    let t = hamiltonian_coefficients(phi, &p, 6).unwrap();
    let h = 1e-5;
    let mut prefactor = p.ej_angular();
    for n in 1..=4 {
        prefactor *= t.participation / n as f64;
        if n < 2 {
            continue;
        }
        let d = |f: f64| potential_phase_derivative(&p, n, t.phi_m, TWO_PI * f);
        let fd = prefactor * (d(phi + h) - d(phi - h)) / (2.0 * h);
        assert_relative_eq!(t.gac(n), fd, max_relative = 1e-4);
    }
}

#[test]
fn grid_invariants() {
    let p = device();
    for k in 0..401 {
        let phi = k as f64 / 401.0;
        let t = hamiltonian_coefficients(phi, &p, 6).unwrap();
        let stationarity = potential_phase_derivative(&p, 1, t.phi_m, TWO_PI * phi);
        assert!(stationarity.abs() < 1e-10, "phi_e {phi}: {stationarity}");
        assert_eq!(t.gdc(1), 0.0);
        assert_eq!(t.gdc(2), 0.0);
        assert!(t.c[2] > 0.0);
        assert!(t.participation > 0.0 && t.omega0 > 0.0 && t.omega0 < p.omega_inf);
    }
}

#[test]
fn parity_of_outputs() {
    let p = device();
    for k in 1..20 {
        let phi = 0.05 * k as f64 - 0.5;
        let a = hamiltonian_coefficients(phi, &p, 6).unwrap();
        let b = hamiltonian_coefficients(-phi, &p, 6).unwrap();
        let shifted = hamiltonian_coefficients(phi + 1.0, &p, 6).unwrap();
        assert_relative_eq!(a.phi_m, -b.phi_m, epsilon = 1e-12);
        assert_relative_eq!(a.omega0, b.omega0, max_relative = 1e-10);
        assert_relative_eq!(a.omega0, shifted.omega0, max_relative = 1e-10);
        for n in 3..=6 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let scale = a.gdc(n).abs().max(1e-9 * p.ej_angular());
            assert!((a.gdc(n) - sign * b.gdc(n)).abs() < 1e-8 * scale, "g{n}dc at {phi}");
            assert!((a.gdc(n) - shifted.gdc(n)).abs() < 1e-8 * scale, "g{n}dc period at {phi}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn phase_derivatives_match_finite_differences(phi_e in 0.0f64..1.0, beta in 0.05f64..0.15) {
        let p = CircuitParams { beta, ..device() };
        let phi_m = potential_minimum(phi_e, &p).unwrap();
        let h = 1e-4;
        for order in 1..=6 {
            let f = |x: f64| potential_phase_derivative(&p, order - 1, x, TWO_PI * phi_e);
            let fd = (f(phi_m + h) - f(phi_m - h)) / (2.0 * h);
            let exact = potential_phase_derivative(&p, order, phi_m, TWO_PI * phi_e);
            // odd orders pass through zero; compare against the function scale
            let scale = exact.abs().max(0.1);
            prop_assert!((fd - exact).abs() < 1e-5 * scale, "order {}: {} vs {}", order, fd, exact);
        }
    }

    #[test]
    fn flux_derivative_matches_finite_differences(phi_e in 0.0f64..1.0, phi in -1.0f64..1.0) {
        let p = device();
        let h = 1e-6;
        for order in 0..=6 {
            let f = |x: f64| potential_phase_derivative(&p, order, phi, TWO_PI * x);
            let fd = (f(phi_e + h) - f(phi_e - h)) / (2.0 * h);
            let exact = potential_flux_derivative(&p, order, phi, TWO_PI * phi_e);
            prop_assert!((fd - exact).abs() < 1e-5 * exact.abs().max(0.1));
        }
    }
}
