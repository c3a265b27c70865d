use std::ffi::{CStr, CString};
use std::ptr;

use snailkit_ffi::*;

fn last_error() -> String {
    let p = snk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn reference_circuit_round_trip() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(snk_circuit_reference(&mut c), SnkStatus::Ok);
        let mut phi = 0.0;
        assert_eq!(snk_kerr_free_flux(c, 0.3, 0.45, &mut phi), SnkStatus::Ok);
        assert!((0.38..0.41).contains(&phi), "{phi}");
        let mut w = 0.0;
        assert_eq!(snk_resonator_frequency(c, phi, &mut w), SnkStatus::Ok);
        let (mut dc, mut ac) = ([0.0; 7], [0.0; 7]);
        let mut w0 = 0.0;
        assert_eq!(snk_coefficients(c, phi, 6, &mut w0, dc.as_mut_ptr(), ac.as_mut_ptr(), 7), SnkStatus::Ok);
        assert_eq!(w0, w);
        // the drive couples most strongly through the linear term
        assert!(ac[1].abs() > 1000.0 * ac[3].abs());
        snk_circuit_free(c);
    }
}

#[test]
fn invalid_circuit_sets_status_and_message() {
    unsafe {
        let mut c = ptr::null_mut();
        let s = snk_circuit_new(-0.1, 245.0, 3, 8.99, 57.94, &mut c);
        assert_eq!(s, SnkStatus::InvalidArgument);
        assert!(c.is_null());
        assert!(last_error().contains("beta"), "{}", last_error());
    }
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(snk_circuit_reference(ptr::null_mut()), SnkStatus::NullPointer);
        assert!(last_error().contains("out_circuit"));
        let mut x = 0.0;
        assert_eq!(snk_state_mean_n(ptr::null(), &mut x), SnkStatus::NullPointer);
        assert_eq!(snk_state_dim(ptr::null()), 0);
        snk_state_free(ptr::null_mut());
        snk_circuit_free(ptr::null_mut());
    }
}

#[test]
fn state_queries() {
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(snk_state_coherent(30, 1.2, 0.0, &mut a), SnkStatus::Ok);
        assert_eq!(snk_state_vacuum(30, &mut b), SnkStatus::Ok);
        assert_eq!(snk_state_dim(a), 30);
        let (mut n, mut p, mut f) = (0.0, 0.0, 0.0);
        assert_eq!(snk_state_mean_n(a, &mut n), SnkStatus::Ok);
        assert_eq!(snk_state_purity(a, &mut p), SnkStatus::Ok);
        assert_eq!(snk_state_fidelity(a, b, &mut f), SnkStatus::Ok);
        assert!((n - 1.44).abs() < 1e-6);
        assert!((p - 1.0).abs() < 1e-10);
        // |<0|alpha>|^2 = e^{-|alpha|^2}
        assert!((f - (-1.44f64).exp()).abs() < 1e-8);

        let mut re = vec![0.0; 900];
        let mut im = vec![0.0; 900];
        assert_eq!(snk_state_density(b, re.as_mut_ptr(), im.as_mut_ptr(), 900), SnkStatus::Ok);
        assert_eq!(re[0], 1.0);
        assert_eq!(snk_state_density(b, re.as_mut_ptr(), im.as_mut_ptr(), 899), SnkStatus::BufferTooSmall);

        let mut w = vec![0.0; 41 * 41];
        assert_eq!(snk_state_wigner(b, 41, 3.0, w.as_mut_ptr(), w.len()), SnkStatus::Ok);
        // vacuum peak 2/pi at the grid centre
        assert!((w[20 * 41 + 20] - 2.0 / std::f64::consts::PI).abs() < 1e-10);

        let mut small = ptr::null_mut();
        assert_eq!(snk_state_vacuum(10, &mut small), SnkStatus::Ok);
        assert_eq!(snk_state_fidelity(a, small, &mut f), SnkStatus::InvalidArgument);
        for s in [a, b, small] {
            snk_state_free(s);
        }
    }
}

#[test]
fn squeezed_and_cubic_constructors() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(snk_state_squeezed(40, -0.5, 0.0, &mut s), SnkStatus::Ok);
        let mut n = 0.0;
        snk_state_mean_n(s, &mut n);
        assert!((n - 0.5f64.sinh().powi(2)).abs() < 1e-8);
        snk_state_free(s);
        assert_eq!(snk_state_cubic(40, -0.3, 0.0, 0.1, 0.0, 0.0, 0.0, &mut s), SnkStatus::Ok);
        snk_state_free(s);
        assert_eq!(snk_state_fock(5, 9, &mut s), SnkStatus::InvalidArgument);
        assert_eq!(snk_state_thermal(5, -1.0, &mut s), SnkStatus::InvalidArgument);
    }
}

#[test]
fn run_dispatches_a_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[circuit]\nbeta = 0.097\nej_ghz = 245.0\nomega_inf_ghz = 8.99\nimpedance_ohm = 57.94\n\
         [coeffs]\nphi_start_phi0 = 0.1\nphi_stop_phi0 = 0.2\npoints = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let c = |s: &str| CString::new(s).unwrap();
    let (cfg_s, out_s) = (c(cfg.to_str().unwrap()), c(out.to_str().unwrap()));
    unsafe {
        let s = snk_run(cfg_s.as_ptr(), c("coeffs").as_ptr(), out_s.as_ptr());
        assert_eq!(s, SnkStatus::Ok, "{}", last_error());
        assert_eq!(snk_run(cfg_s.as_ptr(), c("bogus").as_ptr(), out_s.as_ptr()), SnkStatus::InvalidArgument);
        assert_eq!(snk_run(cfg_s.as_ptr(), c("cubic").as_ptr(), out_s.as_ptr()), SnkStatus::Config);
    }
    let rows = std::fs::read_to_string(out.join("coeffs.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(snk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
