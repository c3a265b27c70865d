//! C interface to `snailkit`.
//!
//! Circuits and states cross the boundary as opaque handles. Each constructor
//! writes a fresh handle through its `out` pointer, and the matching `*_free`
//! releases it. Fallible calls return an [`SnkStatus`]. After a failure,
//! [`snk_last_error`] describes it until the next failure on the same thread.
//!
//! Frequencies are angular (rad/s) unless a name says otherwise; flux is in
//! flux quanta.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use num_complex::Complex64;
use snailkit::circuit::{hamiltonian_coefficients, resonator_frequency, CircuitParams};
use snailkit::cli::{run, Cli, Command};
use snailkit::effective::find_kerr_free_flux;
use snailkit::quantum::{fidelity, make_state, wigner, DensityMatrix, PhaseGrid, StateSpec};
use snailkit::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Solver = 3,
    Fit = 4,
    Truncation = 5,
    Integration = 6,
    Calibration = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Circuit parameters.
pub struct SnkCircuit(CircuitParams);

/// A density matrix in a truncated Fock space.
pub struct SnkState(DensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SnkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter(_) => SnkStatus::InvalidArgument,
            Error::Solver(_) | Error::Oracle(_) => SnkStatus::Solver,
            Error::Fit { .. } => SnkStatus::Fit,
            Error::Truncation { .. } => SnkStatus::Truncation,
            Error::Integration { .. } => SnkStatus::Integration,
            Error::Calibration(_) => SnkStatus::Calibration,
            Error::Config(_) => SnkStatus::Config,
            Error::Io(_) | Error::Csv(_) => SnkStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    // interior NULs would truncate the message on the C side anyway
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SnkStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(SnkStatus::NullPointer, format!("{name} is null"))
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SnkStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, need: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    if len < need {
        return Err(Failure(
            SnkStatus::BufferTooSmall,
            format!("{name} holds {len} values but {need} are needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn boxed<T>(value: T, slot: &mut *mut T) {
    *slot = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none failed.
/// The pointer stays valid until the next failure on this thread.
#[no_mangle]
pub extern "C" fn snk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

// ------------------------------------------------------------------ circuit

/// New circuit from device parameters (frequencies in GHz, impedance in Ohm).
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_circuit_new(
    beta: f64,
    ej_ghz: f64,
    n_junctions: u32,
    omega_inf_ghz: f64,
    impedance_ohm: f64,
    out_circuit: *mut *mut SnkCircuit,
) -> SnkStatus {
    guard(|| {
        let slot = out(out_circuit, "out_circuit")?;
        let p = CircuitParams {
            beta,
            ej_ghz,
            n_junctions,
            omega_inf: 2.0 * std::f64::consts::PI * omega_inf_ghz * 1e9,
            impedance: impedance_ohm,
        };
        p.validate()?;
        boxed(SnkCircuit(p), slot);
        Ok(())
    })
}

/// The reference device.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_circuit_reference(out_circuit: *mut *mut SnkCircuit) -> SnkStatus {
    guard(|| {
        boxed(SnkCircuit(CircuitParams::reference_device()), out(out_circuit, "out_circuit")?);
        Ok(())
    })
}

/// Releases a circuit; NULL is ignored.
///
/// # Safety
/// `circuit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snk_circuit_free(circuit: *mut SnkCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Dressed mode angular frequency at static flux `phi_e`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snk_resonator_frequency(circuit: *const SnkCircuit, phi_e: f64, out_omega: *mut f64) -> SnkStatus {
    guard(|| {
        let c = arg(circuit, "circuit")?;
        *out(out_omega, "out_omega")? = resonator_frequency(phi_e, &c.0)?.omega0;
        Ok(())
    })
}

/// Kerr-free static flux inside `[lo, hi]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snk_kerr_free_flux(circuit: *const SnkCircuit, lo: f64, hi: f64, out_phi: *mut f64) -> SnkStatus {
    guard(|| {
        let c = arg(circuit, "circuit")?;
        *out(out_phi, "out_phi")? = find_kerr_free_flux(&c.0, (lo, hi))?;
        Ok(())
    })
}

/// Static and flux-drive coefficients up to `n_max` at `phi_e`.
/// `g_dc` and `g_ac` receive `n_max + 1` values each (index = order).
///
/// # Safety
/// Buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snk_coefficients(
    circuit: *const SnkCircuit,
    phi_e: f64,
    n_max: usize,
    out_omega0: *mut f64,
    g_dc: *mut f64,
    g_ac: *mut f64,
    len: usize,
) -> SnkStatus {
    guard(|| {
        let c = arg(circuit, "circuit")?;
        let w = out(out_omega0, "out_omega0")?;
        let dc = buffer(g_dc, len, n_max + 1, "g_dc")?;
        let ac = buffer(g_ac, len, n_max + 1, "g_ac")?;
        let t = hamiltonian_coefficients(phi_e, &c.0, n_max)?;
        *w = t.omega0;
        for n in 0..=n_max {
            dc[n] = t.gdc(n);
            ac[n] = t.gac(n);
        }
        Ok(())
    })
}

// ------------------------------------------------------------------- states

unsafe fn new_state(spec: StateSpec, dim: usize, slot: *mut *mut SnkState) -> SnkStatus {
    guard(|| {
        let slot = out(slot, "out_state")?;
        boxed(SnkState(make_state(&spec, dim)?), slot);
        Ok(())
    })
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_vacuum(dim: usize, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Vacuum, dim, out_state)
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_fock(dim: usize, n: usize, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Fock { n }, dim, out_state)
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_thermal(dim: usize, n_th: f64, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Thermal { n_th }, dim, out_state)
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_coherent(dim: usize, re: f64, im: f64, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Coherent { alpha: Complex64::new(re, im) }, dim, out_state)
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_squeezed(dim: usize, re: f64, im: f64, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Squeezed { zeta: Complex64::new(re, im) }, dim, out_state)
}

/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_trisqueezed(dim: usize, re: f64, im: f64, out_state: *mut *mut SnkState) -> SnkStatus {
    new_state(StateSpec::Trisqueezed { tau: Complex64::new(re, im) }, dim, out_state)
}

/// Rotated, displaced cubic-phase state built on squeezed vacuum.
///
/// # Safety
/// `out_state` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn snk_state_cubic(
    dim: usize,
    zeta_re: f64,
    zeta_im: f64,
    gamma: f64,
    alpha_re: f64,
    alpha_im: f64,
    theta: f64,
    out_state: *mut *mut SnkState,
) -> SnkStatus {
    let spec = StateSpec::Cubic {
        zeta: Complex64::new(zeta_re, zeta_im),
        gamma,
        alpha: Complex64::new(alpha_re, alpha_im),
        theta,
    };
    new_state(spec, dim, out_state)
}

/// Releases a state; NULL is ignored.
///
/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snk_state_free(state: *mut SnkState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Truncation dimension, or 0 for NULL.
///
/// # Safety
/// `state` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn snk_state_dim(state: *const SnkState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snk_state_mean_n(state: *const SnkState, out_value: *mut f64) -> SnkStatus {
    guard(|| {
        *out(out_value, "out_value")? = arg(state, "state")?.0.mean_n();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snk_state_purity(state: *const SnkState, out_value: *mut f64) -> SnkStatus {
    guard(|| {
        *out(out_value, "out_value")? = arg(state, "state")?.0.purity();
        Ok(())
    })
}

/// Uhlmann fidelity of two states of equal dimension.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snk_state_fidelity(a: *const SnkState, b: *const SnkState, out_value: *mut f64) -> SnkStatus {
    guard(|| {
        let (a, b) = (arg(a, "a")?, arg(b, "b")?);
        if a.0.dim() != b.0.dim() {
            return Err(Failure(
                SnkStatus::InvalidArgument,
                format!("dimensions differ ({} vs {})", a.0.dim(), b.0.dim()),
            ));
        }
        *out(out_value, "out_value")? = fidelity(&a.0, &b.0);
        Ok(())
    })
}

/// Row-major density matrix, real and imaginary parts (`dim * dim` each).
///
/// # Safety
/// Buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snk_state_density(state: *const SnkState, re: *mut f64, im: *mut f64, len: usize) -> SnkStatus {
    guard(|| {
        let s = arg(state, "state")?;
        let d = s.0.dim();
        let re = buffer(re, len, d * d, "re")?;
        let im = buffer(im, len, d * d, "im")?;
        for j in 0..d {
            for k in 0..d {
                let z = s.0.matrix()[(j, k)];
                re[j * d + k] = z.re;
                im[j * d + k] = z.im;
            }
        }
        Ok(())
    })
}

/// Wigner function on an `n x n` grid over `[-extent, extent]^2`, row-major
/// with rows along Im(alpha) and columns along Re(alpha).
///
/// # Safety
/// `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snk_state_wigner(
    state: *const SnkState,
    n: usize,
    extent: f64,
    values: *mut f64,
    len: usize,
) -> SnkStatus {
    guard(|| {
        let s = arg(state, "state")?;
        if n < 2 || !(extent > 0.0) {
            return Err(Failure(SnkStatus::InvalidArgument, "need n >= 2 and extent > 0".into()));
        }
        let dst = buffer(values, len, n * n, "values")?;
        let map = wigner(&s.0, &PhaseGrid::square(n, extent));
        for r in 0..n {
            for c in 0..n {
                dst[r * n + c] = map.values[(r, c)];
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------- runs

/// Runs one CLI subcommand (`"fit"`, `"cubic"`, ...) on a config file and
/// writes its outputs under `out_dir`.
///
/// # Safety
/// Strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn snk_run(config_path: *const c_char, command: *const c_char, out_dir: *const c_char) -> SnkStatus {
    guard(|| {
        let name = text(command, "command")?;
        let command = Command::from_name(name)
            .ok_or_else(|| Failure(SnkStatus::InvalidArgument, format!("unknown command '{name}'")))?;
        let cli = Cli {
            command,
            config: Some(PathBuf::from(text(config_path, "config_path")?)),
            out: PathBuf::from(text(out_dir, "out_dir")?),
            dim: None,
            threads: None,
        };
        run(&cli)?;
        Ok(())
    })
}
