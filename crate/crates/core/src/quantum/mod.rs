//! Truncated-Fock states, the generalised-squeezing gate set, Wigner
//! functions, fidelity and state-family fitting.

pub mod fit;
pub mod ops;
pub mod state;
pub mod wigner;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub use fit::{fit_state, FitOptions, StateFamily, StateFitResult};
pub use ops::{expm, expm_multiply, ladder_operators, Ladder};
pub use state::{
    apply_gate, fidelity, gate_generator, gate_unitary, make_pure_state, make_state, squeezing_to_db,
    DensityMatrix, GateSpec, StateSpec,
};
pub use wigner::{wigner, PhaseGrid, WignerMap};

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
