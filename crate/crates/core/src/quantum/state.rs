//! Density matrices, gates and named state families.

use std::f64::consts::{LN_10, SQRT_2};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ops::{annihilation, banded_expm_multiply, expm, position_powers, BandedMatrix};
use super::{CMatrix, CVector};
use crate::error::{Error, Result};

/// Top-level occupation above which a state is reported as truncated.
pub const TRUNCATION_WARN: f64 = 1e-4;
/// Top-level occupation above which state construction fails.
pub const TRUNCATION_FAIL: f64 = 1e-2;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A mixed state in a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    /// Wraps a matrix, checking shape, Hermiticity and unit trace.
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "density matrix must be square with dim >= 2 (got {}x{})",
                data.nrows(),
                data.ncols()
            )));
        }
        let rho = Self { data };
        let herm = rho.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!("not Hermitian: |rho - rho^dag| = {herm:e}")));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("trace {tr} differs from 1")));
        }
        Ok(rho)
    }

    /// Wraps a matrix without validation (integrator output, intermediate sums).
    pub fn from_matrix_unchecked(data: CMatrix) -> Self {
        Self { data }
    }

    pub fn from_pure(psi: &CVector) -> Self {
        let norm = psi.norm_squared();
        let v = psi / re(norm.sqrt());
        Self { data: &v * v.adjoint() }
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut psi = CVector::zeros(dim);
        psi[0] = re(1.0);
        Self::from_pure(&psi)
    }

    pub fn fock(dim: usize, n: usize) -> Self {
        let mut psi = CVector::zeros(dim);
        psi[n] = re(1.0);
        Self::from_pure(&psi)
    }

    /// Gibbs state with mean occupation `n_th`, renormalised in the truncation.
    pub fn thermal(dim: usize, n_th: f64) -> Self {
        let mut data = CMatrix::zeros(dim, dim);
        if n_th <= 0.0 {
            data[(0, 0)] = re(1.0);
            return Self { data };
        }
        let q = n_th / (1.0 + n_th);
        let weights: Vec<f64> = (0..dim).map(|k| q.powi(k as i32)).collect();
        let z: f64 = weights.iter().sum();
        for (k, w) in weights.iter().enumerate() {
            data[(k, k)] = re(w / z);
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expect(&self, op: &CMatrix) -> Complex64 {
        (op * &self.data).trace()
    }

    /// `<a>`, computed without forming `a`.
    pub fn mean_a(&self) -> Complex64 {
        (1..self.dim())
            .map(|j| self.data[(j, j - 1)] * (j as f64).sqrt())
            .sum()
    }

    pub fn mean_n(&self) -> f64 {
        (0..self.dim()).map(|j| j as f64 * self.data[(j, j)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.data - self.data.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.data + self.data.adjoint()) * re(0.5);
        SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Population of the highest retained Fock level.
    pub fn top_occupation(&self) -> f64 {
        let d = self.dim();
        self.data[(d - 1, d - 1)].re
    }

    /// Full invariant check: Hermitian, unit trace, positive semidefinite.
    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!("not Hermitian: {herm:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("trace drift {:e}", tr - 1.0)));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidParameter(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Logs a warning or fails depending on the top-level population.
    pub fn check_truncation(&self) -> Result<()> {
        check_top(self.dim(), self.top_occupation())
    }

    /// Rotation `R(theta) rho R(theta)^dag` with `R(theta) = exp(-i theta n)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let d = self.dim();
        let data = CMatrix::from_fn(d, d, |j, k| {
            self.data[(j, k)] * Complex64::from_polar(1.0, -theta * (j as f64 - k as f64))
        });
        Self { data }
    }

    /// Copy of the state in a different truncation; extra levels are empty,
    /// removed levels are discarded and the result renormalised.
    pub fn resized(&self, dim: usize) -> Self {
        let d = self.dim().min(dim);
        let mut data = CMatrix::zeros(dim, dim);
        data.view_mut((0, 0), (d, d)).copy_from(&self.data.view((0, 0), (d, d)));
        let tr = data.trace().re;
        if tr > 0.0 {
            data /= re(tr);
        }
        Self { data }
    }

    /// Writes `dim` rows of interleaved `re, im` pairs with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..d)
            .flat_map(|k| [format!("re_{k}"), format!("im_{k}")])
            .collect();
        w.write_record(&header)?;
        for j in 0..d {
            let row: Vec<String> = (0..d)
                .flat_map(|k| {
                    let z = self.data[(j, k)];
                    [z.re.to_string(), z.im.to_string()]
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(vals);
        }
        let d = rows.len();
        if rows.iter().any(|r| r.len() != 2 * d) {
            return Err(Error::InvalidParameter("state CSV is not dim x 2dim".into()));
        }
        let data = CMatrix::from_fn(d, d, |j, k| Complex64::new(rows[j][2 * k], rows[j][2 * k + 1]));
        Self::new(data)
    }
}

fn check_top(dim: usize, occupation: f64) -> Result<()> {
    if occupation > TRUNCATION_FAIL {
        return Err(Error::Truncation { dim, occupation });
    }
    if occupation > TRUNCATION_WARN {
        warn!("top Fock level of a dim-{dim} state holds {occupation:.2e}; consider a larger dim");
    }
    Ok(())
}

/// The gate set: rotation, displacement, squeezing, trisqueezing and cubic phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateSpec {
    /// `exp(-i theta n)`
    Rotation(f64),
    /// `exp(alpha a^dag - alpha^* a)`
    Displacement(Complex64),
    /// `exp((zeta^* a^2 - zeta a^dag^2)/2)`, so real `zeta < 0` stretches x
    Squeeze(Complex64),
    /// `exp(tau a^dag^3 - tau^* a^3)`
    Trisqueeze(Complex64),
    /// `exp(i gamma x^3)` with `x = (a + a^dag)/sqrt 2`
    Cubic(f64),
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            GateSpec::Rotation(t) | GateSpec::Cubic(t) => t.is_finite(),
            GateSpec::Displacement(z) | GateSpec::Squeeze(z) | GateSpec::Trisqueeze(z) => z.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("non-finite gate parameter in {self:?}")))
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            GateSpec::Rotation(t) => GateSpec::Rotation(-t),
            GateSpec::Displacement(z) => GateSpec::Displacement(-z),
            GateSpec::Squeeze(z) => GateSpec::Squeeze(-z),
            GateSpec::Trisqueeze(z) => GateSpec::Trisqueeze(-z),
            GateSpec::Cubic(g) => GateSpec::Cubic(-g),
        }
    }
}

/// Anti-Hermitian generator `G` with `U = exp(G)` in a `dim`-level space.
pub fn gate_generator(gate: &GateSpec, dim: usize) -> CMatrix {
    let a = annihilation(dim);
    let ad = a.adjoint();
    match *gate {
        GateSpec::Rotation(theta) => {
            CMatrix::from_diagonal(&CVector::from_fn(dim, |j, _| -I * theta * j as f64))
        }
        GateSpec::Displacement(alpha) => &ad * alpha - &a * alpha.conj(),
        GateSpec::Squeeze(zeta) => {
            let a2 = &a * &a;
            (&a2 * zeta.conj() - a2.adjoint() * zeta) * re(0.5)
        }
        GateSpec::Trisqueeze(tau) => {
            let a3 = &a * &a * &a;
            a3.adjoint() * tau - a3 * tau.conj()
        }
        GateSpec::Cubic(gamma) => {
            let x3 = position_powers(dim, 3).swap_remove(3);
            x3 * (I * gamma / (2.0 * SQRT_2))
        }
    }
}

pub fn gate_unitary(gate: &GateSpec, dim: usize) -> CMatrix {
    expm(&gate_generator(gate, dim))
}

/// `U rho U^dag` in the state's truncation.
pub fn apply_gate(state: &DensityMatrix, gate: &GateSpec) -> Result<DensityMatrix> {
    gate.validate()?;
    let u = gate_unitary(gate, state.dim());
    let out = DensityMatrix {
        data: &u * state.matrix() * u.adjoint(),
    };
    out.check_truncation()?;
    Ok(out)
}

/// Named states built by applying gate exponentials to the vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StateSpec {
    Vacuum,
    Fock { n: usize },
    Coherent { alpha: Complex64 },
    Thermal { n_th: f64 },
    Squeezed { zeta: Complex64 },
    Trisqueezed { tau: Complex64 },
    /// `R(theta) D(alpha) C(gamma) S(zeta) |0>`
    Cubic {
        zeta: Complex64,
        gamma: f64,
        alpha: Complex64,
        #[serde(default)]
        theta: f64,
    },
}

impl StateSpec {
    pub fn gates(&self) -> Vec<GateSpec> {
        match *self {
            StateSpec::Vacuum | StateSpec::Fock { .. } | StateSpec::Thermal { .. } => vec![],
            StateSpec::Coherent { alpha } => vec![GateSpec::Displacement(alpha)],
            StateSpec::Squeezed { zeta } => vec![GateSpec::Squeeze(zeta)],
            StateSpec::Trisqueezed { tau } => vec![GateSpec::Trisqueeze(tau)],
            StateSpec::Cubic {
                zeta,
                gamma,
                alpha,
                theta,
            } => vec![
                GateSpec::Squeeze(zeta),
                GateSpec::Cubic(gamma),
                GateSpec::Displacement(alpha),
                GateSpec::Rotation(theta),
            ],
        }
    }
}

/// Generator of a ladder-polynomial gate, stored by diagonals.
fn banded_generator(gate: &GateSpec, dim: usize) -> BandedMatrix {
    // (a^k)_{j, j+k} = sqrt((j+1)...(j+k))
    let ladder = |k: usize| move |j: usize| (1..=k).map(|i| (j + i) as f64).product::<f64>().sqrt();
    let mut m = BandedMatrix::new(dim);
    let (k, p) = match *gate {
        GateSpec::Displacement(alpha) => (1, -alpha.conj()),
        GateSpec::Squeeze(zeta) => (2, zeta.conj() * 0.5),
        GateSpec::Trisqueeze(tau) => (3, -tau.conj()),
        _ => unreachable!("diagonal gates have no ladder generator"),
    };
    // p a^k - p^* a^dag^k
    let up = ladder(k);
    m.add_band(k as isize, |j| p * up(j));
    m.add_band(-(k as isize), |j| -p.conj() * up(j - k));
    m
}

/// Eigenbasis of the truncated position operator, cached per dimension.
struct PositionBasis {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

fn position_basis(dim: usize) -> Arc<PositionBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PositionBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&dim) {
        return b.clone();
    }
    let x = DMatrix::from_fn(dim, dim, |j, k| {
        if j + 1 == k {
            (k as f64).sqrt()
        } else if k + 1 == j {
            (j as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(x);
    let basis = Arc::new(PositionBasis {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    });
    cache.lock().unwrap().insert(dim, basis.clone());
    basis
}

/// `exp(i gamma x^3 / 2^{3/2}) psi`, diagonal in the position eigenbasis.
/// Differs from the cropped `x^3` only in the top few levels.
fn cubic_phase(gamma: f64, psi: &CVector) -> CVector {
    let basis = position_basis(psi.len());
    let v = &basis.vectors;
    let re_part = v.tr_mul(&psi.map(|z| z.re));
    let im_part = v.tr_mul(&psi.map(|z| z.im));
    let k = gamma / (2.0 * SQRT_2);
    let rotated = CVector::from_fn(psi.len(), |j, _| {
        Complex64::new(re_part[j], im_part[j]) * Complex64::from_polar(1.0, k * basis.values[j].powi(3))
    });
    let out_re = v * rotated.map(|z| z.re);
    let out_im = v * rotated.map(|z| z.im);
    CVector::from_fn(psi.len(), |j, _| Complex64::new(out_re[j], out_im[j]))
}

/// State vector of a pure family member, computed in a tripled truncation and
/// cropped to `dim`. Returns the vector (renormalised) and the population
/// that was cropped away.
pub fn make_pure_state(spec: &StateSpec, dim: usize) -> Result<(CVector, f64)> {
    if let StateSpec::Thermal { .. } = spec {
        return Err(Error::InvalidParameter("thermal state is not pure".into()));
    }
    let work = 3 * dim;
    let mut psi = CVector::zeros(work);
    match *spec {
        StateSpec::Fock { n } if n < dim => psi[n] = re(1.0),
        StateSpec::Fock { n } => {
            return Err(Error::InvalidParameter(format!("Fock {n} outside dim {dim}")));
        }
        _ => psi[0] = re(1.0),
    }
    for gate in spec.gates() {
        gate.validate()?;
        psi = match gate {
            GateSpec::Rotation(theta) => {
                CVector::from_fn(work, |j, _| psi[j] * Complex64::from_polar(1.0, -theta * j as f64))
            }
            GateSpec::Cubic(gamma) => cubic_phase(gamma, &psi),
            other => banded_expm_multiply(&banded_generator(&other, work), &psi),
        };
    }
    let kept = psi.rows(0, dim).norm_squared();
    let lost = (psi.norm_squared() - kept).max(0.0);
    let out = psi.rows(0, dim).into_owned() / re(kept.sqrt());
    Ok((out, lost))
}

pub fn make_state(spec: &StateSpec, dim: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidParameter("dim >= 2 required".into()));
    }
    let rho = match *spec {
        StateSpec::Thermal { n_th } => {
            if !(0.0..1e3).contains(&n_th) {
                return Err(Error::InvalidParameter(format!("n_th >= 0 required (got {n_th})")));
            }
            DensityMatrix::thermal(dim, n_th)
        }
        _ => {
            let (psi, lost) = make_pure_state(spec, dim)?;
            if lost > TRUNCATION_FAIL {
                return Err(Error::Truncation { dim, occupation: lost });
            }
            DensityMatrix::from_pure(&psi)
        }
    };
    rho.check_truncation()?;
    Ok(rho)
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| re(l.max(0.0).sqrt())),
    ));
    v * d * v.adjoint()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`; equals
/// `<psi|rho|psi>` when either argument is pure.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    assert_eq!(rho.dim(), sigma.dim(), "fidelity needs equal dimensions");
    for (pure, other) in [(rho, sigma), (sigma, rho)] {
        if (pure.purity() - 1.0).abs() < 1e-12 {
            return (pure.matrix() * other.matrix()).trace().re.clamp(0.0, 1.0);
        }
    }
    let s = hermitian_sqrt(rho.matrix());
    let m = &s * sigma.matrix() * &s;
    let m = (&m + m.adjoint()) * re(0.5);
    let root: f64 = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    (root * root).clamp(0.0, 1.0)
}

/// `<psi|rho|psi>` for a state vector.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &CVector) -> f64 {
    (psi.adjoint() * rho.matrix() * psi)[(0, 0)].re / psi.norm_squared()
}

/// Squeezing level in dB for `|zeta|`: `10 log10(e^(2|zeta|))`.
pub fn squeezing_to_db(zeta_mag: f64) -> f64 {
    20.0 * zeta_mag / LN_10
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(r: f64, i: f64) -> Complex64 {
        Complex64::new(r, i)
    }

    fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        let d = DensityMatrix::from_matrix_unchecked(a.matrix() - b.matrix());
        d.eigenvalues().iter().map(|l| l.abs()).sum::<f64>() / 2.0
    }

    fn quadrature_variance(rho: &DensityMatrix) -> f64 {
        let a = annihilation(rho.dim());
        let x = (&a + a.adjoint()) * c(1.0 / SQRT_2, 0.0);
        let m = rho.expect(&x).re;
        rho.expect(&(&x * &x)).re - m * m
    }

    #[test]
    fn coherent_state_mean_number() {
        let rho = make_state(&StateSpec::Coherent { alpha: c(1.2, 0.0) }, 40).unwrap();
        assert!((rho.mean_n() - 1.44).abs() < 1e-6);
        assert!((rho.mean_a() - c(1.2, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn squeezed_quadrature_variance() {
        // Var(x) = e^{-2 zeta}/2
        let rho = make_state(&StateSpec::Squeezed { zeta: c(0.6, 0.0) }, 60).unwrap();
        let v = quadrature_variance(&rho);
        assert!((v - (-1.2f64).exp() / 2.0).abs() < 1e-4, "{v}");
        let rho = make_state(&StateSpec::Squeezed { zeta: c(-0.6, 0.0) }, 60).unwrap();
        let v = quadrature_variance(&rho);
        assert!((v - (1.2f64).exp() / 2.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn thermal_state_mean() {
        let rho = make_state(&StateSpec::Thermal { n_th: 0.3 }, 40).unwrap();
        assert!((rho.mean_n() - 0.3).abs() < 1e-8);
        rho.check_invariants().unwrap();
    }

    #[test]
    fn displacement_round_trip() {
        let base = make_state(&StateSpec::Squeezed { zeta: c(0.3, 0.2) }, 40).unwrap();
        for alpha in [c(2.0, 0.0), c(-1.1, 1.3), c(0.0, -1.9)] {
            let there = apply_gate(&base, &GateSpec::Displacement(alpha)).unwrap();
            let back = apply_gate(&there, &GateSpec::Displacement(-alpha)).unwrap();
            assert!(trace_distance(&base, &back) < 1e-8);
        }
    }

    #[test]
    fn rotation_leaves_vacuum_invariant() {
        let v = DensityMatrix::vacuum(10);
        let r = apply_gate(&v, &GateSpec::Rotation(1.234)).unwrap();
        assert!(trace_distance(&v, &r) < 1e-14);
    }

    #[test]
    fn rotation_gate_matches_fast_rotation() {
        let rho = make_state(&StateSpec::Coherent { alpha: c(0.7, 0.2) }, 20).unwrap();
        let slow = apply_gate(&rho, &GateSpec::Rotation(0.8)).unwrap();
        let fast = rho.rotated(0.8);
        assert!(crate::quantum::max_abs(&(slow.matrix() - fast.matrix())) < 1e-12);
        let expect = c(0.7, 0.2) * Complex64::from_polar(1.0, -0.8);
        assert!((fast.mean_a() - expect).norm() < 1e-8);
    }

    #[test]
    fn trisqueezed_state_is_wigner_negative() {
        let rho = make_state(&StateSpec::Trisqueezed { tau: c(-0.13, 0.0) }, 60).unwrap();
        let grid = crate::quantum::PhaseGrid::square(81, 3.5);
        let w = crate::quantum::wigner(&rho, &grid);
        assert!(w.min() < -0.01, "{}", w.min());
    }

    #[test]
    fn fidelity_closed_forms() {
        let v = DensityMatrix::vacuum(30);
        let one = DensityMatrix::fock(30, 1);
        assert!((fidelity(&v, &v) - 1.0).abs() < 1e-12);
        assert!(fidelity(&v, &one).abs() < 1e-14);
        let coh = make_state(&StateSpec::Coherent { alpha: c(0.5, 0.0) }, 30).unwrap();
        assert!((fidelity(&v, &coh) - (-0.25f64).exp()).abs() < 1e-10);
        assert!((fidelity(&v, &coh) - 0.7788).abs() < 1e-4);
    }

    #[test]
    fn mixed_fidelity_is_symmetric_and_matches_pure_formula() {
        let th = DensityMatrix::thermal(20, 0.2);
        let th2 = DensityMatrix::thermal(20, 0.5);
        let f12 = fidelity(&th, &th2);
        let f21 = fidelity(&th2, &th);
        assert!((f12 - f21).abs() < 1e-10);
        // commuting diagonal states: F = (sum sqrt(p q))^2
        let q1: f64 = 0.2 / 1.2;
        let q2: f64 = 0.5 / 1.5;
        let z1: f64 = (0..20).map(|k| q1.powi(k)).sum();
        let z2: f64 = (0..20).map(|k| q2.powi(k)).sum();
        let bc: f64 = (0..20).map(|k| (q1.powi(k) / z1 * q2.powi(k) / z2).sqrt()).sum();
        assert!((f12 - bc * bc).abs() < 1e-8);
        assert!((fidelity(&th, &th) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn squeezing_db_pairs() {
        assert_eq!(squeezing_to_db(0.0), 0.0);
        assert!((squeezing_to_db(0.61) - 5.30).abs() < 0.01);
        assert!((squeezing_to_db(0.99) - 8.60).abs() < 0.01);
        // printed pairing 8.63 dB is accepted within 0.1 dB
        assert!((squeezing_to_db(0.99) - 8.63).abs() < 0.1);
    }

    #[test]
    fn cubic_generator_expands_termwise() {
        let dim = 20;
        let g = gate_generator(&GateSpec::Cubic(1.0), dim);
        let a = annihilation(dim + 3);
        let ad = a.adjoint();
        // ((a + a^dag)/sqrt2)^3 = (a^dag^3 + 3 a^dag^2 a + 3 a^dag a^2 + a^3 + 3 a^dag + 3 a) / 2^(3/2)
        let normal = &ad * &ad * &ad
            + &ad * &ad * &a * c(3.0, 0.0)
            + &ad * &a * &a * c(3.0, 0.0)
            + &a * &a * &a
            + (&ad + &a) * c(3.0, 0.0);
        let normal = normal.view((0, 0), (dim, dim)).into_owned() * (I / (2.0 * SQRT_2));
        assert!(crate::quantum::max_abs(&(g - &normal)) < 1e-12);
        let tri = gate_generator(&GateSpec::Trisqueeze(I / (2.0 * SQRT_2)), dim);
        // cubic minus its a^dag^3 - h.c. part leaves only the cross and linear terms
        let cross = (&ad * &ad * &a * c(3.0, 0.0) + &ad * &a * &a * c(3.0, 0.0) + (&ad + &a) * c(3.0, 0.0))
            .view((0, 0), (dim, dim))
            .into_owned()
            * (I / (2.0 * SQRT_2));
        let diff = gate_generator(&GateSpec::Cubic(1.0), dim) - tri;
        assert!(crate::quantum::max_abs(&(diff - cross)) < 1e-12);
    }

    #[test]
    fn banded_generators_match_dense() {
        for gate in [
            GateSpec::Displacement(c(0.4, -0.7)),
            GateSpec::Squeeze(c(-0.3, 0.2)),
            GateSpec::Trisqueeze(c(0.1, 0.05)),
        ] {
            let diff = crate::quantum::max_abs(&(banded_generator(&gate, 15).to_dense() - gate_generator(&gate, 15)));
            assert!(diff < 1e-13, "{gate:?}: {diff}");
        }
    }

    #[test]
    fn cubic_phase_matches_dense_exponential_in_low_block() {
        let spec = StateSpec::Cubic {
            zeta: c(-0.4, 0.0),
            gamma: 0.12,
            alpha: c(0.2, -0.1),
            theta: 0.3,
        };
        let (fast, _) = make_pure_state(&spec, 30).unwrap();
        let work = 160;
        let mut psi = CVector::zeros(work);
        psi[0] = re(1.0);
        for gate in spec.gates() {
            psi = gate_unitary(&gate, work) * psi;
        }
        let slow = psi.rows(0, 30).into_owned() / re(psi.rows(0, 30).norm());
        let d = (&fast - &slow).norm();
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn csv_round_trip() {
        let rho = make_state(&StateSpec::Coherent { alpha: c(0.3, -0.4) }, 8).unwrap();
        let mut buf = Vec::new();
        rho.write_csv(&mut buf).unwrap();
        let back = DensityMatrix::read_csv(buf.as_slice()).unwrap();
        assert!(crate::quantum::max_abs(&(back.matrix() - rho.matrix())) < 1e-15);
    }

    #[test]
    fn heavy_state_in_small_space_is_rejected() {
        let err = make_state(&StateSpec::Coherent { alpha: c(3.0, 0.0) }, 8).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }
}
