//! Wigner functions as displaced parity, `W(alpha) = (2/pi) Tr[rho D(alpha) P D(alpha)^dag]`.

use std::f64::consts::FRAC_2_PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::state::DensityMatrix;
use super::CMatrix;
use crate::error::{Error, Result};

/// Rectangular grid of phase-space points `alpha = re + i im`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

impl PhaseGrid {
    /// `n x n` points over `[-extent, extent]^2`.
    pub fn square(n: usize, extent: f64) -> Self {
        let axis = linspace(-extent, extent, n);
        Self {
            re: axis.clone(),
            im: axis,
        }
    }

    /// Default tomography grid, 81 x 81 over `[-3.5, 3.5]^2`.
    pub fn standard() -> Self {
        Self::square(81, 3.5)
    }

    pub fn len(&self) -> usize {
        self.re.len() * self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn spacing(axis: &[f64]) -> f64 {
        if axis.len() < 2 {
            1.0
        } else {
            (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
        }
    }

    /// Area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        Self::spacing(&self.re) * Self::spacing(&self.im)
    }

    /// Point `(row, col)` with rows along the imaginary axis.
    pub fn point(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.re[col], self.im[row])
    }

    fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        for &y in &self.im {
            for &x in &self.re {
                out.push(Complex64::new(x, y));
            }
        }
        out
    }
}

/// Wigner values on a grid; `values[(row, col)]` belongs to `im[row]`, `re[col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub grid: PhaseGrid,
    pub values: DMatrix<f64>,
}

impl WignerMap {
    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Riemann sum of `W d^2 alpha`.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.norm_squared()
    }

    /// Normalised overlap `sum W1 W2 / sqrt(sum W1^2 sum W2^2)`.
    pub fn overlap(&self, other: &WignerMap) -> f64 {
        let num = self.values.dot(&other.values);
        let den = (self.sum_squares() * other.sum_squares()).sqrt();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// CSV: first row holds the real-axis coordinates after a corner cell,
    /// each following row starts with its imaginary-axis coordinate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let mut header = vec![String::from("im\\re")];
        header.extend(self.grid.re.iter().map(|x| x.to_string()));
        w.write_record(&header)?;
        for (r, y) in self.grid.im.iter().enumerate() {
            let mut row = vec![y.to_string()];
            row.extend(self.values.row(r).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number {s:?} in Wigner CSV: {e}")))
        };
        let mut records = rdr.records();
        let head = records
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty Wigner CSV".into()))??;
        let re: Vec<f64> = head.iter().skip(1).map(parse).collect::<Result<_>>()?;
        let mut im = Vec::new();
        let mut vals = Vec::new();
        for rec in records {
            let rec = rec?;
            let mut it = rec.iter();
            im.push(parse(it.next().unwrap_or(""))?);
            let row: Vec<f64> = it.map(parse).collect::<Result<_>>()?;
            if row.len() != re.len() {
                return Err(Error::InvalidParameter("ragged Wigner CSV".into()));
            }
            vals.extend(row);
        }
        let values = DMatrix::from_row_slice(im.len(), re.len(), &vals);
        Ok(Self {
            grid: PhaseGrid { re, im },
            values,
        })
    }
}

/// `<n|D(beta)|m>` for `n, m < dim` from the generalised-Laguerre closed form
/// `sqrt(k!/(k+d)!) e^(-|beta|^2/2) z^d L_k^(d)(|beta|^2)` with `k = min(n, m)`,
/// `d = |n - m|` and `z = beta` below the diagonal, `-beta^*` above it.
pub fn displacement_elements(beta: Complex64, dim: usize) -> CMatrix {
    let mut d = CMatrix::zeros(dim, dim);
    let x = beta.norm_sqr();
    let r = beta.norm();
    let phase_lower = if r > 0.0 { beta / r } else { Complex64::new(1.0, 0.0) };
    let phase_upper = -phase_lower.conj();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..dim).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut lag = vec![0.0; dim];
    for off in 0..dim {
        let len = dim - off;
        let a = off as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + a - x;
        }
        for k in 1..len.saturating_sub(1) {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + a - x) * lag[k] - (kf + a) * lag[k - 1]) / (kf + 1.0);
        }
        let ph_lo = phase_lower.powu(off as u32);
        let ph_up = phase_upper.powu(off as u32);
        for k in 0..len {
            // log of sqrt(k!/(k+off)!) |beta|^off e^(-x/2)
            let ln_mag = 0.5 * (ln_fact[k] - ln_fact[k + off]) - 0.5 * x
                + if off > 0 { a * r.ln() } else { 0.0 };
            let mag = if off > 0 && r == 0.0 { 0.0 } else { ln_mag.exp() * lag[k] };
            d[(k + off, k)] = ph_lo * mag;
            if off > 0 {
                d[(k, k + off)] = ph_up * mag;
            }
        }
    }
    d
}

/// Matrix `A(alpha)` with `W(alpha) = Tr(rho A)`:
/// `A[n][m] = (2/pi) (-1)^m <n|D(2 alpha)|m>`.
pub fn parity_kernel(alpha: Complex64, dim: usize) -> CMatrix {
    let mut d = displacement_elements(alpha * 2.0, dim);
    for m in 0..dim {
        let s = if m % 2 == 0 { FRAC_2_PI } else { -FRAC_2_PI };
        d.column_mut(m).iter_mut().for_each(|z| *z *= s);
    }
    d
}

fn wigner_point(rho: &CMatrix, alpha: Complex64) -> f64 {
    let dim = rho.nrows();
    let k = parity_kernel(alpha, dim);
    // Tr(rho K) = sum_{m,n} rho[m][n] K[n][m]
    let mut acc = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            let p = rho[(m, n)] * k[(n, m)];
            acc += p.re;
        }
    }
    acc
}

/// Wigner function on a grid, evaluated point-parallel.
pub fn wigner(state: &DensityMatrix, grid: &PhaseGrid) -> WignerMap {
    let rho = state.matrix();
    let vals: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&alpha| wigner_point(rho, alpha))
        .collect();
    WignerMap {
        grid: grid.clone(),
        values: DMatrix::from_row_slice(grid.im.len(), grid.re.len(), &vals),
    }
}

/// `sum_jk weights[jk] A(alpha_jk)`, so that for a pure state
/// `psi^dag Q psi = sum_jk weights[jk] W_psi(alpha_jk)`.
pub fn weighted_kernel(map: &WignerMap, dim: usize) -> CMatrix {
    let pts = map.grid.points();
    let weights: Vec<f64> = map.values.transpose().iter().copied().collect();
    pts.par_iter()
        .zip(weights.par_iter())
        .filter(|(_, w)| **w != 0.0)
        .map(|(&alpha, &w)| parity_kernel(alpha, dim) * Complex64::new(w, 0.0))
        .reduce(|| CMatrix::zeros(dim, dim), |a, b| a + b)
}
