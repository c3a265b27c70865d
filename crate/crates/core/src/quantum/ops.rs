//! Ladder operators and matrix exponentials.

use num_complex::Complex64;

use super::{CMatrix, CVector};

/// `a`, `a^dag` and `n = a^dag a` in a `dim`-level Fock space.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n: CMatrix,
}

pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for j in 1..dim {
        a[(j - 1, j)] = Complex64::new((j as f64).sqrt(), 0.0);
    }
    a
}

pub fn ladder_operators(dim: usize) -> Ladder {
    assert!(dim >= 2, "dim >= 2 required");
    let a = annihilation(dim);
    let a_dag = a.adjoint();
    let n = &a_dag * &a;
    Ladder { a, a_dag, n }
}

/// `(a + a^dag)^k` for `k = 0..=max_power`, exact in the `dim`-level block
/// (powers are taken in a space padded by `max_power` levels, then cropped).
pub fn position_powers(dim: usize, max_power: usize) -> Vec<CMatrix> {
    let big = dim + max_power;
    let a = annihilation(big);
    let x = &a + a.adjoint();
    let mut out = Vec::with_capacity(max_power + 1);
    let mut p = CMatrix::identity(big, big);
    for k in 0..=max_power {
        if k > 0 {
            p = &p * &x;
        }
        out.push(p.view((0, 0), (dim, dim)).into_owned());
    }
    out
}

fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Dense matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm needs a square matrix");
    let norm = norm1(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m * Complex64::new(0.5f64.powi(s), 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| Complex64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9));
    let u = &a * (u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
    let v_inner = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8));
    let v = v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(m) v` by a scaled truncated Taylor series, without forming `exp(m)`.
pub fn expm_multiply(m: &CMatrix, v: &CVector) -> CVector {
    let norm = norm1(m);
    let steps = norm.ceil().max(1.0) as usize;
    let scale = Complex64::new(1.0 / steps as f64, 0.0);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=60 {
            term = (m * &term) * (scale / k as f64);
            acc += &term;
            if term.norm() <= 1e-17 * acc.norm() {
                break;
            }
        }
        out = acc;
    }
    out
}

/// A matrix stored by diagonals: `bands[i][j] = M_{j, j + offsets[i]}`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub dim: usize,
    pub offsets: Vec<isize>,
    pub bands: Vec<Vec<Complex64>>,
}

impl BandedMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            offsets: Vec::new(),
            bands: Vec::new(),
        }
    }

    /// Adds `f(j)` at `(j, j + offset)` for every in-range `j`.
    pub fn add_band(&mut self, offset: isize, f: impl Fn(usize) -> Complex64) {
        let band = (0..self.dim)
            .map(|j| {
                let k = j as isize + offset;
                if (0..self.dim as isize).contains(&k) {
                    f(j)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        self.offsets.push(offset);
        self.bands.push(band);
    }

    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            let lo = (-d).max(0) as usize;
            let hi = (self.dim as isize - d.max(0)) as usize;
            for j in lo..hi {
                out[j] += band[j] * v[(j as isize + d) as usize];
            }
        }
    }

    fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.dim];
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            for (j, z) in band.iter().enumerate() {
                let k = j as isize + d;
                if (0..self.dim as isize).contains(&k) {
                    cols[k as usize] += z.norm();
                }
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            for (j, z) in band.iter().enumerate() {
                let k = j as isize + d;
                if (0..self.dim as isize).contains(&k) {
                    m[(j, k as usize)] += z;
                }
            }
        }
        m
    }
}

/// `exp(M) v` for banded `M`, same scheme as [`expm_multiply`].
pub fn banded_expm_multiply(m: &BandedMatrix, v: &CVector) -> CVector {
    let steps = m.norm1().ceil().max(1.0) as usize;
    let scale = 1.0 / steps as f64;
    let mut out: Vec<Complex64> = v.iter().copied().collect();
    let mut term = out.clone();
    let mut next = vec![Complex64::new(0.0, 0.0); m.dim];
    for _ in 0..steps {
        term.copy_from_slice(&out);
        for k in 1..=60 {
            m.apply(&term, &mut next);
            let f = scale / k as f64;
            let mut tn = 0.0;
            let mut an = 0.0;
            for ((t, n), acc) in term.iter_mut().zip(&next).zip(out.iter_mut()) {
                *t = n * f;
                *acc += *t;
                tn += t.norm_sqr();
                an += acc.norm_sqr();
            }
            if tn.sqrt() <= 1e-17 * an.sqrt() {
                break;
            }
        }
    }
    CVector::from_vec(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_level_annihilation() {
        let l = ladder_operators(2);
        assert_eq!(l.a[(0, 1)], c(1.0, 0.0));
        assert_eq!(l.a[(0, 0)], c(0.0, 0.0));
        assert_eq!(l.a[(1, 0)], c(0.0, 0.0));
        assert_eq!(l.a[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn commutator_is_identity_except_corner() {
        let dim = 12;
        let l = ladder_operators(dim);
        let comm = &l.a * &l.a_dag - &l.a_dag * &l.a;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j && i < dim - 1 {
                    1.0
                } else if i == j {
                    -((dim - 1) as f64)
                } else {
                    0.0
                };
                assert!((comm[(i, j)] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn number_operator_diagonal() {
        let l = ladder_operators(7);
        for j in 0..7 {
            assert!((l.n[(j, j)].re - j as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let mut d = CMatrix::zeros(3, 3);
        d[(0, 0)] = c(1.0, 0.0);
        d[(1, 1)] = c(0.0, 2.0);
        d[(2, 2)] = c(-30.0, 0.0);
        let e = expm(&d);
        assert!((e[(0, 0)] - c(1f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - c(2f64.cos(), 2f64.sin())).norm() < 1e-13);
        assert!((e[(2, 2)].re - (-30f64).exp()).abs() < 1e-25);

        let mut n = CMatrix::zeros(2, 2);
        n[(0, 1)] = c(3.0, 0.0);
        let e = expm(&n);
        assert!((e[(0, 1)] - c(3.0, 0.0)).norm() < 1e-14);
        assert!((e[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn expm_large_norm_rotation() {
        // exp(i phi sigma_y) with phi = 40 exercises squaring
        let mut g = CMatrix::zeros(2, 2);
        g[(0, 1)] = c(40.0, 0.0);
        g[(1, 0)] = c(-40.0, 0.0);
        let e = expm(&g);
        assert!((e[(0, 0)].re - 40f64.cos()).abs() < 1e-11);
        assert!((e[(0, 1)].re - 40f64.sin()).abs() < 1e-11);
    }

    #[test]
    fn expm_multiply_matches_dense() {
        let l = ladder_operators(20);
        let g = (&l.a_dag * &l.a_dag * c(0.4, 0.1) - &l.a * &l.a * c(0.4, -0.1)) * c(0.5, 0.0);
        let mut v = CVector::zeros(20);
        v[0] = c(1.0, 0.0);
        let dense = expm(&g) * &v;
        let fast = expm_multiply(&g, &v);
        assert!((dense - fast).norm() < 1e-12);
    }

    #[test]
    fn position_powers_are_exact_in_block() {
        let p = position_powers(6, 3);
        // <0|x^2|0> = 1, <0|x^3|1> = 3 in the untruncated space
        assert!((p[2][(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((p[3][(0, 1)].re - 3.0).abs() < 1e-14);
        // top corner of x^2 keeps the n+1 contribution: <5|x^2|5> = 2*5+1
        assert!((p[2][(5, 5)].re - 11.0).abs() < 1e-12);
    }
}
