//! Bracketed scalar root finding.
//!
//! Brent's method: inverse quadratic interpolation and secant steps guarded by
//! bisection, so the bracket shrinks on every iteration and no derivative is
//! needed.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 200;

/// Finds a root of `f` on `[a, b]`. `f(a)` and `f(b)` must differ in sign
/// (or one of them must vanish).
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Solver(format!(
            "non-finite function value at bracket ends ({a}, {b})"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Solver(format!(
            "no sign change on [{a}, {b}]: f(a) = {fa:e}, f(b) = {fb:e}"
        )));
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Solver(format!("non-finite function value at x = {b}")));
        }
    }
    Err(Error::Solver(format!(
        "no convergence after {max_iter} iterations (bracket [{b}, {c}], f = {fb:e})"
    )))
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
pub fn golden_section_min<F>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Vertex of the least-squares parabola through `points`, or `None` when
/// there are fewer than three distinct abscissae or the fit opens downward.
pub fn least_squares_vertex(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let scale = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max);
    if points.len() < 3 || scale == 0.0 {
        return None;
    }
    // normal equations in the centred, scaled abscissa
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for &(x, y) in points {
        let u = (x - mean) / scale;
        let row = nalgebra::Vector3::new(1.0, u, u * u);
        ata += row * row.transpose();
        aty += row * y;
    }
    let c = ata.lu().solve(&aty)?;
    (c[2] > 0.0).then(|| mean - scale * c[1] / (2.0 * c[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_bracket_without_sign_change() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 200),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn brent_is_independent_of_bracket_orientation() {
        let f = |x: f64| x.cos() - x;
        let r1 = brent(f, 0.0, 1.0, 1e-15, 200).unwrap();
        let r2 = brent(f, 1.0, 0.0, 1e-15, 200).unwrap();
        assert!((r1 - r2).abs() < 1e-14);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, _) = golden_section_min(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn parabola_vertex_exact_for_quadratic() {
        let q = |x: f64| 2.0 * (x - 8.4).powi(2) + 1.0;
        let pts: Vec<_> = [7.0, 7.5, 8.0, 9.0, 9.2].iter().map(|&x| (x, q(x))).collect();
        let v = least_squares_vertex(&pts).unwrap();
        assert!((v - 8.4).abs() < 1e-10);
    }

    #[test]
    fn parabola_vertex_averages_symmetric_ripple() {
        // ripple even about the centre cannot move the fitted vertex
        let f = |x: f64| (x - 1.0).powi(2) + 0.3 * (6.0 * (x - 1.0)).cos();
        let pts: Vec<_> = (0..=12).map(|k| 1.0 - 1.5 + 0.25 * k as f64).map(|x| (x, f(x))).collect();
        assert!((least_squares_vertex(&pts).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn parabola_vertex_rejects_maximum_and_degenerate_input() {
        assert!(least_squares_vertex(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).is_none());
        assert!(least_squares_vertex(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]).is_none());
    }
}
