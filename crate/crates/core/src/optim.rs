//! Derivative-free simplex search and damped Gauss-Newton least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge per coordinate.
    pub step: Vec<f64>,
    pub max_evals: usize,
    /// Converged once the simplex spread falls below this in every coordinate.
    pub x_tol: f64,
    pub f_tol: f64,
    /// Additional restarts from the best point with a fresh simplex.
    pub restarts: usize,
}

impl NelderMeadOptions {
    pub fn new(step: Vec<f64>) -> Self {
        Self {
            step,
            max_evals: 4000,
            x_tol: 1e-5,
            f_tol: 1e-12,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn simplex_pass<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: &[f64],
    opts: &NelderMeadOptions,
    budget: usize,
) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if step[i] != 0.0 { step[i] } else { 1e-3 };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (0..n)
            .map(|k| {
                pts.iter()
                    .map(|p| (p[k] - pts[0][k]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < opts.x_tol && (vals[n] - vals[0]).abs() <= opts.f_tol.max(1e-15 * vals[0].abs()) {
            converged = true;
            break;
        }
        if spread < opts.x_tol * 1e-3 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect()
        };

        let xr = along(-1.0);
        let fr = sanitize(f(&xr));
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = sanitize(f(&xe));
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n)
                        .map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]))
                        .collect();
                    vals[i] = sanitize(f(&p));
                    pts[i] = p;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    Minimum {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` with the Nelder-Mead simplex method, restarting from the
/// incumbent with a simplex shrunk by half on each restart.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    assert_eq!(x0.len(), opts.step.len(), "step length must match dimension");
    let mut best = simplex_pass(&mut f, x0, &opts.step, opts, opts.max_evals);
    let mut total = best.evals;
    let mut step = opts.step.clone();
    for _ in 0..opts.restarts {
        if total >= opts.max_evals {
            break;
        }
        step.iter_mut().for_each(|s| *s *= 0.5);
        let next = simplex_pass(&mut f, &best.x, &step, opts, opts.max_evals - total);
        total += next.evals;
        let improved = next.f < best.f;
        let converged = next.converged;
        if improved {
            best = next;
        }
        best.converged = converged;
        if !improved && converged {
            break;
        }
    }
    best.evals = total;
    best
}

#[derive(Debug, Clone)]
pub struct LeastSquaresOptions {
    pub max_iter: usize,
    /// Forward-difference step for the Jacobian, relative to `max(|x|, 1)`.
    pub diff_step: f64,
    pub cost_tol: f64,
    pub x_tol: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            diff_step: 1e-7,
            cost_tol: 1e-14,
            x_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresReport {
    pub x: Vec<f64>,
    /// Sum of squared weighted residuals.
    pub cost: f64,
    /// Cost after every accepted iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
    /// `(J^T J)^-1` at the solution, unscaled.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

fn jacobian<F>(f: &mut F, x: &[f64], r0: &DVector<f64>, h_rel: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let m = r0.len();
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = h_rel * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let r = f(&xp)?;
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (r[i] - r0[i]) / h;
        }
    }
    Ok(j)
}

/// Levenberg-Marquardt on weighted residuals `r(x)`. A step is accepted only
/// when it lowers the cost, so `cost_history` is non-increasing.
pub fn levenberg_marquardt<F>(mut residuals: F, x0: &[f64], opts: &LeastSquaresOptions) -> Result<LeastSquaresReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = DVector::from_vec(residuals(&x).map_err(|e| Error::Fit {
        reason: format!("residuals undefined at the initial guess: {e}"),
        last_iterate: x.clone(),
    })?);
    if r.len() < n {
        return Err(Error::Fit {
            reason: format!("{} residuals for {n} parameters", r.len()),
            last_iterate: x,
        });
    }
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let j = jacobian(&mut residuals, &x, &r, opts.diff_step).map_err(|e| Error::Fit {
            reason: format!("Jacobian evaluation failed: {e}"),
            last_iterate: x.clone(),
        })?;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() == 0.0 || cost == 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match residuals(&trial) {
                Ok(rt) => {
                    let rt = DVector::from_vec(rt);
                    let ct = rt.norm_squared();
                    if ct.is_finite() && ct < cost {
                        let rel_step = step
                            .iter()
                            .zip(x.iter())
                            .map(|(s, xi)| s.abs() / xi.abs().max(1e-12))
                            .fold(0.0, f64::max);
                        let drop = cost - ct;
                        x = trial;
                        r = rt;
                        cost = ct;
                        history.push(cost);
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = true;
                        if drop <= opts.cost_tol * cost.max(1e-300) || rel_step < opts.x_tol {
                            return finish(&mut residuals, x, r, cost, history, iterations, opts);
                        }
                        break;
                    }
                    lambda *= 4.0;
                }
                Err(_) => lambda *= 4.0,
            }
        }
        if !accepted {
            break;
        }
    }
    finish(&mut residuals, x, r, cost, history, iterations, opts)
}

fn finish<F>(
    residuals: &mut F,
    x: Vec<f64>,
    r: DVector<f64>,
    cost: f64,
    cost_history: Vec<f64>,
    iterations: usize,
    opts: &LeastSquaresOptions,
) -> Result<LeastSquaresReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let j = jacobian(residuals, &x, &r, opts.diff_step)?;
    let jtj = j.transpose() * &j;
    let covariance = jtj.try_inverse().ok_or_else(|| Error::Fit {
        reason: "singular Jacobian at the solution".to_string(),
        last_iterate: x.clone(),
    })?;
    Ok(LeastSquaresReport {
        x,
        cost,
        cost_history,
        covariance,
        iterations,
    })
}

/// Non-negative least squares `min |A x - b|` subject to `x >= 0`
/// (Lawson-Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1e-300) * b.amax().max(1e-300) * (a.nrows() as f64);
    for _outer in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&k| !passive[k] && w[k] > tol)
            .max_by(|&p, &q| w[p].total_cmp(&w[q]));
        let Some(k) = cand else {
            return Ok(x);
        };
        passive[k] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let z = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-14)
                .map_err(|e| Error::Fit {
                    reason: format!("nnls subproblem: {e}"),
                    last_iterate: x.iter().copied().collect(),
                })?;
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &i) in idx.iter().enumerate() {
                    x[i] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &i) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[c]));
                }
            }
            for (c, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[c] - x[i]);
                if x[i].abs() < 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    Ok(x)
}
