//! Deterministic local optimizers used by reconstruction and metric search.
//!
//! Both drivers are pure functions of their inputs (no global RNG, no
//! threads), so callers get bit-identical trajectories for identical
//! arguments. BFGS backs the likelihood fits (analytic gradients supplied by
//! the caller); Nelder-Mead backs the derivative-free angle searches.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Options for [`bfgs`].
#[derive(Debug, Clone)]
pub struct BfgsOptions {
    /// Hard iteration cap.
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean gradient norm.
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-8,
        }
    }
}

/// Result of a BFGS run.
#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was met (not merely stalled/capped).
    pub converged: bool,
    /// Objective value after each accepted iteration, starting value first.
    pub history: Vec<f64>,
}

/// Minimize `f` with BFGS and Armijo backtracking.
///
/// The inverse-Hessian approximation starts at the identity and is updated
/// only when the curvature condition holds, so the search direction is
/// always a descent direction and the recorded history is non-increasing.
pub fn bfgs(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &BfgsOptions,
) -> BfgsOutcome {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut hinv: DMatrix<f64> = DMatrix::identity(n, n);
    let mut history = vec![fx];
    let mut iterations = 0;
    let mut converged = g.norm() < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        let mut dir = -(&hinv * &g);
        let mut slope = dir.dot(&g);
        if !slope.is_finite() || slope >= 0.0 {
            // Poorly conditioned approximation: fall back to steepest descent.
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }

        // Armijo backtracking.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // Step collapsed below machine precision: nothing left to gain.
            break;
        };

        let g_new = DVector::from_vec(grad(x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // BFGS inverse update in the expanded rank-2 form, O(n^2):
            // H+ = H + (sy + y'Hy)/sy^2 ss' - (Hy s' + s (Hy)')/sy.
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            let c1 = (sy + yhy) / (sy * sy);
            hinv.ger(c1, &s, &s, 1.0);
            hinv.ger(-1.0 / sy, &hy, &s, 1.0);
            hinv.ger(-1.0 / sy, &s, &hy, 1.0);
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
        history.push(fx);
        converged = g.norm() < opts.grad_tol;
    }

    BfgsOutcome {
        grad_norm: g.norm(),
        x: x.as_slice().to_vec(),
        f: fx,
        iterations,
        converged,
        history,
    }
}

/// Options for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Convergence threshold on the simplex objective spread.
    pub f_tol: f64,
    /// Initial simplex edge length.
    pub step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-12,
            step: 0.4,
        }
    }
}

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` with the Nelder-Mead simplex (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2).
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NmOptions) -> NmOutcome {
    let n = x0.len();
    let mut evals = 0;
    let eval = |x: &DVector<f64>, evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x.as_slice());
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };

    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    let base = DVector::from_column_slice(x0);
    let fb = eval(&base, &mut evals);
    simplex.push((base.clone(), fb));
    for k in 0..n {
        let mut v = base.clone();
        v[k] += opts.step;
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_low = simplex[0].1;
        let f_high = simplex[n].1;
        if (f_high - f_low).abs() <= opts.f_tol * (1.0 + f_low.abs()) {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = DVector::zeros(n);
        for (v, _) in &simplex[..n] {
            centroid += v;
        }
        centroid /= n as f64;

        let worst = simplex[n].clone();
        let reflected = &centroid + (&centroid - &worst.0);
        let fr = eval(&reflected, &mut evals);

        if fr < simplex[0].1 {
            let expanded = &centroid + (&centroid - &worst.0) * 2.0;
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                &centroid + (&reflected - &centroid) * 0.5
            } else {
                &centroid + (&worst.0 - &centroid) * 0.5
            };
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    let v = (&best + &simplex[k].0) * 0.5;
                    let fv = eval(&v, &mut evals);
                    simplex[k] = (v, fv);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NmOutcome {
        x: simplex[0].0.as_slice().to_vec(),
        f: simplex[0].1,
        evals,
        converged,
    }
}

/// Solve `f(x) = target` by bisection for a monotone `f` on `[lo, hi]`.
///
/// Works for increasing or decreasing `f`; the endpoint values must straddle
/// the target.
pub fn bisect(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    target: f64,
    x_tol: f64,
) -> Result<f64> {
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if (flo - target) * (fhi - target) > 0.0 {
        return Err(Error::SolverFailure(format!(
            "bisection target {target} not bracketed by f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    let increasing = fhi >= flo;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() < x_tol {
            return Ok(mid);
        }
        let fm = f(mid)?;
        let go_right = if increasing { fm < target } else { fm > target };
        if go_right {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
