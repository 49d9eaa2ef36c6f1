//! Quasi-Newton minimisation with finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when `‖∇f‖∞` falls below this.
    pub grad_tol: f64,
    /// Also stop when an accepted step changes `f` by less than
    /// `f_tol · (1 + |f|)`.
    pub f_tol: f64,
    /// Central-difference step relative to `max(|x_i|, 1)`.
    pub rel_step: f64,
    /// Largest accepted move in any coordinate per iteration.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iter: 200, grad_tol: 1e-5, f_tol: 1e-10, rel_step: 1e-4, max_step: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iterate, starting with `f(x0)`.
    pub history: Vec<f64>,
}

/// Objective value with failures (non-PD, domain) mapped to `+∞`.
fn value<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64]) -> f64 {
    match f(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

/// Central differences with step `rel_step · max(|x_i|, 1)`, falling back to
/// a one-sided difference where one side is infeasible.
pub fn central_gradient<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], fx: f64, rel_step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = value(f, &xp);
            xp[i] = x[i] - h;
            let fm = value(f, &xp);
            xp[i] = x[i];
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - fx) / h,
                (false, true) => (fx - fm) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// BFGS on the inverse Hessian with Armijo backtracking.
pub fn minimize_bfgs<F: Fn(&[f64]) -> Result<f64>>(f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsOutcome> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x0)?;
    if !fx.is_finite() {
        return Err(Error::domain("objective is not finite at the starting point"));
    }
    let mut g = DVector::from_vec(central_gradient(&f, x.as_slice(), fx, opts.rel_step));
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut history = vec![fx];
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = g.amax() < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        let mut p = -(&h * &g);
        if p.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            fresh = true;
            p = -g.clone();
        }
        let pmax = p.amax();
        if pmax > opts.max_step {
            p *= opts.max_step / pmax;
        }
        let slope = p.dot(&g);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &x + alpha * &p;
            let ft = value(&f, trial.as_slice());
            if ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let gn = DVector::from_vec(central_gradient(&f, xn.as_slice(), fxn, opts.rel_step));
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            h += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
            fresh = false;
        }
        let df = (fx - fxn).abs();
        x = xn;
        fx = fxn;
        g = gn;
        history.push(fx);
        converged = g.amax() < opts.grad_tol || df <= opts.f_tol * (1.0 + fx.abs());
    }
    Ok(BfgsOutcome { x: x.as_slice().to_vec(), f: fx, iterations, converged, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let out = minimize_bfgs(f, &[-1.2, 1.0], &BfgsOptions { f_tol: 0.0, ..Default::default() }).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                Err(Error::domain("negative"))
            } else {
                Ok(x[0] - x[0].ln())
            }
        };
        let out = minimize_bfgs(f, &[3.0], &BfgsOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn start_at_optimum() {
        let f = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum());
        let out = minimize_bfgs(f, &[0.0, 0.0], &BfgsOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }
}
