//! Levenberg-Marquardt with Marquardt diagonal scaling and central-difference
//! Jacobians.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CalibError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iters: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop when `max |J^T r|` falls below this.
    pub gradient_tol: f64,
    /// Stop when `|dx| <= step_tol (|x| + step_tol)`.
    pub step_tol: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            cost_tol: 1e-14,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda0 > 0.0
            && self.lambda_up > 1.0
            && self.lambda_down > 0.0
            && self.lambda_down < 1.0
            && self.gradient_tol >= 0.0
            && self.step_tol >= 0.0
            && self.cost_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CalibError::InvalidInput("LM options out of range".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iters: usize,
    /// False when the iteration budget ran out before a stopping test fired;
    /// `x` is then the best iterate seen.
    pub converged: bool,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

/// A nonlinear least-squares problem. Residuals returning `None` mark
/// parameter vectors outside the model's domain.
pub trait LeastSquares: Sync {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>>;

    /// Central-difference Jacobian; override to exploit structure.
    fn jacobian(&self, x: &[f64], m: usize) -> Option<DMatrix<f64>> {
        numeric_jacobian(|p| self.residuals(p), x, m)
    }
}

pub fn diff_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

/// Central differences, one column per parameter, evaluated in parallel.
pub fn numeric_jacobian<F>(f: F, x: &[f64], m: usize) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let cols: Option<Vec<Vec<f64>>> = (0..x.len())
        .into_par_iter()
        .map(|k| {
            let h = diff_step(x[k]);
            let mut xp = x.to_vec();
            xp[k] = x[k] + h;
            let rp = f(&xp)?;
            xp[k] = x[k] - h;
            let rm = f(&xp)?;
            Some(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect();
    let cols = cols?;
    let mut j = DMatrix::zeros(m, x.len());
    for (k, c) in cols.iter().enumerate() {
        if c.len() != m {
            return None;
        }
        j.column_mut(k).copy_from_slice(c);
    }
    Some(j)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

struct Closure<F>(F);

impl<F: Fn(&[f64]) -> Option<Vec<f64>> + Sync> LeastSquares for Closure<F> {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        (self.0)(x)
    }
}

/// Minimizes `sum r(x)^2` for a plain residual closure.
pub fn levenberg_marquardt<F>(residual_fn: F, x0: &[f64], opts: &LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    solve(&Closure(|x: &[f64]| Some(residual_fn(x))), x0, opts)
}

/// Minimizes `sum r(x)^2` starting from `x0`.
pub fn solve<P: LeastSquares + ?Sized>(problem: &P, x0: &[f64], opts: &LmOptions) -> Result<LmReport> {
    opts.validate()?;
    let mut x = x0.to_vec();
    let mut r = problem.residuals(&x).ok_or(CalibError::NonFiniteResidual)?;
    if !finite(&r) {
        return Err(CalibError::NonFiniteResidual);
    }
    let mut cost = sum_sq(&r);
    let mut history = vec![cost];
    if cost == 0.0 || x.is_empty() {
        return Ok(LmReport { x, cost, iters: 0, converged: true, cost_history: history });
    }
    let m = r.len();
    let n = x.len();
    let mut lambda = opts.lambda0;
    let mut iters = 0;
    let mut converged = false;

    'outer: while iters < opts.max_iters {
        let j = problem.jacobian(&x, m).ok_or(CalibError::NonFiniteResidual)?;
        let jtj = j.tr_mul(&j);
        let g = j.tr_mul(&DVector::from_column_slice(&r));
        if g.amax() <= opts.gradient_tol {
            converged = true;
            break;
        }
        iters += 1;
        let max_diag = (0..n).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        let floor = max_diag * 1e-15;
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let step = a.cholesky().map(|c| c.solve(&(-&g)));
            let accepted = step.and_then(|dx| {
                let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
                let rn = problem.residuals(&xn).filter(|rn| rn.len() == m && finite(rn))?;
                let cn = sum_sq(&rn);
                (cn < cost).then_some((dx, xn, rn, cn))
            });
            match accepted {
                Some((dx, xn, rn, cn)) => {
                    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let small_step = dx.norm() <= opts.step_tol * (x_norm + opts.step_tol);
                    let small_gain = cost - cn <= opts.cost_tol * cost;
                    x = xn;
                    r = rn;
                    cost = cn;
                    history.push(cost);
                    lambda = (lambda * opts.lambda_down).max(1e-20);
                    if small_step || small_gain || cost == 0.0 {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= opts.lambda_up;
                    if lambda > 1e20 {
                        // No descent direction left at working precision.
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(LmReport { x, cost, iters, converged, cost_history: history })
}
