use nalgebra::{DMatrix, DVector};

use super::DesignMatrix;
use crate::error::{Error, Result};

/// IRLS controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    /// Convergence threshold on the max-norm of the mean score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions { tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted iteration, starting from β = 0.
    pub ll_trace: Vec<f64>,
}

/// Linear predictor beyond which a fit is treated as separated.
const SEPARATION_ETA: f64 = 30.0;
const RIDGE: f64 = 1e-10;

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood `Σ y η − log(1 + e^η)`.
pub fn logit_log_likelihood(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Result<f64> {
    let eta = x.mul_vec(beta)?;
    Ok(eta.iter().zip(y).map(|(&e, &y)| y * e - log1p_exp(e)).sum())
}

/// Score `Xᵀ (y − p)`.
pub fn logit_gradient(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    let eta = x.mul_vec(beta)?;
    let mut g = vec![0.0; x.n_cols()];
    for (i, e) in eta.iter().enumerate() {
        let r = y[i] - sigmoid(*e);
        for (gj, xj) in g.iter_mut().zip(x.row(i)) {
            *gj += r * xj;
        }
    }
    Ok(g)
}

fn solve_newton(h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        let d = ch.solve(g);
        if d.iter().all(|v| v.is_finite()) {
            return Ok(d);
        }
    }
    let p = h.nrows();
    let scale = (0..p).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let ridged = &h + DMatrix::identity(p, p) * (RIDGE * scale);
    if let Some(ch) = ridged.cholesky() {
        let d = ch.solve(g);
        if d.iter().all(|v| v.is_finite()) {
            return Ok(d);
        }
    }
    let pinv = h
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::DegenerateDesign(format!("logit Hessian: {e}")))?;
    Ok(pinv * g)
}

/// Logistic regression by iteratively reweighted least squares (Newton with
/// step halving, so the log-likelihood never decreases).
pub fn fit_logit(x: &DesignMatrix, y: &[f64], opts: &LogitOptions) -> Result<LogitFit> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} outcomes for {n} rows", y.len())));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("logit outcome must be 0/1, got {v}")));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass);
    }

    let mut beta = vec![0.0; p];
    let mut ll = logit_log_likelihood(x, y, &beta)?;
    let mut ll_trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let eta = x.mul_vec(&beta)?;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let w = pi * (1.0 - pi);
            let r = y[i] - pi;
            let row = x.row(i);
            for a in 0..p {
                g[a] += r * row[a];
                let wa = w * row[a];
                for b in a..p {
                    h[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        if g.amax() / (n as f64) < opts.tol {
            converged = true;
            break;
        }
        let delta = solve_newton(h, &g)?;
        iterations += 1;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + step * d).collect();
            let ll_trial = logit_log_likelihood(x, y, &trial)?;
            if ll_trial >= ll {
                beta = trial;
                ll = ll_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ll_trace.push(ll);
        if !accepted {
            // No ascent direction left at machine precision.
            converged = g.amax() / (n as f64) < opts.tol.sqrt();
            break;
        }
        let eta_max = x.mul_vec(&beta)?.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if eta_max > 2.0 * SEPARATION_ETA {
            return Err(Error::SeparationDetected);
        }
    }
    let eta_max = x.mul_vec(&beta)?.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if eta_max > SEPARATION_ETA {
        return Err(Error::SeparationDetected);
    }
    Ok(LogitFit {
        coefficients: beta,
        converged,
        iterations,
        log_likelihood: ll,
        ll_trace,
    })
}

/// Inverse-logit of `X β`, clamped to `[clip, 1 − clip]`.
pub fn predict_probability(fit: &LogitFit, x: &DesignMatrix, clip: f64) -> Result<Vec<f64>> {
    let eta = x.mul_vec(&fit.coefficients)?;
    Ok(eta
        .into_iter()
        .map(|e| sigmoid(e).clamp(clip, 1.0 - clip))
        .collect())
}
