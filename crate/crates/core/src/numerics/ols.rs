use nalgebra::{DMatrix, DVector, SVD};

use super::DesignMatrix;
use crate::error::{Error, Result};

/// Least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// Residual sum of squares over `n - rank` (zero when saturated).
    pub residual_variance: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl LinearFit {
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        x.mul_vec(&self.coefficients)
    }
}

/// Minimum-norm least squares via Householder QR followed by an SVD of `R`.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<LinearFit> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} outcomes for {n} rows", y.len())));
    }
    if p == 0 || n == 0 {
        return Err(Error::DegenerateDesign("empty design".into()));
    }
    let qr = x.to_dmatrix().qr();
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let m = n.min(p);
    let r: DMatrix<f64> = qr.r();
    let c = qty.rows(0, m).into_owned();

    let svd = SVD::new(r, true, true);
    let sv = &svd.singular_values;
    let max_sv = sv.iter().copied().fold(0.0, f64::max);
    let threshold = max_sv * (n.max(p) as f64) * f64::EPSILON;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let utc = u.transpose() * &c;
    let mut beta = DVector::zeros(p);
    let mut rank = 0;
    for k in 0..sv.len() {
        if sv[k] > threshold {
            rank += 1;
            let scale = utc[k] / sv[k];
            beta += v_t.row(k).transpose() * scale;
        }
    }

    let fitted = x.mul_vec(beta.as_slice())?;
    let rss: f64 = fitted.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
    let residual_variance = if n > rank { rss / (n - rank) as f64 } else { 0.0 };
    Ok(LinearFit {
        coefficients: beta.as_slice().to_vec(),
        residual_variance,
        rank,
        rank_deficient: rank < p,
    })
}
