//! Policy-oriented point estimands: loss-minimising choices of the
//! post-period bias and trend forecasts of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gdid::{gdid_bounds_labeled, IdentifiedInterval};
use crate::numerics::{fit_ols, DesignMatrix};
use crate::selection_bias::BiasSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
    Linf,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::L1, LossKind::L2, LossKind::Linf];
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::Linf => "linf",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "mae" => Ok(LossKind::L1),
            "l2" | "rmse" => Ok(LossKind::L2),
            "linf" | "l_inf" | "minimax" => Ok(LossKind::Linf),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoEstimate {
    pub loss: LossKind,
    pub sb1_choice: f64,
    pub estimate: f64,
    /// Always true: these estimands need not have a causal interpretation.
    pub non_causal: bool,
}

/// Tolerance for deciding that cumulative weight sits exactly at one half.
const MEDIAN_TIE_TOL: f64 = 1e-12;

/// Weighted median; when the half-mass point falls between two order
/// statistics, their midpoint.
pub fn weighted_median(values: &[(f64, f64)]) -> f64 {
    let mut v: Vec<(f64, f64)> = values.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|x| x.1).sum();
    let mut cum = 0.0;
    for k in 0..v.len() {
        cum += v[k].1 / total;
        if (cum - 0.5).abs() <= MEDIAN_TIE_TOL {
            // Skip zero-weight points when looking for the upper neighbour.
            return match v[k + 1..].iter().find(|x| x.1 > 0.0) {
                Some(next) => 0.5 * (v[k].0 + next.0),
                None => v[k].0,
            };
        }
        if cum > 0.5 {
            return v[k].0;
        }
    }
    v.last().map(|x| x.0).unwrap_or(f64::NAN)
}

/// Minimiser of the expected loss over the bias set's weighted elements.
pub fn optimal_sb1(bias: &BiasSet, loss: LossKind) -> f64 {
    let c = bias.candidates();
    match loss {
        LossKind::L1 => weighted_median(&c),
        LossKind::L2 => {
            let total: f64 = c.iter().map(|x| x.1).sum();
            c.iter().map(|(v, w)| v * w).sum::<f64>() / total
        }
        LossKind::Linf => 0.5 * (bias.lower + bias.upper),
    }
}

pub fn po_gdid(theta: f64, bias: &BiasSet, loss: LossKind) -> PoEstimate {
    let sb1 = optimal_sb1(bias, loss);
    PoEstimate { loss, sb1_choice: sb1, estimate: theta - sb1, non_causal: true }
}

/// Hull of loss minimisers over all weightings. It coincides with the
/// bias-set bounds, so it is computed as those.
pub fn robust_po_hull(theta: f64, bias: &BiasSet) -> IdentifiedInterval {
    gdid_bounds_labeled(theta, bias, "robust_po_hull")
}

/// Least-squares polynomial trend of `series` (period, bias), evaluated at
/// `target`.
pub fn forecast_sb1(series: &[(f64, f64)], target: f64, degree: usize) -> Result<f64> {
    let mut distinct: Vec<f64> = series.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateDesign("forecast needs at least two distinct periods".into()));
    }
    if degree == 0 || degree > distinct.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "degree must be between 1 and {} for {} distinct periods",
            distinct.len() - 1,
            distinct.len()
        )));
    }
    let centre = series.iter().map(|s| s.0).sum::<f64>() / series.len() as f64;
    let scale = series.iter().map(|s| (s.0 - centre).abs()).fold(0.0, f64::max);
    let powers = |t: f64| {
        let z = (t - centre) / scale;
        (0..=degree).map(move |k| z.powi(k as i32))
    };
    let values: Vec<f64> = series.iter().flat_map(|s| powers(s.0)).collect();
    let labels = (0..=degree).map(|k| format!("t^{k}")).collect();
    let x = DesignMatrix::new(series.len(), degree + 1, values, labels)?;
    let y: Vec<f64> = series.iter().map(|s| s.1).collect();
    let fit = fit_ols(&x, &y)?;
    Ok(powers(target).zip(&fit.coefficients).map(|(a, b)| a * b).sum())
}

/// Midpoint of the post-treatment periods, the default forecast target.
pub fn post_midpoint(post_periods: &[i64]) -> Option<f64> {
    let lo = *post_periods.iter().min()?;
    let hi = *post_periods.iter().max()?;
    Some(0.5 * (lo + hi) as f64)
}
