//! Identification engine: the OLS contrast, bias-set bounds and the
//! doubly-robust estimand.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fit_logit, fit_ols, predict_probability, DesignMatrix, LogitOptions};
use crate::panel::{Contrast, InformationSet, PanelDataset};
use crate::selection_bias::{bias_set, BiasSet};

/// `[θ − sup SB, θ − inf SB]` together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiedInterval {
    pub lower: f64,
    pub upper: f64,
    pub point_estimand_label: String,
    pub point_estimate: f64,
    /// Absent for aggregates of several intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSet>,
}

impl IdentifiedInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lower - tol <= v && v <= self.upper + tol
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsSpec {
    Logit,
    /// Sample share of the group.
    KnownConstant,
    /// Share within each distinct covariate vector.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrSpec {
    Linear,
    /// Covariates, squares and pairwise interactions.
    Quadratic,
    /// Control-group mean.
    KnownConstant,
    /// Control mean within each distinct covariate vector.
    Saturated,
}

/// Nuisance-model choices for the doubly-robust estimand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrSpec {
    pub ps: PsSpec,
    pub or: OrSpec,
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_clip() -> f64 {
    1e-6
}

impl Default for DrSpec {
    fn default() -> Self {
        DrSpec { ps: PsSpec::Logit, or: OrSpec::Linear, clip: default_clip() }
    }
}

impl DrSpec {
    pub fn new(ps: PsSpec, or: OrSpec) -> Self {
        DrSpec { ps, or, clip: default_clip() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::InvalidArgument(format!("clip must lie in (0, 0.5), got {}", self.clip)));
        }
        Ok(())
    }
}

/// τ^DR and how many propensities had to be clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrEstimate {
    pub estimate: f64,
    pub n_clipped: usize,
    pub n_rows: usize,
}

/// Difference of treated and control outcome means in `post_period`.
pub fn theta_ols(ds: &PanelDataset, post_period: i64) -> Result<f64> {
    Contrast::binary().difference(ds, post_period)
}

/// Bias-set bounds around a point estimand.
pub fn gdid_bounds(theta: f64, bias: &BiasSet) -> IdentifiedInterval {
    gdid_bounds_labeled(theta, bias, "theta_ols")
}

pub fn gdid_bounds_labeled(theta: f64, bias: &BiasSet, label: &str) -> IdentifiedInterval {
    IdentifiedInterval {
        lower: theta - bias.upper,
        upper: theta - bias.lower,
        point_estimand_label: label.to_string(),
        point_estimate: theta,
        bias: Some(bias.clone()),
    }
}

/// `θ_OLS − SB` at the latest pre-treatment period.
pub fn standard_did(ds: &PanelDataset, post_period: i64) -> Result<f64> {
    let c = Contrast::binary();
    let base = ds
        .periods()
        .iter()
        .copied()
        .filter(|&p| p < post_period)
        .next_back()
        .ok_or_else(|| Error::InvalidPanel(format!("no period before {post_period}")))?;
    Ok(c.difference(ds, post_period)? - c.difference(ds, base)?)
}

/// Doubly-robust estimand on the post-period cross-section.
pub fn tau_dr(ds: &PanelDataset, post_period: i64, spec: &DrSpec) -> Result<DrEstimate> {
    spec.validate()?;
    let rows: Vec<usize> = ds.period_rows(post_period).collect();
    let x: Vec<&[f64]> = rows.iter().map(|&i| ds.covariates_of_row(i)).collect();
    let y: Vec<f64> = rows.iter().map(|&i| ds.outcome_of_row(i)).collect();
    let treated: Vec<bool> = rows.iter().map(|&i| ds.treated_of_row(i) == 1).collect();
    let control: Vec<bool> = treated.iter().map(|t| !t).collect();
    if !treated.iter().any(|&t| t) {
        return Err(Error::NoTreatedUnits);
    }
    if !control.iter().any(|&c| c) {
        return Err(Error::EmptyCell { period: post_period, group: "D=0".into() });
    }
    let groups: Vec<&[bool]> = vec![&treated, &control];
    dr_estimate(&x, ds.covariate_names(), &y, &groups, 0, 1, spec)
}

/// Bias-set bounds around τ^DR.
pub fn gdid_bounds_covariates(ds: &PanelDataset, info: &InformationSet, spec: &DrSpec) -> Result<(IdentifiedInterval, DrEstimate)> {
    let post = ds.post_period()?;
    let dr = tau_dr(ds, post, spec)?;
    let bias = bias_set(ds, info, &Contrast::binary())?;
    Ok((gdid_bounds_labeled(dr.estimate, &bias, "tau_dr"), dr))
}

/// Shared doubly-robust average
/// `Σ (D^g − r(X) D^0)(Y − μ₀(X)) / Σ D^g` with `r = P^g / P^0`.
///
/// `groups` partitions the rows (every row in exactly one group); `g` and
/// `reference` index into it.
pub(crate) fn dr_estimate(
    x: &[&[f64]],
    names: &[String],
    y: &[f64],
    groups: &[&[bool]],
    g: usize,
    reference: usize,
    spec: &DrSpec,
) -> Result<DrEstimate> {
    spec.validate()?;
    let n = y.len();
    let in_g = groups[g];
    let in_0 = groups[reference];
    let n_g = in_g.iter().filter(|&&v| v).count();
    if n_g == 0 {
        return Err(Error::NoTreatedUnits);
    }

    let mu0 = outcome_model(spec.or, x, names, y, in_0)?;

    // Raw probabilities for every group, then clip and renormalise.
    let raw: Vec<Vec<f64>> = match spec.ps {
        PsSpec::KnownConstant => groups
            .iter()
            .map(|m| vec![m.iter().filter(|&&v| v).count() as f64 / n as f64; n])
            .collect(),
        PsSpec::Saturated => {
            let cells = cell_index(x);
            let mut counts: HashMap<usize, (usize, Vec<usize>)> = HashMap::new();
            for (i, &c) in cells.iter().enumerate() {
                let e = counts.entry(c).or_insert_with(|| (0, vec![0; groups.len()]));
                e.0 += 1;
                for (h, m) in groups.iter().enumerate() {
                    if m[i] {
                        e.1[h] += 1;
                    }
                }
            }
            (0..groups.len())
                .map(|h| {
                    cells
                        .iter()
                        .map(|c| {
                            let (tot, ref k) = counts[c];
                            k[h] as f64 / tot as f64
                        })
                        .collect()
                })
                .collect()
        }
        PsSpec::Logit => {
            let design = DesignMatrix::linear(x, names)?;
            if groups.len() == 2 {
                let d: Vec<f64> = in_g.iter().map(|&v| v as u8 as f64).collect();
                let fit = fit_logit(&design, &d, &LogitOptions::default())?;
                let p = predict_probability(&fit, &design, 0.0)?;
                let q = p.iter().map(|v| 1.0 - v).collect();
                if g == 0 { vec![p, q] } else { vec![q, p] }
            } else {
                groups
                    .iter()
                    .map(|m| {
                        let d: Vec<f64> = m.iter().map(|&v| v as u8 as f64).collect();
                        let fit = fit_logit(&design, &d, &LogitOptions::default())?;
                        predict_probability(&fit, &design, 0.0)
                    })
                    .collect::<Result<_>>()?
            }
        }
    };

    let mut n_clipped = 0;
    let mut num = 0.0;
    for i in 0..n {
        if !(in_g[i] || in_0[i]) {
            continue;
        }
        let total: f64 = raw.iter().map(|p| p[i]).sum();
        let pg_raw = raw[g][i] / total;
        let p0_raw = raw[reference][i] / total;
        let pg = pg_raw.clamp(spec.clip, 1.0 - spec.clip);
        let p0 = p0_raw.clamp(spec.clip, 1.0 - spec.clip);
        if pg != pg_raw || p0 != p0_raw {
            n_clipped += 1;
        }
        let resid = y[i] - mu0[i];
        if in_g[i] {
            num += resid;
        } else {
            num -= pg / p0 * resid;
        }
    }
    let n_used = (0..n).filter(|&i| in_g[i] || in_0[i]).count();
    if n_clipped == n_used {
        return Err(Error::AllPropensitiesClipped(n_clipped));
    }
    Ok(DrEstimate { estimate: num / n_g as f64, n_clipped, n_rows: n })
}

fn cell_index(x: &[&[f64]]) -> Vec<usize> {
    let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
    x.iter()
        .map(|r| {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect()
}

fn outcome_model(or: OrSpec, x: &[&[f64]], names: &[String], y: &[f64], in_0: &[bool]) -> Result<Vec<f64>> {
    let n0 = in_0.iter().filter(|&&v| v).count();
    if n0 == 0 {
        return Err(Error::DegenerateDesign("no reference-group observations".into()));
    }
    match or {
        OrSpec::KnownConstant => {
            let m = y.iter().zip(in_0).filter(|(_, &c)| c).map(|(y, _)| y).sum::<f64>() / n0 as f64;
            Ok(vec![m; y.len()])
        }
        OrSpec::Saturated => {
            let cells = cell_index(x);
            let mut acc: HashMap<usize, (f64, usize)> = HashMap::new();
            for i in 0..y.len() {
                if in_0[i] {
                    let e = acc.entry(cells[i]).or_default();
                    e.0 += y[i];
                    e.1 += 1;
                }
            }
            cells
                .iter()
                .map(|c| {
                    acc.get(c).map(|(s, k)| s / *k as f64).ok_or_else(|| {
                        Error::DegenerateDesign("covariate cell without reference-group observations".into())
                    })
                })
                .collect()
        }
        OrSpec::Linear | OrSpec::Quadratic => {
            let design = if or == OrSpec::Linear {
                DesignMatrix::linear(x, names)?
            } else {
                DesignMatrix::quadratic(x, names)?
            };
            let sub = design.select_rows(in_0);
            let y0: Vec<f64> = y.iter().zip(in_0).filter(|(_, &c)| c).map(|(y, _)| *y).collect();
            let fit = fit_ols(&sub, &y0)?;
            fit.predict(&design)
        }
    }
}
