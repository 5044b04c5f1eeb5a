//! Multiple treatment periods: treatment paths, per-period bounds, the
//! saturated two-way fixed effects regression and staggered doubly-robust
//! estimands.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gdid::{dr_estimate, gdid_bounds_labeled, DrEstimate, DrSpec, IdentifiedInterval};
use crate::inference::{
    bootstrap_estimates, union_confidence_bounds, BootstrapPlan, ConfidenceBounds, ElementDraws,
};
use crate::numerics::{fit_ols, DesignMatrix};
use crate::panel::{Contrast, GroupFilter, InfoLabel, InformationSet, PanelDataset, TreatmentScheme};
use crate::selection_bias::bias_set;

/// Treatment indicators over the treatment periods (the untreated start is
/// implicit).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreatmentPath(pub Vec<u8>);

impl TreatmentPath {
    pub fn never(len: usize) -> Self {
        TreatmentPath(vec![0; len])
    }

    /// Untreated before `index`, treated from `index` on.
    pub fn adopting_at(len: usize, index: usize) -> Self {
        TreatmentPath((0..len).map(|k| (k >= index) as u8).collect())
    }

    pub fn is_monotone(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_never(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }
}

impl fmt::Display for TreatmentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "({})", bits.join(","))
    }
}

impl Serialize for TreatmentPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Staggered-adoption group: never treated, or first treated in a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupCode {
    Never,
    Cohort(i64),
}

impl fmt::Display for GroupCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupCode::Never => f.write_str("never"),
            GroupCode::Cohort(g) => write!(f, "{g}"),
        }
    }
}

impl Serialize for GroupCode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GroupCode::Never => s.serialize_str("never"),
            GroupCode::Cohort(g) => s.serialize_i64(*g),
        }
    }
}

/// Per-unit treatment paths.
#[derive(Debug, Clone)]
pub struct PathClassification {
    pub treatment_periods: Vec<i64>,
    /// Indexed by unit index.
    pub paths: Vec<TreatmentPath>,
    pub staggered: bool,
    /// Cohorts by unit index, when every path is monotone.
    pub cohorts: Option<Vec<GroupCode>>,
}

impl PathClassification {
    pub fn cohort_codes(&self) -> Vec<GroupCode> {
        let mut codes: Vec<GroupCode> = self.cohorts.iter().flatten().copied().collect();
        codes.sort();
        codes.dedup();
        codes
    }

    /// Sample share of each realised path.
    pub fn path_shares(&self) -> BTreeMap<TreatmentPath, f64> {
        let mut counts: BTreeMap<TreatmentPath, usize> = BTreeMap::new();
        for p in &self.paths {
            *counts.entry(p.clone()).or_default() += 1;
        }
        let n = self.paths.len() as f64;
        counts.into_iter().map(|(k, v)| (k, v as f64 / n)).collect()
    }
}

/// Reads each unit's path over the treatment periods. With
/// `assert_staggered`, a switch out of treatment is an error.
pub fn classify_paths(ds: &PanelDataset, assert_staggered: bool) -> Result<PathClassification> {
    let treatment_periods = ds.treatment_periods();
    if treatment_periods.is_empty() {
        return Err(Error::NoTreatedUnits);
    }
    let t = treatment_periods.len();
    let mut bits: Vec<Vec<Option<u8>>> = vec![vec![None; t]; ds.n_units()];
    for (k, &p) in treatment_periods.iter().enumerate() {
        for i in ds.period_rows(p) {
            bits[ds.unit_of_row(i)][k] = Some(ds.treated_of_row(i) as u8);
        }
    }
    let mut paths = Vec::with_capacity(ds.n_units());
    for (u, b) in bits.into_iter().enumerate() {
        let path: Option<Vec<u8>> = b.iter().copied().collect();
        match path {
            Some(p) => paths.push(TreatmentPath(p)),
            None => {
                let k = b.iter().position(Option::is_none).expect("some period missing");
                return Err(Error::UnbalancedPanel(format!(
                    "unit `{}` not observed in treatment period {}",
                    ds.unit_ids()[u],
                    treatment_periods[k]
                )));
            }
        }
    }
    let staggered = paths.iter().all(TreatmentPath::is_monotone);
    if assert_staggered && !staggered {
        let (u, p) = paths.iter().enumerate().find(|(_, p)| !p.is_monotone()).expect("non-monotone path");
        let k = p.0.windows(2).position(|w| w[0] > w[1]).expect("reversal") + 1;
        return Err(Error::TreatmentReversalInStaggeredMode {
            unit: ds.unit_ids()[u].clone(),
            period: treatment_periods[k],
        });
    }
    let cohorts = staggered.then(|| {
        paths
            .iter()
            .map(|p| match p.0.iter().position(|&b| b == 1) {
                Some(k) => GroupCode::Cohort(treatment_periods[k]),
                None => GroupCode::Never,
            })
            .collect()
    });
    Ok(PathClassification { treatment_periods, paths, staggered, cohorts })
}

/// A group of units to contrast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathGroup {
    Path(TreatmentPath),
    Cohort(GroupCode),
    /// Units with the given treatment status in one period.
    StatusAt { period: i64, treated: bool },
}

impl fmt::Display for PathGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathGroup::Path(p) => write!(f, "path {p}"),
            PathGroup::Cohort(g) => write!(f, "cohort {g}"),
            PathGroup::StatusAt { period, treated } => write!(f, "D_{period}={}", *treated as u8),
        }
    }
}

impl PathGroup {
    fn mask(&self, ds: &PanelDataset, cls: &PathClassification) -> Result<Vec<bool>> {
        match self {
            PathGroup::Path(p) => Ok(cls.paths.iter().map(|q| q == p).collect()),
            PathGroup::Cohort(g) => {
                let cohorts = cls.cohorts.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("cohorts need a staggered design".into())
                })?;
                Ok(cohorts.iter().map(|c| c == g).collect())
            }
            PathGroup::StatusAt { period, treated } => {
                if !ds.has_period(*period) {
                    return Err(Error::MissingPeriod(*period));
                }
                let mut mask = vec![false; ds.n_units()];
                for i in ds.period_rows(*period) {
                    mask[ds.unit_of_row(i)] = (ds.treated_of_row(i) == 1) == *treated;
                }
                Ok(mask)
            }
        }
    }

    fn filter(&self, ds: &PanelDataset, cls: &PathClassification) -> Result<GroupFilter> {
        Ok(GroupFilter::units(Arc::new(self.mask(ds, cls)?), self.to_string()))
    }
}

fn check_scheme(ds: &PanelDataset) -> Result<()> {
    if ds.scheme() == TreatmentScheme::DonorPool {
        return Err(Error::InvalidArgument("donor-pool data has no treatment paths".into()));
    }
    Ok(())
}

/// Contrast of two path groups.
pub fn path_contrast(ds: &PanelDataset, to: &PathGroup, from: &PathGroup) -> Result<Contrast> {
    check_scheme(ds)?;
    let cls = classify_paths(ds, false)?;
    Ok(Contrast { treated: to.filter(ds, &cls)?, control: from.filter(ds, &cls)? })
}

/// Difference in outcome means between two path groups at period `t`.
pub fn theta_dim_t(ds: &PanelDataset, to: &PathGroup, from: &PathGroup, t: i64) -> Result<f64> {
    path_contrast(ds, to, from)?.difference(ds, t)
}

/// Bias-set bounds on the period-`t` effect for `from → to`.
pub fn att_bounds_t(ds: &PanelDataset, to: &PathGroup, from: &PathGroup, t: i64, info: &InformationSet) -> Result<IdentifiedInterval> {
    let c = path_contrast(ds, to, from)?;
    let theta = c.difference(ds, t)?;
    let bias = bias_set(ds, info, &c)?;
    Ok(gdid_bounds_labeled(theta, &bias, "theta_dim_t"))
}

/// `Σ ω_t [lower_t, upper_t]`.
pub fn weighted_att_bounds(per_t: &[IdentifiedInterval], weights: &[f64]) -> Result<IdentifiedInterval> {
    if per_t.len() != weights.len() || per_t.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} intervals, {} weights",
            per_t.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0 && *w <= 1.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSumInvalid(total));
    }
    let dot = |f: fn(&IdentifiedInterval) -> f64| per_t.iter().zip(weights).map(|(iv, w)| w * f(iv)).sum::<f64>();
    Ok(IdentifiedInterval {
        lower: dot(|iv| iv.lower),
        upper: dot(|iv| iv.upper),
        point_estimand_label: "weighted_att".into(),
        point_estimate: dot(|iv| iv.point_estimate),
        bias: None,
    })
}

/// `n_t / Σ n_t` with `n_t` the number of treated observations in period `t`.
pub fn treated_count_weights(ds: &PanelDataset, periods: &[i64]) -> Result<Vec<f64>> {
    let counts: Vec<usize> = periods
        .iter()
        .map(|&p| ds.period_rows(p).filter(|&i| ds.treated_of_row(i) == 1).count())
        .collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoTreatedUnits);
    }
    Ok(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// Effect on the ever-treated: each treated path's interval against the
/// never-treated path, weighted by `ω_t` times the path's share among
/// ever-treated units.
pub fn ever_treated_bounds(ds: &PanelDataset, info: &InformationSet, period_weights: &[f64]) -> Result<IdentifiedInterval> {
    check_scheme(ds)?;
    let cls = classify_paths(ds, false)?;
    let periods = &cls.treatment_periods;
    if period_weights.len() != periods.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} period weights for {} treatment periods",
            period_weights.len(),
            periods.len()
        )));
    }
    let never = PathGroup::Path(TreatmentPath::never(periods.len()));
    let shares = cls.path_shares();
    let ever: f64 = shares.iter().filter(|(p, _)| !p.is_never()).map(|(_, s)| s).sum();
    if ever == 0.0 {
        return Err(Error::NoTreatedUnits);
    }
    let mut intervals = Vec::new();
    let mut weights = Vec::new();
    for (path, share) in shares.iter().filter(|(p, _)| !p.is_never()) {
        for (&t, &w) in periods.iter().zip(period_weights) {
            intervals.push(att_bounds_t(ds, &PathGroup::Path(path.clone()), &never, t, info)?);
            weights.push(w * share / ever);
        }
    }
    let mut iv = weighted_att_bounds(&intervals, &weights)?;
    iv.point_estimand_label = "ever_treated_att".into();
    Ok(iv)
}

// ---------------------------------------------------------------------------
// Two-way fixed effects

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwfeTheta {
    pub group: GroupCode,
    pub period: i64,
    pub estimate: f64,
    /// Bootstrap standard deviation, when a bootstrap was run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwfeResult {
    pub baseline_period: i64,
    pub beta: f64,
    pub gamma: Vec<(GroupCode, f64)>,
    pub delta: Vec<(i64, f64)>,
    pub theta: Vec<TwfeTheta>,
    pub n_obs: usize,
}

impl TwfeResult {
    pub fn theta(&self, g: GroupCode, s: i64) -> Option<f64> {
        self.theta.iter().find(|t| t.group == g && t.period == s).map(|t| t.estimate)
    }
}

/// Saturated regression of the outcome on cohort, period and cohort×period
/// indicators over `{baseline} ∪ treatment periods`.
pub fn twfe_fit(ds: &PanelDataset, baseline: i64) -> Result<TwfeResult> {
    check_scheme(ds)?;
    let cls = classify_paths(ds, true)?;
    let post = &cls.treatment_periods;
    if !ds.pre_periods().contains(&baseline) {
        return Err(Error::InvalidArgument(format!("baseline {baseline} is not a pre-treatment period")));
    }
    let mut included = vec![baseline];
    included.extend_from_slice(post);
    if !ds.periods_balanced(&included) {
        return Err(Error::UnbalancedPanel(format!(
            "every unit must be observed once in each of {included:?}"
        )));
    }
    let cohorts = cls.cohorts.as_ref().expect("staggered");
    let codes = cls.cohort_codes();
    if !codes.contains(&GroupCode::Never) {
        return Err(Error::CollinearDesign("no never-treated units".into()));
    }
    let groups: Vec<GroupCode> = codes.into_iter().filter(|c| *c != GroupCode::Never).collect();
    if groups.is_empty() {
        return Err(Error::NoTreatedUnits);
    }

    let (ng, ns) = (groups.len(), post.len());
    let p = 1 + ng + ns + ng * ns;
    let mut labels = vec!["beta".to_string()];
    labels.extend(groups.iter().map(|g| format!("gamma[{g}]")));
    labels.extend(post.iter().map(|s| format!("delta[{s}]")));
    for g in &groups {
        for s in post {
            labels.push(format!("theta[{g},{s}]"));
        }
    }
    let mut values = Vec::new();
    let mut y = Vec::new();
    for &period in &included {
        let s_idx = post.iter().position(|&s| s == period);
        for i in ds.period_rows(period) {
            let g_idx = groups.iter().position(|g| *g == cohorts[ds.unit_of_row(i)]);
            let mut row = vec![0.0; p];
            row[0] = 1.0;
            if let Some(g) = g_idx {
                row[1 + g] = 1.0;
            }
            if let Some(s) = s_idx {
                row[1 + ng + s] = 1.0;
            }
            if let (Some(g), Some(s)) = (g_idx, s_idx) {
                row[1 + ng + ns + g * ns + s] = 1.0;
            }
            values.extend(row);
            y.push(ds.outcome_of_row(i));
        }
    }
    let x = DesignMatrix::new(y.len(), p, values, labels)?;
    let fit = fit_ols(&x, &y)?;
    if fit.rank_deficient {
        return Err(Error::CollinearDesign(format!("rank {} of {p} columns", fit.rank)));
    }
    let b = &fit.coefficients;
    let mut theta = Vec::with_capacity(ng * ns);
    for (gi, g) in groups.iter().enumerate() {
        for (si, s) in post.iter().enumerate() {
            theta.push(TwfeTheta { group: *g, period: *s, estimate: b[1 + ng + ns + gi * ns + si], se: None });
        }
    }
    Ok(TwfeResult {
        baseline_period: baseline,
        beta: b[0],
        gamma: groups.iter().enumerate().map(|(i, g)| (*g, b[1 + i])).collect(),
        delta: post.iter().enumerate().map(|(i, s)| (*s, b[1 + ng + i])).collect(),
        theta,
        n_obs: y.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwfeUnionCi {
    pub group: GroupCode,
    pub period: i64,
    pub bounds: ConfidenceBounds,
    /// Point fits per baseline, with bootstrap standard deviations.
    pub fits: Vec<TwfeResult>,
    pub failed_replicates: usize,
}

/// Union of bootstrap CIs for `θ^g_s` across baselines in `info`. Each
/// replicate refits every baseline on the same resample.
pub fn twfe_union_ci(ds: &PanelDataset, info: &InformationSet, g: GroupCode, s: i64, plan: &BootstrapPlan) -> Result<TwfeUnionCi> {
    let baselines = info.periods();
    if baselines.is_empty() {
        return Err(Error::InvalidInformationSet("TWFE needs pre-period baselines".into()));
    }
    let mut fits = baselines.par_iter().map(|&b| twfe_fit(ds, b)).collect::<Result<Vec<_>>>()?;
    let points = fits
        .iter()
        .map(|f| f.theta(g, s).ok_or_else(|| Error::InvalidArgument(format!("no coefficient for cohort {g}, period {s}"))))
        .collect::<Result<Vec<_>>>()?;
    let n_theta = fits[0].theta.len();
    let draws = bootstrap_estimates(
        ds,
        |sample| {
            let mut out = Vec::with_capacity(baselines.len() * (n_theta + 1));
            for &b in &baselines {
                let f = twfe_fit(sample, b)?;
                out.push(f.theta(g, s).ok_or(Error::NoTreatedUnits)?);
            }
            Ok(out)
        },
        plan,
    )?;
    let elements: Vec<ElementDraws> = baselines
        .iter()
        .zip(&points)
        .enumerate()
        .map(|(k, (&b, &est))| ElementDraws { label: InfoLabel::Int(b), estimate: est, draws: draws.column(k) })
        .collect();
    for (k, f) in fits.iter_mut().enumerate() {
        let d = draws.column(k);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (d.len().max(2) - 1) as f64).sqrt();
        for t in f.theta.iter_mut().filter(|t| t.group == g && t.period == s) {
            t.se = Some(sd);
        }
    }
    Ok(TwfeUnionCi {
        group: g,
        period: s,
        bounds: union_confidence_bounds(&elements, plan.ci_level)?,
        fits,
        failed_replicates: draws.failed,
    })
}

/// Staggered doubly-robust estimand for cohort `g` in period `t`, against
/// never-treated units. Covariates of all treatment periods are stacked per
/// unit.
pub fn tau_dr_staggered(ds: &PanelDataset, g: GroupCode, t: i64, spec: &DrSpec) -> Result<DrEstimate> {
    check_scheme(ds)?;
    let cls = classify_paths(ds, true)?;
    let cohorts = cls.cohorts.as_ref().expect("staggered");
    let codes = cls.cohort_codes();
    if g == GroupCode::Never || !codes.contains(&g) {
        return Err(Error::NoTreatedUnits);
    }
    if !codes.contains(&GroupCode::Never) {
        return Err(Error::EmptyCell { period: t, group: "never treated".into() });
    }
    if !ds.periods_balanced(&[t]) {
        return Err(Error::UnbalancedPanel(format!("outcome period {t}")));
    }
    let n = ds.n_units();
    let k = ds.n_covariates();
    let tp = &cls.treatment_periods;
    let mut x = vec![0.0; n * k * tp.len()];
    for (j, &p) in tp.iter().enumerate() {
        for i in ds.period_rows(p) {
            let u = ds.unit_of_row(i);
            let off = u * k * tp.len() + j * k;
            x[off..off + k].copy_from_slice(ds.covariates_of_row(i));
        }
    }
    let mut y = vec![0.0; n];
    for i in ds.period_rows(t) {
        y[ds.unit_of_row(i)] = ds.outcome_of_row(i);
    }
    let names: Vec<String> = tp
        .iter()
        .flat_map(|p| ds.covariate_names().iter().map(move |c| format!("{c}@{p}")))
        .collect();
    let width = k * tp.len();
    let rows: Vec<&[f64]> = (0..n).map(|u| &x[u * width..(u + 1) * width]).collect();
    let masks: Vec<Vec<bool>> = codes.iter().map(|c| cohorts.iter().map(|u| u == c).collect()).collect();
    let groups: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    let gi = codes.iter().position(|c| *c == g).expect("present");
    let ri = codes.iter().position(|c| *c == GroupCode::Never).expect("present");
    dr_estimate(&rows, &names, &y, &groups, gi, ri, spec)
}
