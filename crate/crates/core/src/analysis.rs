//! End-to-end pipelines behind the command line and the C interface. Every
//! report is plain serialisable data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dgp::{analytic_truth, interval_coverage, monte_carlo, DgpFamily, DgpSpec, McReport, Truth};
use crate::error::{Error, Result};
use crate::gdid::{gdid_bounds, gdid_bounds_labeled, standard_did, tau_dr, theta_ols, DrEstimate, DrSpec, IdentifiedInterval};
use crate::inference::{
    bootstrap_estimates, percentile_ci, union_confidence_bounds, BootstrapDraws, BootstrapPlan, ConfidenceBounds,
    ElementDraws, ResampleLevel,
};
use crate::multi_period::{
    att_bounds_t, classify_paths, ever_treated_bounds, treated_count_weights, twfe_fit, GroupCode, PathGroup,
    TreatmentPath, TwfeResult,
};
use crate::panel::{overlap_check, Contrast, GroupFilter, InfoKind, InformationSet, OverlapReport, PanelDataset, TreatmentScheme};
use crate::po::{forecast_sb1, po_gdid, post_midpoint, robust_po_hull, LossKind, PoEstimate};
use crate::relax::{
    discordancy_report, our_sb1_hull, rr_relative_magnitude_sb1, rr_smoothness_sb1, sc_bounds, DiscordancyReport,
    DonorPanel, RrInterval,
};
use crate::selection_bias::{bias_set, bias_variation_set, selection_bias_at};

/// Version of the JSON documents written by the command line.
pub const SCHEMA_VERSION: &str = "1";

/// How to build the information set from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfoSpec {
    /// Pre-treatment periods; empty means all of them.
    Periods {
        #[serde(default)]
        periods: Vec<i64>,
    },
    Covariate {
        column: String,
        #[serde(default)]
        levels: Option<Vec<i64>>,
    },
    Sources {
        column: String,
        #[serde(default)]
        sources: Option<Vec<i64>>,
    },
    Binned {
        column: String,
        edges: Vec<f64>,
    },
}

impl Default for InfoSpec {
    fn default() -> Self {
        InfoSpec::Periods { periods: Vec::new() }
    }
}

impl InfoSpec {
    pub fn periods(periods: &[i64]) -> Self {
        InfoSpec::Periods { periods: periods.to_vec() }
    }

    pub fn build(&self, ds: &PanelDataset) -> Result<InformationSet> {
        match self {
            InfoSpec::Periods { periods } if periods.is_empty() => InformationSet::pre_periods(ds, &ds.pre_periods()),
            InfoSpec::Periods { periods } => InformationSet::pre_periods(ds, periods),
            InfoSpec::Covariate { column, levels } => InformationSet::discrete_covariate(ds, column, levels.as_deref()),
            InfoSpec::Sources { column, sources } => InformationSet::data_sources(ds, column, sources.as_deref()),
            InfoSpec::Binned { column, edges } => InformationSet::binned_covariate(ds, column, edges),
        }
    }
}

/// Bootstrap settings and outcome, reported next to every interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapMeta {
    pub replicates: usize,
    pub seed: u64,
    pub resample: ResampleLevel,
    pub ci_level: f64,
    pub succeeded: usize,
    pub failed: usize,
}

impl BootstrapMeta {
    fn new(plan: &BootstrapPlan, draws: &BootstrapDraws) -> Self {
        BootstrapMeta {
            replicates: plan.replicates,
            seed: plan.seed,
            resample: plan.resample,
            ci_level: plan.ci_level,
            succeeded: draws.estimates.len(),
            failed: draws.failed,
        }
    }
}

/// One row of the plotting CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub series: String,
    pub period: f64,
    pub lower: f64,
    pub upper: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

impl PlotRow {
    fn new(series: impl Into<String>, period: f64, lower: f64, upper: f64, ci: Option<(f64, f64)>) -> Self {
        PlotRow { series: series.into(), period, lower, upper, ci_lower: ci.map(|c| c.0), ci_upper: ci.map(|c| c.1) }
    }
}

fn element_draws(points: &[(crate::panel::InfoLabel, f64)], draws: &BootstrapDraws, offset: usize) -> Vec<ElementDraws> {
    points
        .iter()
        .enumerate()
        .map(|(k, (label, est))| ElementDraws { label: label.clone(), estimate: *est, draws: draws.column(offset + k) })
        .collect()
}

// ---------------------------------------------------------------------------
// Bounds

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    #[serde(default)]
    pub info: InfoSpec,
    #[serde(default)]
    pub dr: Option<DrSpec>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapPlan>,
    /// Also report bounds under bias-variation stability.
    #[serde(default)]
    pub variation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub post_period: i64,
    pub n_units: usize,
    pub n_rows: usize,
    pub info_kind: InfoKind,
    pub theta_ols: f64,
    pub standard_did: f64,
    pub bounds: IdentifiedInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation_bounds: Option<IdentifiedInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_dr: Option<DrEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dr_bounds: Option<IdentifiedInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConfidenceBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dr_confidence: Option<ConfidenceBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapMeta>,
}

impl BoundsReport {
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let p = self.post_period as f64;
        let ci = |c: &Option<ConfidenceBounds>| c.as_ref().map(|c| (c.lower, c.upper));
        let mut rows = vec![PlotRow::new("bounds", p, self.bounds.lower, self.bounds.upper, ci(&self.confidence))];
        if let Some(v) = &self.variation_bounds {
            rows.push(PlotRow::new("variation_bounds", p, v.lower, v.upper, None));
        }
        if let Some(d) = &self.dr_bounds {
            rows.push(PlotRow::new("dr_bounds", p, d.lower, d.upper, ci(&self.dr_confidence)));
        }
        rows
    }
}

pub fn run_bounds(ds: &PanelDataset, opts: &BoundsOptions) -> Result<BoundsReport> {
    let post = ds.post_period()?;
    let info = opts.info.build(ds)?;
    let contrast = Contrast::binary();
    let theta = theta_ols(ds, post)?;
    let bias = bias_set(ds, &info, &contrast)?;
    let bounds = gdid_bounds(theta, &bias);
    let variation_bounds = if opts.variation {
        Some(gdid_bounds_labeled(theta, &bias_variation_set(ds, &info, &contrast)?, "theta_ols"))
    } else {
        None
    };
    let dr = opts.dr.as_ref().map(|spec| tau_dr(ds, post, spec)).transpose()?;
    let dr_bounds = dr.map(|d| gdid_bounds_labeled(d.estimate, &bias, "tau_dr"));

    let mut report = BoundsReport {
        post_period: post,
        n_units: ds.n_units(),
        n_rows: ds.len(),
        info_kind: info.kind(),
        theta_ols: theta,
        standard_did: standard_did(ds, post)?,
        bounds,
        variation_bounds,
        tau_dr: dr,
        dr_bounds,
        confidence: None,
        dr_confidence: None,
        bootstrap: None,
    };

    if let Some(plan) = &opts.bootstrap {
        plan.validate()?;
        let dr_spec = opts.dr;
        let draws = bootstrap_estimates(
            ds,
            |s| {
                let th = theta_ols(s, post)?;
                let sbs = info
                    .elements()
                    .iter()
                    .map(|e| selection_bias_at(s, e, &contrast))
                    .collect::<Result<Vec<_>>>()?;
                let mut out: Vec<f64> = sbs.iter().map(|sb| th - sb).collect();
                if let Some(spec) = &dr_spec {
                    let t = tau_dr(s, post, spec)?.estimate;
                    out.extend(sbs.iter().map(|sb| t - sb));
                }
                Ok(out)
            },
            plan,
        )?;
        let points = |center: f64| -> Vec<_> { bias.per_element.iter().map(|e| (e.label.clone(), center - e.value)).collect() };
        report.confidence = Some(union_confidence_bounds(&element_draws(&points(theta), &draws, 0), plan.ci_level)?);
        if let Some(d) = dr {
            let k = info.len();
            report.dr_confidence = Some(union_confidence_bounds(&element_draws(&points(d.estimate), &draws, k), plan.ci_level)?);
        }
        report.bootstrap = Some(BootstrapMeta::new(plan, &draws));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Policy-oriented estimates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoOptions {
    #[serde(default)]
    pub info: InfoSpec,
    #[serde(default = "all_losses")]
    pub losses: Vec<LossKind>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapPlan>,
}

fn all_losses() -> Vec<LossKind> {
    LossKind::ALL.to_vec()
}

impl Default for PoOptions {
    fn default() -> Self {
        PoOptions { info: InfoSpec::default(), losses: all_losses(), bootstrap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCi {
    pub loss: LossKind,
    pub lower: f64,
    pub upper: f64,
}

/// Equal-tailed percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercentileCi {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoReport {
    pub post_period: i64,
    pub theta_ols: f64,
    /// PO estimates answer a decision problem; they carry no causal guarantee.
    pub non_causal: bool,
    pub estimates: Vec<PoEstimate>,
    pub robust_hull: IdentifiedInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<Vec<LossCi>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapMeta>,
}

impl PoReport {
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let p = self.post_period as f64;
        let mut rows = vec![PlotRow::new("robust_hull", p, self.robust_hull.lower, self.robust_hull.upper, None)];
        for (k, e) in self.estimates.iter().enumerate() {
            let ci = self.confidence.as_ref().map(|c| (c[k].lower, c[k].upper));
            rows.push(PlotRow::new(format!("po_{}", e.loss), p, e.estimate, e.estimate, ci));
        }
        rows
    }
}

pub fn run_po(ds: &PanelDataset, opts: &PoOptions) -> Result<PoReport> {
    if opts.losses.is_empty() {
        return Err(Error::InvalidArgument("no loss selected".into()));
    }
    let post = ds.post_period()?;
    let info = opts.info.build(ds)?;
    let contrast = Contrast::binary();
    let theta = theta_ols(ds, post)?;
    let bias = bias_set(ds, &info, &contrast)?;
    let estimates: Vec<PoEstimate> = opts.losses.iter().map(|&l| po_gdid(theta, &bias, l)).collect();
    let mut report = PoReport {
        post_period: post,
        theta_ols: theta,
        non_causal: true,
        estimates,
        robust_hull: robust_po_hull(theta, &bias),
        confidence: None,
        bootstrap: None,
    };
    if let Some(plan) = &opts.bootstrap {
        plan.validate()?;
        let draws = bootstrap_estimates(
            ds,
            |s| {
                let th = theta_ols(s, post)?;
                let b = bias_set(s, &info, &contrast)?;
                Ok(opts.losses.iter().map(|&l| po_gdid(th, &b, l).estimate).collect())
            },
            plan,
        )?;
        report.confidence = Some(
            opts.losses
                .iter()
                .enumerate()
                .map(|(k, &loss)| {
                    let (lower, upper) = percentile_ci(&draws.column(k), plan.ci_level);
                    LossCi { loss, lower, upper }
                })
                .collect(),
        );
        report.bootstrap = Some(BootstrapMeta::new(plan, &draws));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Trend forecast of the post-period bias

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    /// Pre-periods used for the trend; empty means all of them.
    #[serde(default)]
    pub info_periods: Vec<i64>,
    #[serde(default = "one")]
    pub degree: usize,
    /// Defaults to the midpoint of the post-treatment periods.
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapPlan>,
}

fn one() -> usize {
    1
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions { info_periods: Vec::new(), degree: 1, target: None, bootstrap: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub period: i64,
    pub sb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub post_periods: Vec<i64>,
    pub target: f64,
    pub degree: usize,
    pub series: Vec<SeriesPoint>,
    pub sb1_forecast: f64,
    /// Treated-minus-control difference averaged over the post periods.
    pub theta: f64,
    pub estimate: f64,
    pub non_causal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<PercentileCi>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapMeta>,
}

impl ForecastReport {
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let mut rows: Vec<PlotRow> =
            self.series.iter().map(|s| PlotRow::new("sb", s.period as f64, s.sb, s.sb, None)).collect();
        rows.push(PlotRow::new("sb_forecast", self.target, self.sb1_forecast, self.sb1_forecast, None));
        let p = self.post_periods.last().copied().unwrap_or_default() as f64;
        rows.push(PlotRow::new("estimate", p, self.estimate, self.estimate, self.confidence.map(|c| (c.lower, c.upper))));
        rows
    }
}

/// Contrast and post periods for trend forecasts. Multi-period data contrast
/// ever-treated with never-treated units.
fn forecast_contrast(ds: &PanelDataset) -> Result<(Contrast, Vec<i64>)> {
    match ds.scheme() {
        TreatmentScheme::MultiPeriodPaths => {
            let cls = classify_paths(ds, false)?;
            let ever: Vec<bool> = cls.paths.iter().map(|p| !p.is_never()).collect();
            let never: Vec<bool> = ever.iter().map(|e| !e).collect();
            let c = Contrast {
                treated: GroupFilter::units(Arc::new(ever), "ever treated"),
                control: GroupFilter::units(Arc::new(never), "never treated"),
            };
            Ok((c, cls.treatment_periods))
        }
        _ => Ok((Contrast::binary(), vec![ds.post_period()?])),
    }
}

fn forecast_once(
    ds: &PanelDataset,
    contrast: &Contrast,
    periods: &[i64],
    post: &[i64],
    target: f64,
    degree: usize,
) -> Result<(Vec<SeriesPoint>, f64, f64)> {
    let series = periods
        .iter()
        .map(|&p| Ok(SeriesPoint { period: p, sb: contrast.difference(ds, p)? }))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = series.iter().map(|s| (s.period as f64, s.sb)).collect();
    let sb1 = forecast_sb1(&pts, target, degree)?;
    let theta = post.iter().map(|&p| contrast.difference(ds, p)).sum::<Result<f64>>()? / post.len() as f64;
    Ok((series, sb1, theta))
}

pub fn run_forecast(ds: &PanelDataset, opts: &ForecastOptions) -> Result<ForecastReport> {
    let (contrast, post) = forecast_contrast(ds)?;
    let periods = if opts.info_periods.is_empty() { ds.pre_periods() } else { opts.info_periods.clone() };
    // Validates that the periods exist and precede treatment.
    InformationSet::pre_periods(ds, &periods)?;
    let target = match opts.target {
        Some(t) => t,
        None => post_midpoint(&post).ok_or(Error::NoTreatedUnits)?,
    };
    let (series, sb1, theta) = forecast_once(ds, &contrast, &periods, &post, target, opts.degree)?;
    let mut report = ForecastReport {
        post_periods: post.clone(),
        target,
        degree: opts.degree,
        series,
        sb1_forecast: sb1,
        theta,
        estimate: theta - sb1,
        non_causal: true,
        confidence: None,
        bootstrap: None,
    };
    if let Some(plan) = &opts.bootstrap {
        plan.validate()?;
        let draws = bootstrap_estimates(
            ds,
            |s| {
                let (c, _) = forecast_contrast(s)?;
                let (_, sb1, th) = forecast_once(s, &c, &periods, &post, target, opts.degree)?;
                Ok(vec![th - sb1])
            },
            plan,
        )?;
        let (lower, upper) = percentile_ci(&draws.column(0), plan.ci_level);
        report.confidence = Some(PercentileCi { lower, upper });
        report.bootstrap = Some(BootstrapMeta::new(plan, &draws));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Event study

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventStudyOptions {
    /// Baseline pre-periods; empty means all of them.
    #[serde(default)]
    pub info_periods: Vec<i64>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapPlan>,
    /// Fit the saturated two-way fixed effects regression per baseline
    /// (staggered designs only).
    #[serde(default)]
    pub twfe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwfePoint {
    pub baseline: i64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyCell {
    pub group: String,
    pub period: i64,
    pub interval: IdentifiedInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConfidenceBounds>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub twfe: Vec<TwfePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyReport {
    pub staggered: bool,
    pub treatment_periods: Vec<i64>,
    pub info_periods: Vec<i64>,
    pub cells: Vec<EventStudyCell>,
    /// Effect on the ever-treated, weighting periods by treated counts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ever_treated: Option<IdentifiedInterval>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub twfe_fits: Vec<TwfeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapMeta>,
}

impl EventStudyReport {
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        self.cells
            .iter()
            .map(|c| {
                let ci = c.confidence.as_ref().map(|b| (b.lower, b.upper));
                PlotRow::new(c.group.clone(), c.period as f64, c.interval.lower, c.interval.upper, ci)
            })
            .collect()
    }
}

pub fn run_event_study(ds: &PanelDataset, opts: &EventStudyOptions) -> Result<EventStudyReport> {
    if ds.scheme() != TreatmentScheme::MultiPeriodPaths {
        return Err(Error::InvalidArgument("event study needs a multi-period dataset".into()));
    }
    let cls = classify_paths(ds, false)?;
    let periods = if opts.info_periods.is_empty() { ds.pre_periods() } else { opts.info_periods.clone() };
    let info = InformationSet::pre_periods(ds, &periods)?;
    let tp = cls.treatment_periods.clone();
    let (groups, never): (Vec<PathGroup>, PathGroup) = if cls.staggered {
        let g = cls.cohort_codes().into_iter().filter(|c| *c != GroupCode::Never).map(PathGroup::Cohort).collect();
        (g, PathGroup::Cohort(GroupCode::Never))
    } else {
        let mut paths: Vec<TreatmentPath> = cls.path_shares().into_keys().filter(|p| !p.is_never()).collect();
        paths.sort();
        (paths.into_iter().map(PathGroup::Path).collect(), PathGroup::Path(TreatmentPath::never(tp.len())))
    };
    if groups.is_empty() {
        return Err(Error::NoTreatedUnits);
    }
    let label = |g: &PathGroup| match g {
        PathGroup::Cohort(c) => format!("cohort_{c}"),
        PathGroup::Path(p) => format!("path_{p}"),
        other => other.to_string(),
    };

    let mut cells = Vec::with_capacity(groups.len() * tp.len());
    for g in &groups {
        for &t in &tp {
            cells.push(EventStudyCell {
                group: label(g),
                period: t,
                interval: att_bounds_t(ds, g, &never, t, &info)?,
                confidence: None,
                twfe: Vec::new(),
            });
        }
    }

    let mut twfe_fits = Vec::new();
    if opts.twfe {
        if !cls.staggered {
            return Err(Error::InvalidArgument("TWFE event study needs staggered adoption".into()));
        }
        for &b in &periods {
            twfe_fits.push(twfe_fit(ds, b)?);
        }
        for (gi, g) in groups.iter().enumerate() {
            let PathGroup::Cohort(code) = g else { unreachable!("staggered groups are cohorts") };
            for (ti, &t) in tp.iter().enumerate() {
                let cell = &mut cells[gi * tp.len() + ti];
                for f in &twfe_fits {
                    if let Some(est) = f.theta(*code, t) {
                        cell.twfe.push(TwfePoint { baseline: f.baseline_period, estimate: est });
                    }
                }
            }
        }
    }

    let ever_treated = treated_count_weights(ds, &tp).and_then(|w| ever_treated_bounds(ds, &info, &w)).ok();

    let mut report = EventStudyReport {
        staggered: cls.staggered,
        treatment_periods: tp.clone(),
        info_periods: periods,
        cells,
        ever_treated,
        twfe_fits,
        bootstrap: None,
    };

    if let Some(plan) = &opts.bootstrap {
        plan.validate()?;
        let draws = bootstrap_estimates(
            ds,
            |s| {
                let mut out = Vec::with_capacity(groups.len() * tp.len() * info.len());
                for g in &groups {
                    for &t in &tp {
                        let iv = att_bounds_t(s, g, &never, t, &info)?;
                        let b = iv.bias.as_ref().expect("per-period bounds keep their bias set");
                        out.extend(b.per_element.iter().map(|e| iv.point_estimate - e.value));
                    }
                }
                Ok(out)
            },
            plan,
        )?;
        let k = info.len();
        for (ci, cell) in report.cells.iter_mut().enumerate() {
            let b = cell.interval.bias.as_ref().expect("per-period bounds keep their bias set");
            let points: Vec<_> =
                b.per_element.iter().map(|e| (e.label.clone(), cell.interval.point_estimate - e.value)).collect();
            cell.confidence = Some(union_confidence_bounds(&element_draws(&points, &draws, ci * k), plan.ci_level)?);
        }
        report.bootstrap = Some(BootstrapMeta::new(plan, &draws));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Donor-pool bounds and restriction comparisons

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScReport {
    pub post_period: i64,
    pub info_periods: Vec<i64>,
    pub n_donors: usize,
    pub bounds: IdentifiedInterval,
}

pub fn run_sc_bounds(ds: &PanelDataset, info_periods: &[i64]) -> Result<ScReport> {
    let dp = DonorPanel::from_dataset(ds)?;
    let periods = if info_periods.is_empty() { ds.pre_periods() } else { info_periods.to_vec() };
    Ok(ScReport {
        post_period: dp.post_period,
        n_donors: dp.donors.len(),
        bounds: sc_bounds(&dp, &periods)?,
        info_periods: periods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RrComparison {
    pub interval: RrInterval,
    pub report: DiscordancyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RrReport {
    pub sb_minus1: f64,
    pub sb0: f64,
    pub ours: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<RrComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_magnitude: Option<RrComparison>,
    /// True when any requested restriction is disjoint from our hull.
    pub discordant: bool,
}

/// Biases at the two latest pre-periods of a binary dataset.
pub fn latest_two_biases(ds: &PanelDataset) -> Result<(f64, f64)> {
    let pre = ds.pre_periods();
    if pre.len() < 2 {
        return Err(Error::NeedsAtLeastTwoPeriods);
    }
    let c = Contrast::binary();
    Ok((c.difference(ds, pre[pre.len() - 2])?, c.difference(ds, pre[pre.len() - 1])?))
}

pub fn run_compare_rr(sb_minus1: f64, sb0: f64, m: Option<f64>, mbar: Option<f64>) -> Result<RrReport> {
    if m.is_none() && mbar.is_none() {
        return Err(Error::InvalidArgument("give M, Mbar or both".into()));
    }
    let ours = our_sb1_hull(sb_minus1, sb0);
    let compare = |iv: RrInterval| RrComparison { report: discordancy_report(ours, &iv), interval: iv };
    let smoothness = m.map(|m| rr_smoothness_sb1(sb_minus1, sb0, m)).transpose()?.map(compare);
    let relative_magnitude = mbar.map(|mb| rr_relative_magnitude_sb1(sb_minus1, sb0, mb)).transpose()?.map(compare);
    let discordant = smoothness.iter().chain(relative_magnitude.iter()).any(|c| !c.report.overlap);
    Ok(RrReport { sb_minus1, sb0, ours, smoothness, relative_magnitude, discordant })
}

// ---------------------------------------------------------------------------
// Validation summary

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub n_rows: usize,
    pub n_units: usize,
    pub periods: Vec<i64>,
    pub scheme: TreatmentScheme,
    pub balanced: bool,
    pub covariates: Vec<String>,
    pub first_treatment_period: Option<i64>,
    pub pre_periods: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treated_units: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staggered: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapReport>,
}

pub fn run_validate(ds: &PanelDataset, overlap_epsilon: f64) -> Result<ValidationReport> {
    let mut r = ValidationReport {
        valid: true,
        n_rows: ds.len(),
        n_units: ds.n_units(),
        periods: ds.periods().to_vec(),
        scheme: ds.scheme(),
        balanced: ds.is_balanced(),
        covariates: ds.covariate_names().to_vec(),
        first_treatment_period: ds.first_treatment_period(),
        pre_periods: ds.pre_periods(),
        treated_units: None,
        staggered: None,
        overlap: None,
    };
    match ds.scheme() {
        TreatmentScheme::MultiPeriodPaths => {
            let cls = classify_paths(ds, false)?;
            r.staggered = Some(cls.staggered);
            r.treated_units = Some(cls.paths.iter().filter(|p| !p.is_never()).count());
        }
        _ => {
            let codes = ds.unit_treatment().expect("constant treatment");
            r.treated_units = Some(codes.iter().filter(|&&c| c == 1).count());
            if ds.n_covariates() > 0 {
                r.overlap = Some(overlap_check(ds, ds.post_period()?, overlap_epsilon));
            }
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Monte Carlo with analytic truths

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McEstimator {
    /// Bias-set bounds on the post period (single-post families).
    Bounds,
    StandardDid,
    /// Per-period bounds `D_t = 1` against `D_t = 0` (multi-period families).
    AttBounds,
    /// Saturated TWFE `θ^g_s` with baseline 0 (staggered family).
    Twfe,
}

impl std::str::FromStr for McEstimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounds" => Ok(McEstimator::Bounds),
            "standard_did" => Ok(McEstimator::StandardDid),
            "att_bounds" => Ok(McEstimator::AttBounds),
            "twfe" => Ok(McEstimator::Twfe),
            _ => Err(Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McRun {
    pub spec: DgpSpec,
    pub estimator: McEstimator,
    pub seed: u64,
    pub target_labels: Vec<String>,
    pub report: McReport,
    /// Share of replications whose union CI contains the true set (bounds
    /// with a bootstrap only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapPlan>,
}

fn single_post_family(f: DgpFamily) -> bool {
    !matches!(
        f,
        DgpFamily::MultiPtHolds
            | DgpFamily::MultiPtViolated
            | DgpFamily::StaggeredMc
            | DgpFamily::CovariateStatic
            | DgpFamily::CovariateTimevarying
    )
}

pub fn run_mc(spec: &DgpSpec, reps: usize, seed: u64, estimator: McEstimator, bootstrap: Option<BootstrapPlan>) -> Result<McRun> {
    spec.validate()?;
    let truth = analytic_truth(spec);
    let family = spec.family;
    let unsupported = || Error::InvalidArgument(format!("estimator {estimator:?} does not apply to {family}"));
    let info_periods = family.info_periods();
    let (labels, truths): (Vec<String>, Vec<f64>) = match estimator {
        McEstimator::Bounds => {
            if !single_post_family(family) {
                return Err(unsupported());
            }
            let (lo, hi) = truth.identified_set[&1];
            let mut l = vec![("lower".to_string(), lo), ("upper".to_string(), hi)];
            if bootstrap.is_some() {
                l.push(("ci_lower".into(), lo));
                l.push(("ci_upper".into(), hi));
            }
            l.into_iter().unzip()
        }
        McEstimator::StandardDid => {
            if !single_post_family(family) {
                return Err(unsupported());
            }
            (vec!["standard_did".into()], vec![truth.theta_ols[&1] - truth.sb[&0]])
        }
        McEstimator::AttBounds => {
            if !matches!(family, DgpFamily::MultiPtHolds | DgpFamily::MultiPtViolated) {
                return Err(unsupported());
            }
            let mut l = Vec::new();
            for (t, (lo, hi)) in &truth.identified_set {
                l.push((format!("lower_{t}"), *lo));
                l.push((format!("upper_{t}"), *hi));
            }
            l.into_iter().unzip()
        }
        McEstimator::Twfe => {
            if family != DgpFamily::StaggeredMc {
                return Err(unsupported());
            }
            let mut l = Vec::new();
            for (g, eff) in &truth.cohort_effects {
                for s in 1..=spec.horizon() {
                    l.push((format!("theta_{g}_{s}"), *eff));
                }
            }
            l.into_iter().unzip()
        }
    };
    if let Some(plan) = &bootstrap {
        plan.validate()?;
        if estimator != McEstimator::Bounds {
            return Err(Error::InvalidArgument("bootstrap coverage is only available for bounds".into()));
        }
    }
    let horizon = spec.horizon();
    let report = monte_carlo(
        spec,
        reps,
        seed,
        |ds| match estimator {
            McEstimator::Bounds => {
                let opts = BoundsOptions { info: InfoSpec::periods(&info_periods), bootstrap, ..Default::default() };
                let r = run_bounds(ds, &opts)?;
                let mut out = vec![r.bounds.lower, r.bounds.upper];
                if let Some(c) = r.confidence {
                    out.extend([c.lower, c.upper]);
                }
                Ok(out)
            }
            McEstimator::StandardDid => Ok(vec![standard_did(ds, ds.post_period()?)?]),
            McEstimator::AttBounds => {
                let info = InformationSet::pre_periods(ds, &info_periods)?;
                let mut out = Vec::new();
                for t in 1..=horizon {
                    let iv = att_bounds_t(
                        ds,
                        &PathGroup::StatusAt { period: t, treated: true },
                        &PathGroup::StatusAt { period: t, treated: false },
                        t,
                        &info,
                    )?;
                    out.extend([iv.lower, iv.upper]);
                }
                Ok(out)
            }
            McEstimator::Twfe => {
                let fit = twfe_fit(ds, 0)?;
                let mut out = Vec::new();
                for g in 1..=horizon {
                    for s in 1..=horizon {
                        out.push(fit.theta(GroupCode::Cohort(g), s).ok_or(Error::NoTreatedUnits)?);
                    }
                }
                Ok(out)
            }
        },
        &truths,
    )?;
    let coverage = bootstrap.map(|_| {
        let (lo, hi) = truth.identified_set[&1];
        let cis: Vec<(f64, f64)> = report.estimates.iter().map(|v| (v[2], v[3])).collect();
        interval_coverage(&cis, Truth::Set(lo, hi))
    });
    Ok(McRun { spec: spec.clone(), estimator, seed, target_labels: labels, report, coverage, bootstrap })
}
