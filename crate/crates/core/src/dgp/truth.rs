use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use super::{DgpFamily, DgpSpec};
use crate::numerics::normal;

/// Truncated standard-normal means: `E[U | U ≥ c]` and `E[U | U < c]`.
pub fn mills_alpha(c: f64) -> (f64, f64) {
    let phi = normal::pdf(c);
    (phi / normal::sf(c), -phi / normal::cdf(c))
}

/// `α₁(c) − α₀(c) = φ(c) / (Φ(c)(1 − Φ(c)))`.
pub fn mills_gap(c: f64) -> f64 {
    let (a1, a0) = mills_alpha(c);
    a1 - a0
}

/// Closed-form quantities of a design. Maps are keyed by period.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct AnalyticTruth {
    /// Selection bias `SB_t` (every period for single-post designs, the
    /// treatment periods otherwise).
    pub sb: BTreeMap<i64, f64>,
    pub att: BTreeMap<i64, f64>,
    pub theta_ols: BTreeMap<i64, f64>,
    /// Hull of baseline biases behind each identified set.
    pub bias_hull: BTreeMap<i64, (f64, f64)>,
    pub identified_set: BTreeMap<i64, (f64, f64)>,
    pub pt_holds: bool,
    pub info_periods: Vec<i64>,
    /// Baseline biases `SB^t_ι` by treatment period then baseline period.
    pub baseline_sb: BTreeMap<i64, BTreeMap<i64, f64>>,
    /// Staggered designs: effect on cohort `g`, the same in every period.
    pub cohort_effects: BTreeMap<i64, f64>,
    /// Bias-variation hull on the post-period bias, where defined.
    pub variation_hull: Option<(f64, f64)>,
}

fn hull(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Single post period at `t = 1` with bias path `sb(t)` and a constant
/// effect `att`.
fn single_post(spec: &DgpSpec, sb: impl Fn(i64) -> f64, att: f64, pt_holds: bool) -> AnalyticTruth {
    let info = spec.family.info_periods();
    let mut t = AnalyticTruth { info_periods: info.clone(), pt_holds, ..Default::default() };
    for p in spec.periods() {
        t.sb.insert(p, sb(p));
    }
    let theta = att + sb(1);
    let h = hull(info.iter().map(|&p| sb(p)));
    t.att.insert(1, att);
    t.theta_ols.insert(1, theta);
    t.bias_hull.insert(1, h);
    t.identified_set.insert(1, (theta - h.1, theta - h.0));
    let deltas: Vec<f64> = info.windows(2).map(|w| sb(w[1]) - sb(w[0])).collect();
    if !deltas.is_empty() {
        let d = hull(deltas);
        let anchor = sb(*info.last().expect("nonempty"));
        t.variation_hull = Some((anchor + d.0, anchor + d.1));
    }
    t
}

pub fn analytic_truth(spec: &DgpSpec) -> AnalyticTruth {
    let f = spec.family;
    match f {
        DgpFamily::SpuriousPt => {
            let d = mills_gap(spec.param("c"));
            single_post(spec, |_| d, spec.param("theta"), true)
        }
        DgpFamily::Ashenfelter => {
            let d = mills_gap(spec.param("c"));
            single_post(spec, |t| (1 + t.abs() + t * t) as f64 * d, spec.param("theta"), false)
        }
        DgpFamily::BiasVariationLinear => {
            let d = mills_gap(spec.param("c"));
            single_post(spec, |t| t as f64 * d, spec.param("theta"), false)
        }
        DgpFamily::BiasVariationSawtooth => {
            let d = mills_gap(spec.param("c"));
            let sign = |t: i64| if t.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            single_post(spec, |t| (0.75 * sign(t) - (t - 2) as f64) * d, spec.param("theta"), false)
        }
        DgpFamily::BiasVariationCosine => {
            let d = mills_gap(spec.param("c"));
            single_post(spec, |t| (PI * t as f64).cos().round() * d, spec.param("theta"), false)
        }
        DgpFamily::FactorStructure => {
            // U + V ~ N(0, 2): both U and V shift by κ between the groups.
            let c = spec.param("c") * FRAC_1_SQRT_2;
            let kappa = FRAC_1_SQRT_2 * mills_gap(c);
            single_post(spec, |t| (2 + t * t) as f64 * kappa, spec.param("theta"), false)
        }
        DgpFamily::CovariateStatic | DgpFamily::CovariateTimevarying => {
            // SB_t(x) = (1 + s_t x) Δ; baseline support x ∈ [0, 1].
            let d = mills_gap(spec.param("c"));
            let theta = spec.param("theta");
            let mean_x1 = if f == DgpFamily::CovariateStatic { 0.5 } else { 0.25 };
            let loading1 = if f == DgpFamily::CovariateStatic { 0.5 * 0.5 } else { 0.25 };
            let att = theta * mean_x1;
            let sb1 = (1.0 + loading1) * d;
            let theta_ols = att + sb1;
            let h = (d, 2.0 * d);
            let mut t = AnalyticTruth { info_periods: vec![0], ..Default::default() };
            t.sb.insert(0, 1.5 * d);
            t.sb.insert(1, sb1);
            t.att.insert(1, att);
            t.theta_ols.insert(1, theta_ols);
            t.bias_hull.insert(1, h);
            t.identified_set.insert(1, (theta_ols - h.1, theta_ols - h.0));
            t
        }
        DgpFamily::MultiPtHolds => {
            // U ~ U[0, 2]: E[U | U ≥ c] − E[U | U < c] = 1 for every c.
            let big_t = spec.horizon();
            let mut t = AnalyticTruth { info_periods: vec![0], pt_holds: true, ..Default::default() };
            for s in 1..=big_t {
                let att = (1 + s * s) as f64 / 2.0;
                t.sb.insert(s, 1.0);
                t.att.insert(s, att);
                t.theta_ols.insert(s, att + 1.0);
                t.baseline_sb.insert(s, BTreeMap::from([(0, 1.0)]));
                t.bias_hull.insert(s, (1.0, 1.0));
                t.identified_set.insert(s, (att, att));
            }
            t
        }
        DgpFamily::MultiPtViolated => {
            let big_t = spec.horizon();
            let rho = spec.param("rho");
            let info = f.info_periods();
            let mut t = AnalyticTruth { info_periods: info.clone(), ..Default::default() };
            for s in 1..=big_t {
                let k = mills_gap(-(s as f64) / big_t as f64);
                let sb = (s.abs() - 1) as f64 * k;
                let att = (4 + s * s) as f64 / 2.0;
                let base: BTreeMap<i64, f64> = info
                    .iter()
                    .map(|&i| (i, rho.powi((s - i) as i32) * (i.abs() - 1) as f64 * k))
                    .collect();
                let h = hull(base.values().copied());
                let theta = att + sb;
                t.sb.insert(s, sb);
                t.att.insert(s, att);
                t.theta_ols.insert(s, theta);
                t.bias_hull.insert(s, h);
                t.identified_set.insert(s, (theta - h.1, theta - h.0));
                t.baseline_sb.insert(s, base);
            }
            t
        }
        DgpFamily::StaggeredMc => {
            let big_t = spec.horizon();
            let mut t = AnalyticTruth { info_periods: vec![0], pt_holds: true, ..Default::default() };
            for g in 1..=big_t {
                let effect: f64 = (g..=big_t).map(|s| (1 + s * s) as f64 / 2.0).sum();
                t.cohort_effects.insert(g, effect);
            }
            t
        }
    }
}
