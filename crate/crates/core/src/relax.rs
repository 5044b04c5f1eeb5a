//! Donor-pool bounds and comparisons with smoothness and
//! relative-magnitude restrictions on the post-period bias.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gdid::{gdid_bounds_labeled, IdentifiedInterval};
use crate::panel::{InfoLabel, PanelDataset, TreatmentScheme};
use crate::selection_bias::BiasSet;

/// Treated series and donor series on a shared period grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DonorPanel {
    pub treated: BTreeMap<i64, f64>,
    pub donors: Vec<(String, BTreeMap<i64, f64>)>,
    pub post_period: i64,
}

impl DonorPanel {
    /// Treated units (averaged per period) against each control unit as
    /// its own donor.
    pub fn from_dataset(ds: &PanelDataset) -> Result<Self> {
        if ds.scheme() == TreatmentScheme::MultiPeriodPaths {
            return Err(Error::InvalidArgument("donor bounds need a donor-pool or binary dataset".into()));
        }
        let post = ds.post_period()?;
        let codes = ds.unit_treatment().expect("constant treatment");
        let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        let mut donors: Vec<BTreeMap<i64, f64>> = vec![BTreeMap::new(); ds.n_units()];
        for r in ds.rows() {
            if codes[r.unit_index] == 1 {
                let e = sums.entry(r.period).or_default();
                e.0 += r.outcome;
                e.1 += 1;
            } else {
                donors[r.unit_index].insert(r.period, r.outcome);
            }
        }
        if sums.is_empty() {
            return Err(Error::NoTreatedUnits);
        }
        let treated = sums.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect();
        let donors = donors
            .into_iter()
            .enumerate()
            .filter(|(u, _)| codes[*u] == 0)
            .map(|(u, s)| (ds.unit_ids()[u].clone(), s))
            .collect();
        Ok(DonorPanel { treated, donors, post_period: post })
    }
}

/// Worst case over donors: `[min_j θ^j − max_{ι,j} SB^j(ι), max_j θ^j − min_{ι,j} SB^j(ι)]`.
pub fn sc_bounds(dp: &DonorPanel, info_periods: &[i64]) -> Result<IdentifiedInterval> {
    if dp.donors.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    if info_periods.is_empty() {
        return Err(Error::InvalidInformationSet("no pre-periods".into()));
    }
    let treated_at = |p: i64| dp.treated.get(&p).copied().ok_or(Error::MissingPeriod(p));
    let y1 = treated_at(dp.post_period)?;
    let mut thetas = Vec::with_capacity(dp.donors.len());
    let mut biases = Vec::new();
    for (name, series) in &dp.donors {
        let at = |p: i64| series.get(&p).copied().ok_or(Error::MissingPeriod(p));
        thetas.push(y1 - at(dp.post_period)?);
        for &p in info_periods {
            biases.push((InfoLabel::Text(format!("{name}@{p}")), treated_at(p)? - at(p)?, 1.0));
        }
    }
    let bias = BiasSet::from_values(biases)?;
    let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut iv = gdid_bounds_labeled(thetas.iter().sum::<f64>() / thetas.len() as f64, &bias, "donor_mean_theta_ols");
    iv.lower = lo - bias.upper;
    iv.upper = hi - bias.lower;
    Ok(iv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RrRestriction {
    Smoothness { m: f64 },
    RelativeMagnitude { mbar: f64 },
}

/// Interval for the post-period bias implied by a restriction on
/// `{SB_{-1}, SB_0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RrInterval {
    pub restriction: RrRestriction,
    pub sb_minus1: f64,
    pub sb0: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Slope of the bias changes by at most `M` per period.
pub fn rr_smoothness_sb1(sb_minus1: f64, sb0: f64, m: f64) -> Result<RrInterval> {
    if !(m >= 0.0) {
        return Err(Error::NegativeM(m));
    }
    let centre = 2.0 * sb0 - sb_minus1;
    Ok(RrInterval { restriction: RrRestriction::Smoothness { m }, sb_minus1, sb0, lo: centre - m, hi: centre + m })
}

/// Post-period deviation at most `M̄` times the pre-period change.
pub fn rr_relative_magnitude_sb1(sb_minus1: f64, sb0: f64, mbar: f64) -> Result<RrInterval> {
    if !(mbar >= 0.0) {
        return Err(Error::NegativeM(mbar));
    }
    let r = mbar * (sb_minus1 - sb0).abs();
    Ok(RrInterval { restriction: RrRestriction::RelativeMagnitude { mbar }, sb_minus1, sb0, lo: sb0 - r, hi: sb0 + r })
}

/// Bias-set hull `[min, max]{SB_{-1}, SB_0}`.
pub fn our_sb1_hull(sb_minus1: f64, sb0: f64) -> (f64, f64) {
    (sb_minus1.min(sb0), sb_minus1.max(sb0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscordancyReport {
    pub ours: (f64, f64),
    pub rr: (f64, f64),
    pub overlap: bool,
    pub intersection: Option<(f64, f64)>,
    pub ours_contained_in_rr: bool,
    pub rr_contained_in_ours: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Intersection of our hull with a restriction's interval. Overlap and
/// containment use their closed forms in `|SB_0 − SB_{-1}|` so that the
/// crossover points are exact rather than subject to rounding.
pub fn discordancy_report(ours: (f64, f64), rr: &RrInterval) -> DiscordancyReport {
    let (lo, hi) = (ours.0.max(rr.lo), ours.1.min(rr.hi));
    let (overlap, warning) = match rr.restriction {
        RrRestriction::Smoothness { m } => {
            let gap = (rr.sb0 - rr.sb_minus1).abs();
            if m < gap {
                (
                    false,
                    Some(format!(
                        "smoothness bound M = {m} is below |SB_0 - SB_-1| = {gap}; the two identified sets are disjoint. \
                         Avoid smoothness restrictions with M smaller than the observed pre-period change."
                    )),
                )
            } else {
                (true, None)
            }
        }
        RrRestriction::RelativeMagnitude { .. } => (true, None),
    };
    let intersection = overlap.then(|| if lo <= hi { (lo, hi) } else { let c = 0.5 * (lo + hi); (c, c) });
    let gap = (rr.sb0 - rr.sb_minus1).abs();
    // The restriction's interval is centred at 2·SB_0 − SB_{-1} (smoothness)
    // or SB_0 (relative magnitude), so only a zero radius fits inside ours.
    let (ours_contained_in_rr, rr_contained_in_ours) = match rr.restriction {
        RrRestriction::Smoothness { m } => (m >= 2.0 * gap, gap == 0.0 && m == 0.0),
        RrRestriction::RelativeMagnitude { mbar } => (mbar >= 1.0 || gap == 0.0, mbar == 0.0 || gap == 0.0),
    };
    DiscordancyReport { ours, rr: (rr.lo, rr.hi), overlap, intersection, ours_contained_in_rr, rr_contained_in_ours, warning }
}
