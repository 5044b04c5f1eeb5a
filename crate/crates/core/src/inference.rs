//! Cluster bootstrap and union confidence bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{InfoLabel, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleLevel {
    /// Draw whole units (all their periods) with replacement.
    Unit,
    /// Draw rows independently; only for pure cross-sections.
    Row,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub seed: u64,
    pub resample: ResampleLevel,
    pub ci_level: f64,
}

impl BootstrapPlan {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapPlan { replicates, seed, resample: ResampleLevel::Unit, ci_level: 0.95 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidArgument("need at least 2 bootstrap replicates".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidArgument(format!("ci level {} not in (0,1)", self.ci_level)));
        }
        Ok(())
    }
}

/// Share of failed replicates above which the bootstrap is abandoned.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Successful replicates (one row per replicate, in replicate order).
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub estimates: Vec<Vec<f64>>,
    pub failed: usize,
    pub total: usize,
}

impl BootstrapDraws {
    /// Replicate values of estimand `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.estimates.iter().map(|r| r[k]).collect()
    }
}

/// Resampled dataset for replicate `rep`.
pub fn resample(ds: &PanelDataset, plan: &BootstrapPlan, rep: usize) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(rep as u64);
    match plan.resample {
        ResampleLevel::Unit => {
            let n = ds.n_units();
            let draws: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            ds.resample_units(&draws)
        }
        ResampleLevel::Row => {
            let n = ds.len();
            let draws: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            ds.resample_rows(&draws)
        }
    }
}

/// Runs `estimator` on `plan.replicates` resamples in parallel. Replicates
/// whose estimator fails (or returns non-finite values) are dropped and
/// counted.
pub fn bootstrap_estimates<F>(ds: &PanelDataset, estimator: F, plan: &BootstrapPlan) -> Result<BootstrapDraws>
where
    F: Fn(&PanelDataset) -> Result<Vec<f64>> + Sync,
{
    plan.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<Option<Vec<f64>>> = (0..plan.replicates)
        .into_par_iter()
        .map(|rep| {
            let sample = resample(ds, plan, rep);
            estimator(&sample).ok().filter(|v| v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let total = results.len();
    let estimates: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let failed = total - estimates.len();
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailedReplicates { failed, total });
    }
    if let Some(first) = estimates.first() {
        if estimates.iter().any(|r| r.len() != first.len()) {
            return Err(Error::DimensionMismatch("estimator returned varying lengths".into()));
        }
    }
    Ok(BootstrapDraws { estimates, failed, total })
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval.
pub fn percentile_ci(draws: &[f64], level: f64) -> (f64, f64) {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementCi {
    pub label: InfoLabel,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceBounds {
    pub lower: f64,
    pub upper: f64,
    pub per_element_cis: Vec<ElementCi>,
    pub level: f64,
}

/// One element's point estimate and its bootstrap draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementDraws {
    pub label: InfoLabel,
    pub estimate: f64,
    pub draws: Vec<f64>,
}

/// Hull of per-element percentile intervals.
pub fn union_confidence_bounds(per_element: &[ElementDraws], level: f64) -> Result<ConfidenceBounds> {
    if per_element.is_empty() {
        return Err(Error::InvalidArgument("no elements".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("ci level {level} not in (0,1)")));
    }
    let mut cis = Vec::with_capacity(per_element.len());
    for e in per_element {
        if e.draws.len() < 2 {
            return Err(Error::InsufficientReplicates(e.label.to_string()));
        }
        let (lo, hi) = percentile_ci(&e.draws, level);
        cis.push(ElementCi {
            label: e.label.clone(),
            estimate: e.estimate,
            lo,
            hi,
            n_replicates: e.draws.len(),
        });
    }
    let lower = cis.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
    let upper = cis.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
    Ok(ConfidenceBounds { lower, upper, per_element_cis: cis, level })
}
