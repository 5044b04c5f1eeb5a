use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::panel::PanelDataset;

/// Seed of replication `rep` (splitmix64 on the pair), so any subset of
/// replications can be rerun alone.
pub fn derive_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McTarget {
    pub index: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Mean absolute deviation from the truth.
    pub mae: f64,
    /// Standard error of `mean`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub reps: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Failure counts by error name.
    pub failures: BTreeMap<String, usize>,
    pub targets: Vec<McTarget>,
    /// Estimates of the successful replications, in replication order.
    #[serde(skip)]
    pub estimates: Vec<Vec<f64>>,
}

/// Runs `estimator` on `reps` datasets drawn from `spec` with seeds
/// `derive_seed(seed, rep)`. `truths[k]` is the target of output `k`.
/// Replications run in parallel; results do not depend on the thread count.
pub fn monte_carlo<F>(spec: &DgpSpec, reps: usize, seed: u64, estimator: F, truths: &[f64]) -> Result<McReport>
where
    F: Fn(&PanelDataset) -> Result<Vec<f64>> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    spec.validate()?;
    let outcomes: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut s = spec.clone();
            s.seed = derive_seed(seed, rep as u64);
            let ds = simulate(&s)?;
            let est = estimator(&ds)?;
            if est.len() != truths.len() {
                return Err(Error::DimensionMismatch(format!(
                    "estimator returned {} values for {} targets",
                    est.len(),
                    truths.len()
                )));
            }
            Ok(est)
        })
        .collect();

    let mut failures = BTreeMap::new();
    let mut estimates = Vec::with_capacity(reps);
    for r in outcomes {
        match r {
            Ok(v) if v.iter().all(|x| x.is_finite()) => estimates.push(v),
            Ok(_) => *failures.entry("NonFinite".to_string()).or_insert(0) += 1,
            Err(Error::DimensionMismatch(m)) => return Err(Error::DimensionMismatch(m)),
            Err(e) => *failures.entry(e.name().to_string()).or_insert(0) += 1,
        }
    }
    let failed = reps - estimates.len();
    if estimates.is_empty() {
        return Err(Error::TooManyFailedReplicates { failed, total: reps });
    }
    let m = estimates.len() as f64;
    let targets = truths
        .iter()
        .enumerate()
        .map(|(k, &truth)| {
            let col = estimates.iter().map(|v| v[k]);
            let mean = col.clone().sum::<f64>() / m;
            let var = if estimates.len() > 1 {
                col.clone().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            let mse = col.clone().map(|x| (x - truth).powi(2)).sum::<f64>() / m;
            let mae = col.map(|x| (x - truth).abs()).sum::<f64>() / m;
            McTarget {
                index: k,
                truth,
                mean,
                bias: mean - truth,
                sd: var.sqrt(),
                rmse: mse.sqrt(),
                mae,
                mc_se: (var / m).sqrt(),
            }
        })
        .collect();
    Ok(McReport { reps, succeeded: estimates.len(), failed, failures, targets, estimates })
}

/// What an interval is meant to cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    Point(f64),
    /// Covered only when the whole set lies inside the interval.
    Set(f64, f64),
}

/// Share of `intervals` covering `truth`.
pub fn interval_coverage(intervals: &[(f64, f64)], truth: Truth) -> f64 {
    if intervals.is_empty() {
        return f64::NAN;
    }
    let (lo, hi) = match truth {
        Truth::Point(v) => (v, v),
        Truth::Set(a, b) => (a, b),
    };
    let hits = intervals.iter().filter(|(l, u)| *l <= lo && hi <= *u).count();
    hits as f64 / intervals.len() as f64
}
