//! Shared data generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robust_did::panel::{Observation, PanelDataset, TreatmentScheme};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn obs(unit: &str, period: i64, outcome: f64, treated: i64, covariates: Vec<f64>) -> Observation {
    Observation { unit_id: unit.to_string(), period, outcome, treated, covariates }
}

/// Balanced binary panel over `periods` (last one is post) with `n_treated`
/// and `n_control` units and arbitrary group/period shifts.
pub fn random_binary_panel(seed: u64, periods: &[i64], n_treated: usize, n_control: usize) -> PanelDataset {
    let mut r = rng(seed);
    let shifts: Vec<f64> = periods.iter().map(|_| r.random_range(-5.0..5.0)).collect();
    let mut rows = Vec::new();
    for u in 0..n_treated + n_control {
        let d = i64::from(u < n_treated);
        let level: f64 = r.random_range(-2.0..2.0);
        for (k, &p) in periods.iter().enumerate() {
            let noise: f64 = r.sample(StandardNormal);
            let y = level + d as f64 * shifts[k] + noise;
            rows.push(obs(&format!("u{u}"), p, y, d, vec![]));
        }
    }
    PanelDataset::from_observations(rows, vec![], Some(TreatmentScheme::BinarySinglePost)).unwrap()
}

/// Brute-force mean of outcomes in `period` among units with treatment `d`.
pub fn cell_mean(ds: &PanelDataset, period: i64, d: i64) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for r in ds.rows() {
        if r.period == period && r.treated == d {
            s += r.outcome;
            n += 1;
        }
    }
    s / n as f64
}

/// `ȳ_treated − ȳ_control` in `period`, straight from the rows.
pub fn naive_diff(ds: &PanelDataset, period: i64) -> f64 {
    cell_mean(ds, period, 1) - cell_mean(ds, period, 0)
}

/// Cross-section with one discrete covariate taking `levels` values; two
/// periods so the panel is a valid binary design.
pub fn discrete_x_panel(seed: u64, n: usize, levels: i64) -> PanelDataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    for u in 0..n {
        let x = r.random_range(0..levels);
        // Every level gets both groups.
        let d = if u < 2 * levels as usize { (u % 2) as i64 } else { i64::from(r.random::<f64>() < 0.2 + 0.15 * x as f64) };
        let x = if u < 2 * levels as usize { (u / 2) as i64 % levels } else { x };
        let y0: f64 = r.sample::<f64, _>(StandardNormal) + x as f64;
        let y1: f64 = r.sample::<f64, _>(StandardNormal) + 2.0 * x as f64 * x as f64 + 3.0 * d as f64 * (1 + x) as f64;
        rows.push(obs(&format!("u{u}"), 0, y0, d, vec![x as f64]));
        rows.push(obs(&format!("u{u}"), 1, y1, d, vec![x as f64]));
    }
    PanelDataset::from_observations(rows, vec!["x".into()], Some(TreatmentScheme::BinarySinglePost)).unwrap()
}

/// `Σ_x θ_OLS(x) P̂(x | D = 1)` in `period` by direct tabulation.
pub fn cellwise_att(ds: &PanelDataset, period: i64) -> f64 {
    let mut cells: BTreeMap<i64, [(f64, usize); 2]> = BTreeMap::new();
    for r in ds.rows().filter(|r| r.period == period) {
        let e = &mut cells.entry(r.covariates[0] as i64).or_default()[r.treated as usize];
        e.0 += r.outcome;
        e.1 += 1;
    }
    let n1: usize = cells.values().map(|c| c[1].1).sum();
    cells
        .values()
        .filter(|c| c[1].1 > 0)
        .map(|c| (c[1].0 / c[1].1 as f64 - c[0].0 / c[0].1 as f64) * c[1].1 as f64 / n1 as f64)
        .sum()
}

/// Logistic selection on `X ~ N(0,1)` with a quadratic untreated outcome:
/// `Y₁ = 1 + X + X² + θD + ε`. The cell-weighted ATT is `θ`.
pub fn dr_panel(seed: u64, n: usize, theta: f64) -> PanelDataset {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(2 * n);
    for u in 0..n {
        let x: f64 = r.sample(StandardNormal);
        let p = 1.0 / (1.0 + (-(0.0 + 1.0 * x)).exp());
        let d = i64::from(r.random::<f64>() < p);
        let e0: f64 = r.sample(StandardNormal);
        let e1: f64 = r.sample(StandardNormal);
        let id = format!("u{u}");
        rows.push(obs(&id, 0, x + e0, d, vec![x]));
        rows.push(obs(&id, 1, 1.0 + x + x * x + theta * d as f64 + e1, d, vec![x]));
    }
    PanelDataset::from_observations(rows, vec!["x".into()], Some(TreatmentScheme::BinarySinglePost)).unwrap()
}

/// Balanced staggered panel over periods `0..=t_max` with random cohorts
/// (always including never-treated units and every cohort).
pub fn random_staggered_panel(seed: u64, t_max: i64, n: usize) -> PanelDataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    for u in 0..n {
        // cohort 0 means never treated
        let g = if (u as i64) <= t_max { u as i64 } else { r.random_range(0..=t_max) };
        let a: f64 = r.random_range(-3.0..3.0);
        for t in 0..=t_max {
            let d = i64::from(g > 0 && t >= g);
            let y = a + 0.3 * t as f64 + d as f64 * (g as f64 + t as f64) + r.sample::<f64, _>(StandardNormal);
            rows.push(obs(&format!("u{u}"), t, y, d, vec![]));
        }
    }
    PanelDataset::from_observations(rows, vec![], Some(TreatmentScheme::MultiPeriodPaths)).unwrap()
}

/// Mean outcome in `period` over units whose first treated period is `g`
/// (`None` for never treated), read directly from the rows.
pub fn cohort_mean(ds: &PanelDataset, g: Option<i64>, period: i64) -> f64 {
    let mut first: BTreeMap<usize, Option<i64>> = BTreeMap::new();
    for r in ds.rows() {
        let e = first.entry(r.unit_index).or_insert(None);
        if r.treated == 1 && e.is_none_or(|p| r.period < p) {
            *e = Some(r.period);
        }
    }
    let (mut s, mut n) = (0.0, 0usize);
    for r in ds.rows().filter(|r| r.period == period) {
        if first[&r.unit_index] == g {
            s += r.outcome;
            n += 1;
        }
    }
    s / n as f64
}

/// Standard normal cdf by composite Simpson integration of the density,
/// independent of the library's erfc-based implementation.
pub fn simpson_cdf(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, n) = (0.0, 20_000usize);
    let h = (x - a) / n as f64;
    let mut s = pdf(a) + pdf(x);
    for k in 1..n {
        s += pdf(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

/// `(E[U | U ≥ c], E[U | U < c])` for standard normal `U`, via Simpson.
pub fn oracle_mills(c: f64) -> (f64, f64) {
    let phi = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = simpson_cdf(c);
    (phi / (1.0 - cdf), -phi / cdf)
}
