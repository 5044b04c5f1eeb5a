mod common;

use common::random_binary_panel;
use proptest::prelude::*;
use robust_did::analysis::{run_forecast, run_po, ForecastOptions, PoOptions};
use robust_did::gdid::gdid_bounds;
use robust_did::panel::InfoLabel;
use robust_did::po::{forecast_sb1, optimal_sb1, po_gdid, robust_po_hull, weighted_median, LossKind};
use robust_did::selection_bias::BiasSet;

fn set(vals: &[(f64, f64)]) -> BiasSet {
    BiasSet::from_values(vals.iter().enumerate().map(|(k, &(v, w))| (InfoLabel::Int(k as i64), v, w))).unwrap()
}

/// Expected loss of choosing `s` under the weighted elements.
fn risk(c: &[(f64, f64)], s: f64, loss: LossKind) -> f64 {
    match loss {
        LossKind::L1 => c.iter().map(|(v, w)| w * (v - s).abs()).sum(),
        LossKind::L2 => c.iter().map(|(v, w)| w * (v - s).powi(2)).sum(),
        LossKind::Linf => c.iter().filter(|x| x.1 > 0.0).map(|(v, _)| (v - s).abs()).fold(0.0, f64::max),
    }
}

#[test]
fn median_midpoint_on_exact_tie() {
    assert_eq!(weighted_median(&[(1.0, 0.5), (3.0, 0.5)]), 2.0);
    assert_eq!(weighted_median(&[(1.0, 0.2), (3.0, 0.5), (9.0, 0.3)]), 3.0);
    assert_eq!(weighted_median(&[(5.0, 1.0)]), 5.0);
}

#[test]
fn linf_is_midpoint_of_extremes() {
    let b = set(&[(-1.0, 0.9), (0.5, 0.05), (4.0, 0.05)]);
    let e = po_gdid(10.0, &b, LossKind::Linf);
    assert!((e.estimate - (10.0 - 1.5)).abs() < 1e-12);
    assert!(e.non_causal);
}

#[test]
fn report_hull_equals_bounds() {
    let ds = random_binary_panel(21, &[-2, -1, 0, 1], 8, 8);
    let rep = run_po(&ds, &PoOptions::default()).unwrap();
    assert_eq!(rep.estimates.len(), 3);
    for e in &rep.estimates {
        assert!(rep.robust_hull.contains(e.estimate, 1e-12));
    }
}

#[test]
fn linear_trend_forecast_is_exact_on_lines() {
    let series = [(-3.0, 7.0), (-2.0, 5.0), (-1.0, 3.0), (0.0, 1.0)];
    assert!((forecast_sb1(&series, 1.0, 1).unwrap() - (-1.0)).abs() < 1e-10);
    let quad: Vec<(f64, f64)> = (-4..=0).map(|t| (t as f64, 1.0 + (t * t) as f64)).collect();
    assert!((forecast_sb1(&quad, 1.0, 2).unwrap() - 2.0).abs() < 1e-9);
    assert!(forecast_sb1(&series[..1], 1.0, 1).is_err());
    assert!(forecast_sb1(&series, 1.0, 4).is_err());
}

#[test]
fn forecast_report_is_flagged_non_causal() {
    let ds = random_binary_panel(4, &[-3, -2, -1, 0, 1], 6, 6);
    let rep = run_forecast(&ds, &ForecastOptions { info_periods: vec![-3, -2, -1, 0], ..Default::default() }).unwrap();
    assert!(rep.non_causal);
    assert!((rep.estimate - (rep.theta - rep.sb1_forecast)).abs() < 1e-12);
}

fn weighted() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-20.0f64..20.0, 0.01f64..1.0), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimates_stay_in_bounds(theta in -10.0f64..10.0, vals in weighted()) {
        let b = set(&vals);
        let iv = gdid_bounds(theta, &b);
        for loss in LossKind::ALL {
            prop_assert!(iv.contains(po_gdid(theta, &b, loss).estimate, 1e-9));
        }
        let hull = robust_po_hull(theta, &b);
        prop_assert!((hull.lower - iv.lower).abs() < 1e-12 && (hull.upper - iv.upper).abs() < 1e-12);
    }

    #[test]
    fn choices_minimise_their_risk(vals in weighted(), probe in -25.0f64..25.0) {
        let b = set(&vals);
        let c = b.candidates();
        for loss in LossKind::ALL {
            let s = optimal_sb1(&b, loss);
            prop_assert!(risk(&c, s, loss) <= risk(&c, probe, loss) + 1e-9, "{loss:?}");
        }
    }

    /// Extremes of the weight simplex reach each endpoint, so the hull over
    /// random weightings is the bias range.
    #[test]
    fn random_weightings_fill_the_hull(values in prop::collection::vec(-20.0f64..20.0, 2..6), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for k in 0..values.len() {
            // near-degenerate weights on element k
            let vals: Vec<(f64, f64)> = values.iter().enumerate().map(|(j, &v)| (v, if j == k { 1.0 } else { 1e-9 })).collect();
            let s = optimal_sb1(&set(&vals), LossKind::L2);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        for _ in 0..50 {
            let vals: Vec<(f64, f64)> = values.iter().map(|&v| (v, rand::Rng::random::<f64>(&mut rng) + 1e-6)).collect();
            let s = optimal_sb1(&set(&vals), LossKind::L1);
            prop_assert!(s >= values.iter().cloned().fold(f64::MAX, f64::min) - 1e-12);
            prop_assert!(s <= values.iter().cloned().fold(f64::MIN, f64::max) + 1e-12);
        }
        let b = set(&values.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>());
        prop_assert!((lo - b.lower).abs() < 1e-6 && (hi - b.upper).abs() < 1e-6);
    }
}
