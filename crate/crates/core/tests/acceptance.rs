//! Acceptance suite. Runs every criterion, prints one line each and exits
//! nonzero if any fails. Pass substrings (e.g. `C7`) to run a subset.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{cellwise_att, cohort_mean, discrete_x_panel, dr_panel, naive_diff, oracle_mills, random_binary_panel, random_staggered_panel, rng};
use rand::Rng;
use robust_did::analysis::{run_bounds, run_mc, run_po, BoundsOptions, InfoSpec, McEstimator, PoOptions};
use robust_did::dgp::{analytic_truth, mills_alpha, simulate, DgpFamily, DgpSpec};
use robust_did::gdid::{gdid_bounds, standard_did, tau_dr, theta_ols, DrSpec, OrSpec, PsSpec};
use robust_did::inference::BootstrapPlan;
use robust_did::multi_period::{att_bounds_t, twfe_fit, GroupCode, PathGroup};
use robust_did::panel::{Contrast, InfoLabel, InformationSet};
use robust_did::po::{po_gdid, robust_po_hull, LossKind};
use robust_did::relax::{discordancy_report, our_sb1_hull, rr_relative_magnitude_sb1, rr_smoothness_sb1};
use robust_did::selection_bias::{bias_set, BiasSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn c1() -> Outcome {
    let (hi, lo) = mills_alpha(1.0);
    let (ohi, olo) = oracle_mills(1.0);
    let round = |x: f64| (x * 1e4).round() / 1e4;
    let pass = round(hi) == 1.5251 && round(lo) == -0.2876 && (hi - ohi).abs() < 1e-9 && (lo - olo).abs() < 1e-9;
    outcome(pass, format!("alpha = ({hi:.6}, {lo:.6}), quadrature ({ohi:.6}, {olo:.6}); want (1.5251, -0.2876) at 4 dp"))
}

fn c2() -> Outcome {
    let ds = simulate(&DgpSpec::new(DgpFamily::Ashenfelter, 100_000, 20_240_101).with_param("theta", 9.0)).unwrap();
    let r = run_bounds(&ds, &BoundsOptions { info: InfoSpec::periods(&[-2, -1, 0]), ..Default::default() }).unwrap();
    let (lo, hi) = (r.bounds.lower, r.bounds.upper);
    let pass = (lo - 1.749).abs() < 0.1 && (hi - 12.625).abs() < 0.1 && (r.standard_did - 12.625).abs() < 0.1;
    outcome(pass, format!("bounds [{lo:.4}, {hi:.4}] vs [1.749, 12.625], standard DID {:.4} vs 12.625 (tol 0.1)", r.standard_did))
}

fn c3() -> Outcome {
    let spec = DgpSpec::new(DgpFamily::SpuriousPt, 1_000_000, 31);
    let ds = simulate(&spec).unwrap();
    let att = analytic_truth(&spec).att[&1];
    let sb = [naive_diff(&ds, -1), naive_diff(&ds, 0), naive_diff(&ds, 1) - att];
    let gap = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).map(|(i, j)| (sb[i] - sb[j]).abs()).fold(0.0, f64::max);
    let r = run_bounds(&ds, &BoundsOptions::default()).unwrap();
    let width = r.bounds.width();
    outcome(gap < 0.05 && width < 0.1, format!("SB = {sb:.4?}, max pairwise gap {gap:.4} (< 0.05), width {width:.4} (< 0.1)"))
}

fn c4() -> Outcome {
    let theta = 2.0;
    let specs = [
        ("logit/linear", DrSpec::new(PsSpec::Logit, OrSpec::Linear)),
        ("constant/quadratic", DrSpec::new(PsSpec::KnownConstant, OrSpec::Quadratic)),
        ("constant/linear", DrSpec::new(PsSpec::KnownConstant, OrSpec::Linear)),
    ];
    let mut est = vec![Vec::new(); 3];
    for rep in 0..100 {
        let ds = dr_panel(7_000 + rep, 10_000, theta);
        for (k, (_, s)) in specs.iter().enumerate() {
            est[k].push(tau_dr(&ds, 1, s).unwrap().estimate);
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (name, _)) in specs.iter().enumerate() {
        let (m, sd) = mean_sd(&est[k]);
        let se = sd / 10.0;
        let z = (m - theta) / se;
        pass &= if k < 2 { z.abs() <= 2.0 } else { z.abs() > 3.0 };
        parts.push(format!("{name} bias {:+.4} ({z:+.1} se)", m - theta));
    }
    outcome(pass, format!("{}; one-wrong within 2 MC se, both-wrong beyond 3", parts.join(", ")))
}

fn c5() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let ds = discrete_x_panel(seed, 300 + 20 * seed as usize, 2 + (seed % 5) as i64);
        let dr = tau_dr(&ds, 1, &DrSpec::new(PsSpec::Saturated, OrSpec::Saturated)).unwrap();
        worst = worst.max((dr.estimate - cellwise_att(&ds, 1)).abs());
    }
    outcome(worst < 1e-10, format!("max |tau_DR - cellwise| = {worst:.2e} over 50 datasets (< 1e-10)"))
}

fn c6() -> Outcome {
    let spec = DgpSpec::new(DgpFamily::MultiPtViolated, 1_000_000, 66);
    let ds = simulate(&spec).unwrap();
    let truth = analytic_truth(&spec);
    let info = InformationSet::pre_periods(&ds, &[-3, -2, -1, 0]).unwrap();
    let want = [(1, 0.33, 3.99, 2.5), (2, 3.67, 7.28, 4.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (t, lo, hi, att) in want {
        let iv = att_bounds_t(&ds, &PathGroup::StatusAt { period: t, treated: true }, &PathGroup::StatusAt { period: t, treated: false }, t, &info).unwrap();
        pass &= (iv.lower - lo).abs() < 0.1 && (iv.upper - hi).abs() < 0.1 && iv.contains(att, 0.0);
        pass &= (truth.att[&t] - att).abs() < 1e-12;
        parts.push(format!("t={t}: [{:.3}, {:.3}] vs [{lo}, {hi}] contains {att}", iv.lower, iv.upper));
    }
    outcome(pass, format!("{} (tol 0.1)", parts.join("; ")))
}

fn c7() -> Outcome {
    let spec = DgpSpec::new(DgpFamily::StaggeredMc, 10_000, 0);
    let run = run_mc(&spec, 500, 2024, McEstimator::Twfe, None).unwrap();
    let k = run.target_labels.iter().position(|l| l == "theta_1_1").unwrap();
    let t = &run.report.targets[k];
    let (lo, hi) = (0.087 * 0.75, 0.087 * 1.25);
    let pass = run.report.succeeded == 500 && (t.mean - 8.5).abs() < 0.05 && (lo..=hi).contains(&t.rmse);
    outcome(pass, format!("theta_1_1 mean {:.4} (8.5 +/- 0.05), RMSE {:.4} in [{lo:.5}, {hi:.5}], {} reps", t.mean, t.rmse, run.report.succeeded))
}

fn c8() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut r = rng(seed);
        let t_max = r.random_range(1..=4);
        let ds = random_staggered_panel(1_000 + seed, t_max, r.random_range(10..80));
        let fit = twfe_fit(&ds, 0).unwrap();
        for th in &fit.theta {
            let GroupCode::Cohort(g) = th.group else { unreachable!() };
            let dd = (cohort_mean(&ds, Some(g), th.period) - cohort_mean(&ds, Some(g), 0)) - (cohort_mean(&ds, None, th.period) - cohort_mean(&ds, None, 0));
            worst = worst.max((th.estimate - dd).abs());
        }
    }
    outcome(worst < 1e-10, format!("max |twfe - double difference| = {worst:.2e} over 100 panels (< 1e-10)"))
}

fn c9() -> Outcome {
    let spec = DgpSpec::new(DgpFamily::Ashenfelter, 2000, 0);
    let run = run_mc(&spec, 200, 909, McEstimator::Bounds, Some(BootstrapPlan::new(500, 909))).unwrap();
    let cov = run.coverage.unwrap();
    outcome(run.report.succeeded == 200 && cov >= 0.95, format!("coverage of true set {cov:.3} over {} reps (>= 0.95)", run.report.succeeded))
}

fn c10() -> Outcome {
    let mut r = rng(10);
    let mut bad = 0usize;
    let n = 20_000;
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random_range(-10.0..10.0), r.random_range(-10.0..10.0));
        let gap: f64 = (b - a).abs();
        let ours = our_sb1_hull(a, b);
        let m = r.random_range(0.0..3.0 * gap.max(1e-3));
        let s = discordancy_report(ours, &rr_smoothness_sb1(a, b, m).unwrap());
        bad += usize::from(s.overlap != (m >= gap));
        let mbar = r.random_range(0.0..3.0);
        let rm = discordancy_report(ours, &rr_relative_magnitude_sb1(a, b, mbar).unwrap());
        bad += usize::from(!rm.overlap || rm.intersection.is_none());
        // crossovers: containment switches on exactly at 2|gap| and 1
        for (eps, want) in [(-1e-7, false), (0.0, true), (1e-7, true)] {
            if gap > 1e-3 {
                let s = discordancy_report(ours, &rr_smoothness_sb1(a, b, 2.0 * gap * (1.0 + eps)).unwrap());
                let rm = discordancy_report(ours, &rr_relative_magnitude_sb1(a, b, 1.0 + eps).unwrap());
                bad += usize::from(s.ours_contained_in_rr != want) + usize::from(rm.ours_contained_in_rr != want);
            }
        }
    }
    outcome(bad == 0, format!("{bad} violations over {n} random (SB_-1, SB_0, M, Mbar) draws"))
}

fn c11() -> Outcome {
    let mut violations = 0;
    for seed in 0..500u64 {
        let mut r = rng(seed ^ 0x5eed);
        let first = -r.random_range(1..5i64);
        let periods: Vec<i64> = (first..=1).collect();
        let ds = random_binary_panel(seed, &periods, r.random_range(2..30), r.random_range(2..30));
        let mut info: Vec<i64> = (first..0).filter(|_| r.random::<bool>()).collect();
        info.push(0);
        let bias = bias_set(&ds, &InformationSet::pre_periods(&ds, &info).unwrap(), &Contrast::binary()).unwrap();
        let iv = gdid_bounds(theta_ols(&ds, 1).unwrap(), &bias);
        violations += usize::from(!iv.contains(standard_did(&ds, 1).unwrap(), 0.0));
    }
    outcome(violations == 0, format!("{violations} violations over 500 datasets"))
}

fn c12() -> Outcome {
    let (mut outside, mut mid_err, mut hull_err) = (0usize, 0.0f64, 0.0f64);
    for seed in 0..300u64 {
        let mut r = rng(seed ^ 0xb0);
        let ds = random_binary_panel(seed, &[-3, -2, -1, 0, 1], r.random_range(2..20), r.random_range(2..20));
        let rep = run_po(&ds, &PoOptions::default()).unwrap();
        let b = run_bounds(&ds, &BoundsOptions::default()).unwrap().bounds;
        hull_err = hull_err.max((rep.robust_hull.lower - b.lower).abs()).max((rep.robust_hull.upper - b.upper).abs());
        for e in &rep.estimates {
            outside += usize::from(!b.contains(e.estimate, 1e-12));
            if e.loss == LossKind::Linf {
                mid_err = mid_err.max((e.estimate - b.midpoint()).abs());
            }
        }
        // arbitrary weights on arbitrary values
        let vals: Vec<(InfoLabel, f64, f64)> =
            (0..r.random_range(1..7)).map(|k| (InfoLabel::Int(k), r.random_range(-50.0..50.0), r.random_range(0.01..1.0))).collect();
        let bs = BiasSet::from_values(vals).unwrap();
        let theta = r.random_range(-10.0..10.0);
        let iv = gdid_bounds(theta, &bs);
        let h = robust_po_hull(theta, &bs);
        hull_err = hull_err.max((h.lower - iv.lower).abs()).max((h.upper - iv.upper).abs());
        for loss in LossKind::ALL {
            let e = po_gdid(theta, &bs, loss).estimate;
            outside += usize::from(!iv.contains(e, 1e-12));
            if loss == LossKind::Linf {
                mid_err = mid_err.max((e - iv.midpoint()).abs());
            }
        }
    }
    let pass = outside == 0 && mid_err <= 1e-12 && hull_err <= 1e-12;
    outcome(pass, format!("{outside} estimates outside bounds, |Linf - midpoint| {mid_err:.1e} (<= 1e-12), |hull - bounds| {hull_err:.1e} (<= 1e-12)"))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    ("C1", "mills constants", c1),
    ("C2", "ashenfelter bounds oracle", c2),
    ("C3", "spurious parallel trends collapse", c3),
    ("C4", "doubly robust property", c4),
    ("C5", "saturated cell equivalence", c5),
    ("C6", "multi-period truth", c6),
    ("C7", "TWFE Monte Carlo", c7),
    ("C8", "TWFE identity", c8),
    ("C9", "union CI coverage", c9),
    ("C10", "restriction algebra", c10),
    ("C11", "standard DID containment", c11),
    ("C12", "PO consistency", c12),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|p| id == p || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        ran += 1;
        failed += usize::from(!o.pass);
        println!("[{}] {id} {name}: {} ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
