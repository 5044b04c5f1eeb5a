use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DgpFamily, DgpSpec};
use crate::error::{Error, Result};
use crate::panel::{PanelColumns, PanelDataset, TreatmentScheme};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws one dataset. Units are `u0..u{n-1}`; the stream is sequential in
/// unit order so a spec and seed always give the same panel.
pub fn simulate(spec: &DgpSpec) -> Result<PanelDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let periods = spec.periods();
    let n = spec.n;
    let family = spec.family;
    let with_x = matches!(family, DgpFamily::CovariateStatic | DgpFamily::CovariateTimevarying);
    let mut cols = PanelColumns::with_capacity(n * periods.len(), usize::from(with_x));
    cols.unit_ids = (0..n).map(|i| format!("u{i}")).collect();

    let theta = if family.defaults().iter().any(|(k, _)| *k == "theta") { spec.param("theta") } else { 0.0 };
    let c = if family.defaults().iter().any(|(k, _)| *k == "c") { spec.param("c") } else { 0.0 };
    let big_t = spec.horizon() as f64;
    // Effect θ·D·t on the post period, zero before.
    let effect = |d: i64, t: i64| if t >= 0 { theta * d as f64 * t as f64 } else { 0.0 };

    let chol = if family == DgpFamily::MultiPtViolated {
        let rho = spec.param("rho");
        let m = periods.len();
        let sigma = DMatrix::from_fn(m, m, |i, j| rho.powi((i as i32 - j as i32).abs()));
        Some(
            sigma
                .cholesky()
                .ok_or_else(|| Error::InvalidSpec("covariance is not positive definite".into()))?
                .l(),
        )
    } else {
        None
    };
    let mut z = vec![0.0; periods.len()];

    for i in 0..n {
        let u = i as u32;
        match family {
            DgpFamily::SpuriousPt
            | DgpFamily::Ashenfelter
            | DgpFamily::BiasVariationLinear
            | DgpFamily::BiasVariationSawtooth
            | DgpFamily::BiasVariationCosine => {
                let uu = normal(&mut rng);
                let d = i64::from(uu >= c);
                for &t in &periods {
                    let tf = t as f64;
                    let (level, loading) = match family {
                        DgpFamily::SpuriousPt => (2.0 * tf, 1.0 - 2.0 * tf.abs() + 2.0 * tf * tf),
                        DgpFamily::Ashenfelter => (0.0, 1.0 + tf.abs() + tf * tf),
                        DgpFamily::BiasVariationLinear => (0.0, tf),
                        DgpFamily::BiasVariationSawtooth => {
                            let sign = if t.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                            (0.0, 0.75 * sign - (tf - 2.0))
                        }
                        _ => (2.0 * tf, (std::f64::consts::PI * tf).cos()),
                    };
                    cols.push(u, t, level + loading * uu + effect(d, t), d, &[]);
                }
            }
            DgpFamily::FactorStructure => {
                let sigma_eps = spec.param("sigma_eps");
                let uu = normal(&mut rng);
                let v = normal(&mut rng);
                let eps = sigma_eps * normal(&mut rng);
                let d = i64::from(uu + v >= c);
                for &t in &periods {
                    let tf = t as f64;
                    let eta = normal(&mut rng);
                    let y = (1.0 + tf * tf + eps) * uu + v + eta + effect(d, t);
                    cols.push(u, t, y, d, &[]);
                }
            }
            DgpFamily::CovariateStatic | DgpFamily::CovariateTimevarying => {
                let uu = normal(&mut rng);
                let d = i64::from(uu >= c);
                let x_static = rng.random::<f64>();
                for &t in &periods {
                    let tf = t as f64;
                    let (x, loading) = if family == DgpFamily::CovariateStatic {
                        (x_static, 0.5f64.powi(t as i32) * x_static)
                    } else {
                        let x = if t == 0 { x_static } else { uniform(&mut rng, 0.0, 1.0 / (1.0 + tf * tf)) };
                        (x, x)
                    };
                    let y = (1.0 + loading) * uu + effect(d, t) * x;
                    cols.push(u, t, y, d, &[x]);
                }
            }
            DgpFamily::MultiPtHolds | DgpFamily::StaggeredMc => {
                let uu = uniform(&mut rng, 0.0, 2.0);
                let status: Vec<i64> =
                    periods.iter().map(|&t| i64::from(t > 0 && uu >= 2.0 - t as f64 / big_t)).collect();
                if family == DgpFamily::MultiPtHolds {
                    for (k, &t) in periods.iter().enumerate() {
                        let tf = t as f64;
                        let eps = tf * tf + normal(&mut rng);
                        let th = uniform(&mut rng, 0.0, 1.0 + tf * tf);
                        cols.push(u, t, uu + eps + th * status[k] as f64, status[k], &[]);
                    }
                } else {
                    let mut gain = 0.0;
                    for (k, &t) in periods.iter().enumerate().skip(1) {
                        let tf = t as f64;
                        gain += uniform(&mut rng, 0.0, 1.0 + tf * tf) * status[k] as f64;
                    }
                    for (k, &t) in periods.iter().enumerate() {
                        let tf = t as f64;
                        let eps = tf * tf + normal(&mut rng);
                        let y = uu + eps + if t > 0 { gain } else { 0.0 };
                        cols.push(u, t, y, status[k], &[]);
                    }
                }
            }
            DgpFamily::MultiPtViolated => {
                let l = chol.as_ref().expect("factor computed above");
                for zk in z.iter_mut() {
                    *zk = normal(&mut rng);
                }
                for (k, &t) in periods.iter().enumerate() {
                    let ut = 2.0 + (0..=k).map(|j| l[(k, j)] * z[j]).sum::<f64>();
                    let tf = t as f64;
                    let d = i64::from(t >= 1 && ut >= 2.0 - tf / big_t);
                    let th = uniform(&mut rng, 0.0, 4.0 + tf * tf);
                    cols.push(u, t, (tf.abs() - 1.0) * ut + th * d as f64, d, &[]);
                }
            }
        }
    }

    let names = if with_x { vec!["x".to_string()] } else { Vec::new() };
    let scheme = match family {
        DgpFamily::MultiPtHolds | DgpFamily::MultiPtViolated | DgpFamily::StaggeredMc => {
            TreatmentScheme::MultiPeriodPaths
        }
        _ => TreatmentScheme::BinarySinglePost,
    };
    PanelDataset::from_columns(cols, names, Some(scheme), None)
}
