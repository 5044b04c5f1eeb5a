//! Parametric simulators with closed-form truths, and a Monte Carlo runner.

mod mc;
mod simulate;
mod truth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mc::{derive_seed, interval_coverage, monte_carlo, McReport, McTarget, Truth};
pub use simulate::simulate;
pub use truth::{analytic_truth, mills_alpha, mills_gap, AnalyticTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpFamily {
    /// Equal biases in all periods from a symmetric loading.
    SpuriousPt,
    /// Pre-program dip: bias grows away from the baseline.
    Ashenfelter,
    /// Time-invariant covariate scaling the loading.
    CovariateStatic,
    /// Covariate redrawn each period with shrinking support.
    CovariateTimevarying,
    /// Multi-period selection on a fixed unobservable; parallel trends hold.
    MultiPtHolds,
    /// Multi-period selection on an autocorrelated unobservable.
    MultiPtViolated,
    /// Staggered adoption with cohort-specific effects.
    StaggeredMc,
    /// Even time loading on a selection factor plus a level factor.
    FactorStructure,
    BiasVariationLinear,
    BiasVariationSawtooth,
    BiasVariationCosine,
}

impl DgpFamily {
    pub const ALL: [DgpFamily; 11] = [
        DgpFamily::SpuriousPt,
        DgpFamily::Ashenfelter,
        DgpFamily::CovariateStatic,
        DgpFamily::CovariateTimevarying,
        DgpFamily::MultiPtHolds,
        DgpFamily::MultiPtViolated,
        DgpFamily::StaggeredMc,
        DgpFamily::FactorStructure,
        DgpFamily::BiasVariationLinear,
        DgpFamily::BiasVariationSawtooth,
        DgpFamily::BiasVariationCosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DgpFamily::SpuriousPt => "spurious_pt",
            DgpFamily::Ashenfelter => "ashenfelter",
            DgpFamily::CovariateStatic => "covariate_static",
            DgpFamily::CovariateTimevarying => "covariate_timevarying",
            DgpFamily::MultiPtHolds => "multi_pt_holds",
            DgpFamily::MultiPtViolated => "multi_pt_violated",
            DgpFamily::StaggeredMc => "staggered_mc",
            DgpFamily::FactorStructure => "factor_structure",
            DgpFamily::BiasVariationLinear => "bias_variation_linear",
            DgpFamily::BiasVariationSawtooth => "bias_variation_sawtooth",
            DgpFamily::BiasVariationCosine => "bias_variation_cosine",
        }
    }

    /// Parameter names and defaults.
    pub fn defaults(&self) -> &'static [(&'static str, f64)] {
        match self {
            DgpFamily::SpuriousPt | DgpFamily::CovariateStatic | DgpFamily::CovariateTimevarying => {
                &[("theta", 2.0), ("c", 1.0)]
            }
            DgpFamily::Ashenfelter => &[("theta", 9.0), ("c", 1.0)],
            DgpFamily::MultiPtHolds => &[("T", 2.0)],
            DgpFamily::MultiPtViolated => &[("T", 2.0), ("rho", 0.9)],
            DgpFamily::StaggeredMc => &[("T", 3.0)],
            DgpFamily::FactorStructure => &[("theta", 2.0), ("c", 1.0), ("sigma_eps", 0.5)],
            DgpFamily::BiasVariationLinear
            | DgpFamily::BiasVariationSawtooth
            | DgpFamily::BiasVariationCosine => &[("theta", 5.0), ("c", 1.0)],
        }
    }

    /// Observed periods for horizon `t_max` (multi-period families only use it).
    pub fn periods(&self, t_max: i64) -> Vec<i64> {
        match self {
            DgpFamily::SpuriousPt => vec![-1, 0, 1],
            DgpFamily::Ashenfelter
            | DgpFamily::FactorStructure
            | DgpFamily::BiasVariationLinear
            | DgpFamily::BiasVariationSawtooth => vec![-2, -1, 0, 1],
            DgpFamily::BiasVariationCosine => (-4..=1).collect(),
            DgpFamily::CovariateStatic | DgpFamily::CovariateTimevarying => vec![0, 1],
            DgpFamily::MultiPtHolds | DgpFamily::StaggeredMc => (0..=t_max).collect(),
            DgpFamily::MultiPtViolated => (-3..=t_max).collect(),
        }
    }

    /// Pre-period information set used by the truth oracle.
    pub fn info_periods(&self) -> Vec<i64> {
        match self {
            DgpFamily::SpuriousPt => vec![-1, 0],
            DgpFamily::Ashenfelter
            | DgpFamily::FactorStructure
            | DgpFamily::BiasVariationLinear
            | DgpFamily::BiasVariationSawtooth => vec![-2, -1, 0],
            DgpFamily::BiasVariationCosine => (-4..=0).collect(),
            DgpFamily::CovariateStatic
            | DgpFamily::CovariateTimevarying
            | DgpFamily::MultiPtHolds
            | DgpFamily::StaggeredMc => vec![0],
            DgpFamily::MultiPtViolated => vec![-3, -2, -1, 0],
        }
    }
}

impl fmt::Display for DgpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DgpFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown family `{s}`")))
    }
}

/// A simulation design: family, parameter overrides, sample size, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: DgpFamily,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(family: DgpFamily, n: usize, seed: u64) -> Self {
        DgpSpec { family, params: BTreeMap::new(), n, seed }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let spec: DgpSpec = serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parameter value, falling back to the family default.
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.family
                .defaults()
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("{} has no parameter `{name}`", self.family))
        })
    }

    /// Horizon `T` as an integer (multi-period families).
    pub fn horizon(&self) -> i64 {
        if self.family.defaults().iter().any(|(k, _)| *k == "T") {
            self.param("T") as i64
        } else {
            1
        }
    }

    pub fn periods(&self) -> Vec<i64> {
        self.family.periods(self.horizon())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        let known = self.family.defaults();
        for (k, v) in &self.params {
            if !known.iter().any(|(name, _)| name == k) {
                return Err(Error::InvalidSpec(format!("{} has no parameter `{k}`", self.family)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("parameter `{k}` is not finite")));
            }
        }
        if known.iter().any(|(k, _)| *k == "T") {
            let t = self.param("T");
            if t.fract() != 0.0 || !(1.0..=50.0).contains(&t) {
                return Err(Error::InvalidSpec(format!("T must be an integer in 1..=50, got {t}")));
            }
        }
        if self.family == DgpFamily::MultiPtViolated {
            let rho = self.param("rho");
            if !(rho > -1.0 && rho < 1.0) {
                return Err(Error::InvalidSpec(format!("rho must lie in (-1, 1), got {rho}")));
            }
        }
        if self.family == DgpFamily::FactorStructure && !(self.param("sigma_eps") >= 0.0) {
            return Err(Error::InvalidSpec("sigma_eps must be nonnegative".into()));
        }
        Ok(())
    }
}
