//! Baseline selection biases and their convex hulls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{Contrast, ElementSelector, InfoElement, InfoKind, InfoLabel, InformationSet, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    /// Hull of baseline selection biases.
    Level,
    /// Baseline bias plus the hull of consecutive-period bias changes.
    Variation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasElement {
    pub label: InfoLabel,
    /// `SB(ι)` for level sets, `SB_t − SB_{t−1}` for variation sets.
    pub value: f64,
    pub weight: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasSet {
    pub per_element: Vec<BiasElement>,
    pub lower: f64,
    pub upper: f64,
    pub kind: BiasKind,
    /// Baseline bias the variations are added to (variation sets only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
}

impl BiasSet {
    /// Level set from `(label, value, weight)` triples; weights are
    /// renormalised to sum to one.
    pub fn from_values(values: impl IntoIterator<Item = (InfoLabel, f64, f64)>) -> Result<Self> {
        let per_element: Vec<BiasElement> = values
            .into_iter()
            .map(|(label, value, weight)| BiasElement { label, value, weight, n_obs: 0 })
            .collect();
        Self::level(per_element)
    }

    fn level(mut per_element: Vec<BiasElement>) -> Result<Self> {
        if per_element.is_empty() {
            return Err(Error::InvalidInformationSet("no elements".into()));
        }
        normalise(&mut per_element)?;
        let (lower, upper) = extrema(per_element.iter().map(|e| e.value));
        Ok(BiasSet { per_element, lower, upper, kind: BiasKind::Level, anchor: None })
    }

    /// Candidate post-period biases with their weights: the element values
    /// for level sets, anchor plus variation for variation sets.
    pub fn candidates(&self) -> Vec<(f64, f64)> {
        let shift = self.anchor.unwrap_or(0.0);
        self.per_element.iter().map(|e| (shift + e.value, e.weight)).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value_of(&self, label: &InfoLabel) -> Option<f64> {
        self.per_element.iter().find(|e| &e.label == label).map(|e| e.value)
    }
}

fn normalise(elements: &mut [BiasElement]) -> Result<()> {
    let total: f64 = elements.iter().map(|e| e.weight).sum();
    if !(total > 0.0) || elements.iter().any(|e| !(e.weight >= 0.0)) {
        return Err(Error::WeightSumInvalid(total));
    }
    for e in elements.iter_mut() {
        e.weight /= total;
    }
    Ok(())
}

fn extrema(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Difference of treated and control outcome means in the cells of `elem`.
pub fn selection_bias_at(ds: &PanelDataset, elem: &InfoElement, contrast: &Contrast) -> Result<f64> {
    match &elem.selector {
        ElementSelector::Period(p) => contrast.difference(ds, *p),
        ElementSelector::Baseline { period, condition } => {
            contrast.with_covariate(condition.clone()).difference(ds, *period)
        }
    }
}

/// Per-element biases over `info` and their hull.
pub fn bias_set(ds: &PanelDataset, info: &InformationSet, contrast: &Contrast) -> Result<BiasSet> {
    let per_element = info
        .elements()
        .iter()
        .map(|e| {
            Ok(BiasElement {
                label: e.label.clone(),
                value: selection_bias_at(ds, e, contrast)?,
                weight: e.weight,
                n_obs: e.n_obs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BiasSet::level(per_element)
}

/// Hull of `SB_0 + (SB_t − SB_{t−1})` over consecutive pre-periods in `info`,
/// where `SB_0` is the bias at the latest period of `info`.
pub fn bias_variation_set(ds: &PanelDataset, info: &InformationSet, contrast: &Contrast) -> Result<BiasSet> {
    if info.kind() != InfoKind::PrePeriods {
        return Err(Error::InvalidInformationSet(
            "bias variation needs a pre-period information set".into(),
        ));
    }
    let mut periods: Vec<(i64, &InfoElement)> = info
        .elements()
        .iter()
        .filter_map(|e| match e.selector {
            ElementSelector::Period(p) => Some((p, e)),
            _ => None,
        })
        .collect();
    periods.sort_by_key(|(p, _)| *p);
    let grid = ds.periods();
    let position = |p: i64| grid.binary_search(&p).ok();
    let mut sb = Vec::with_capacity(periods.len());
    for (p, e) in &periods {
        sb.push((*p, selection_bias_at(ds, e, contrast)?, e.weight, e.n_obs));
    }
    let mut per_element = Vec::new();
    for w in sb.windows(2) {
        let (p0, s0, _, _) = w[0];
        let (p1, s1, weight, n_obs) = w[1];
        if position(p1).zip(position(p0)).map(|(a, b)| a == b + 1) == Some(true) {
            per_element.push(BiasElement { label: InfoLabel::Int(p1), value: s1 - s0, weight, n_obs });
        }
    }
    if per_element.is_empty() {
        return Err(Error::NeedsAtLeastTwoPeriods);
    }
    normalise(&mut per_element)?;
    let anchor = sb.last().expect("nonempty").1;
    let (dlo, dhi) = extrema(per_element.iter().map(|e| e.value));
    Ok(BiasSet {
        per_element,
        lower: anchor + dlo,
        upper: anchor + dhi,
        kind: BiasKind::Variation,
        anchor: Some(anchor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_values() {
        let b = BiasSet::from_values([
            (InfoLabel::Int(-2), 12.689, 1.0),
            (InfoLabel::Int(-1), 5.438, 1.0),
            (InfoLabel::Int(0), 1.813, 1.0),
        ])
        .unwrap();
        assert_eq!((b.lower, b.upper), (1.813, 12.689));
        assert!((b.per_element[0].weight - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_is_degenerate() {
        let b = BiasSet::from_values([(InfoLabel::Int(0), 0.7, 1.0)]).unwrap();
        assert!(b.is_degenerate());
    }
}
