//! In-processing mitigation: classifiers trained under fairness constraints.

mod expgrad;
mod grid;
mod prejudice;

pub use expgrad::{expgrad_fit, ExpgradConfig, ExpgradResult};
pub use grid::{grid_search_fit, GridConfig, GridPoint, GridResult};
pub use prejudice::{prejudice_index, prejudice_remover_fit, PrejudiceConfig, PrejudicePenalty};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{fit, predict_proba, threshold_labels, LogisticModel, Standardizer, TrainConfig};
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    DemographicParity,
    EqualizedOdds,
    TprDifference,
    ErrorRateRatio,
    BoundedGroupLoss,
}

impl ConstraintKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::DemographicParity => "demographic_parity",
            ConstraintKind::EqualizedOdds => "equalized_odds",
            ConstraintKind::TprDifference => "tpr_difference",
            ConstraintKind::ErrorRateRatio => "error_rate_ratio",
            ConstraintKind::BoundedGroupLoss => "bounded_group_loss",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "demographic_parity" | "dp" => Ok(ConstraintKind::DemographicParity),
            "equalized_odds" | "eo" => Ok(ConstraintKind::EqualizedOdds),
            "tpr_difference" | "true_positive_rate_difference" | "tpr" => Ok(ConstraintKind::TprDifference),
            "error_rate_ratio" | "error_rate" | "err" => Ok(ConstraintKind::ErrorRateRatio),
            "bounded_group_loss" | "bgl" => Ok(ConstraintKind::BoundedGroupLoss),
            other => Err(Error::Config(format!("unknown constraint `{other}`"))),
        }
    }
}

/// A constraint `coef·h + offset ≤ ε`, linear in the predictions `h`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LinearConstraint {
    pub coef: Vec<f64>,
    pub offset: f64,
}

impl LinearConstraint {
    pub fn value(&self, h: &[f64]) -> f64 {
        self.offset + self.coef.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `1[cell_u]/n_u − 1[cell_p]/n_p`, where `cell` filters rows.
fn mean_gap(y: &[u8], s: &[u8], cell: impl Fn(u8) -> bool) -> Result<Vec<f64>> {
    let mut n = [0.0f64; 2];
    for i in 0..y.len() {
        if cell(y[i]) {
            n[usize::from(s[i])] += 1.0;
        }
    }
    if n[0] == 0.0 || n[1] == 0.0 {
        return Err(Error::EmptyGroup("a constraint cell has no instances".into()));
    }
    Ok((0..y.len())
        .map(|i| match (cell(y[i]), s[i]) {
            (false, _) => 0.0,
            (true, 0) => 1.0 / n[0],
            (true, _) => -1.0 / n[1],
        })
        .collect())
}

fn both_signs(coef: Vec<f64>) -> [LinearConstraint; 2] {
    let neg = coef.iter().map(|c| -c).collect();
    [
        LinearConstraint { coef, offset: 0.0 },
        LinearConstraint { coef: neg, offset: 0.0 },
    ]
}

pub(crate) fn linear_constraints(
    kind: ConstraintKind,
    y: &[u8],
    s: &[u8],
    ratio: f64,
) -> Result<Vec<LinearConstraint>> {
    Ok(match kind {
        ConstraintKind::DemographicParity => both_signs(mean_gap(y, s, |_| true)?).into(),
        ConstraintKind::TprDifference => both_signs(mean_gap(y, s, |c| c == 1)?).into(),
        ConstraintKind::EqualizedOdds => {
            let mut v: Vec<_> = both_signs(mean_gap(y, s, |c| c == 1)?).into();
            v.extend(both_signs(mean_gap(y, s, |c| c == 0)?));
            v
        }
        ConstraintKind::ErrorRateRatio => {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(Error::Config(format!("error-rate ratio {ratio} outside (0, 1]")));
            }
            // err_g(h) = Σ_{i∈g} [h_i(1 − 2y_i) + y_i] / n_g
            let mut n = [0.0f64; 2];
            let mut base = [0.0f64; 2];
            for i in 0..y.len() {
                n[usize::from(s[i])] += 1.0;
                base[usize::from(s[i])] += f64::from(y[i]);
            }
            if n.contains(&0.0) {
                return Err(Error::EmptyGroup("error-rate constraint needs both groups".into()));
            }
            let e = |g: u8| -> Vec<f64> {
                (0..y.len())
                    .map(|i| if s[i] == g { (1.0 - 2.0 * f64::from(y[i])) / n[usize::from(g)] } else { 0.0 })
                    .collect()
            };
            let (eu, ep) = (e(0), e(1));
            let (bu, bp) = (base[0] / n[0], base[1] / n[1]);
            vec![
                LinearConstraint {
                    coef: eu.iter().zip(&ep).map(|(u, p)| ratio * u - p).collect(),
                    offset: ratio * bu - bp,
                },
                LinearConstraint {
                    coef: ep.iter().zip(&eu).map(|(p, u)| ratio * p - u).collect(),
                    offset: ratio * bp - bu,
                },
            ]
        }
        ConstraintKind::BoundedGroupLoss => {
            return Err(Error::Config(
                "bounded group loss is not a linear moment; use grid search".into(),
            ))
        }
    })
}

/// Largest constraint value for predictions in `[0, 1]`: the acceptance gap
/// for demographic parity, the larger of the TPR and FPR gaps for equalized
/// odds, the TPR gap, or the ratio-scaled error-rate gap.
pub fn constraint_violation(kind: ConstraintKind, y: &[u8], s: &[u8], predictions: &[f64], ratio: f64) -> Result<f64> {
    Ok(linear_constraints(kind, y, s, ratio)?
        .iter()
        .map(|c| c.value(predictions))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Weighted logistic best response to per-row costs of predicting favorable
/// (in units of `1/n`): targets `1[c < 0]`, weights `|c|`.
pub(crate) fn cost_sensitive_fit(ds: &TabularDataset, costs: &[f64], cfg: &TrainConfig) -> Result<LogisticModel> {
    let labels: Vec<u8> = costs.iter().map(|&c| u8::from(c < 0.0)).collect();
    if !labels.contains(&0) || !labels.contains(&1) {
        let p = if labels.contains(&1) { 1.0 } else { 0.0 };
        return Ok(LogisticModel::constant(Standardizer::fit(ds), p, cfg.clone()));
    }
    let weights = costs.iter().map(|c| c.abs().max(1e-12)).collect();
    fit(&ds.with_labels(labels)?.with_weights(weights)?, cfg)
}

pub(crate) fn hard_predictions(model: &LogisticModel, ds: &TabularDataset) -> Result<Vec<f64>> {
    Ok(threshold_labels(&predict_proba(model, ds)?, 0.5)
        .into_iter()
        .map(f64::from)
        .collect())
}

/// A mixture of deterministic classifiers; each member predicts hard labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedClassifier {
    pub members: Vec<LogisticModel>,
    pub probabilities: Vec<f64>,
}

impl RandomizedClassifier {
    pub fn new(members: Vec<LogisticModel>, probabilities: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != probabilities.len() {
            return Err(Error::Config("mixture needs one probability per member".into()));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config("mixture probabilities must be non-negative".into()));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture probabilities sum to {sum}")));
        }
        Ok(RandomizedClassifier { members, probabilities })
    }

    /// Probability that the mixture predicts the favorable label, per row.
    pub fn predict_expected(&self, ds: &TabularDataset) -> Result<Vec<f64>> {
        let mut out = vec![0.0; ds.len()];
        for (m, &q) in self.members.iter().zip(&self.probabilities) {
            for (o, h) in out.iter_mut().zip(hard_predictions(m, ds)?) {
                *o += q * h;
            }
        }
        Ok(out.into_iter().map(|p: f64| p.clamp(0.0, 1.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_names_round_trip() {
        for k in [
            ConstraintKind::DemographicParity,
            ConstraintKind::EqualizedOdds,
            ConstraintKind::TprDifference,
            ConstraintKind::ErrorRateRatio,
            ConstraintKind::BoundedGroupLoss,
        ] {
            assert_eq!(k.name().parse::<ConstraintKind>().unwrap(), k);
        }
        assert!("parity".parse::<ConstraintKind>().is_err());
    }

    #[test]
    fn violations_match_rate_gaps() {
        let y = [1, 1, 0, 0, 1, 1, 0, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let h = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let dp = constraint_violation(ConstraintKind::DemographicParity, &y, &s, &h, 1.0).unwrap();
        assert!((dp - 0.5).abs() < 1e-12);
        let tpr = constraint_violation(ConstraintKind::TprDifference, &y, &s, &h, 1.0).unwrap();
        assert!((tpr - 0.5).abs() < 1e-12);
        let eo = constraint_violation(ConstraintKind::EqualizedOdds, &y, &s, &h, 1.0).unwrap();
        assert!((eo - 0.5).abs() < 1e-12);
        // error rates: 0.5 vs 0.5
        let err = constraint_violation(ConstraintKind::ErrorRateRatio, &y, &s, &h, 1.0).unwrap();
        assert!(err.abs() < 1e-12);
        assert!(constraint_violation(ConstraintKind::BoundedGroupLoss, &y, &s, &h, 1.0).is_err());
    }

    #[test]
    fn mixture_validation() {
        let m = LogisticModel::constant(Standardizer::identity(1), 0.9, TrainConfig::default());
        assert!(RandomizedClassifier::new(vec![m.clone()], vec![0.5]).is_err());
        assert!(RandomizedClassifier::new(vec![m.clone(), m], vec![0.5, 0.5]).is_ok());
    }
}
