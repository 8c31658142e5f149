//! One-dimensional Lagrange-multiplier grid over a single constraint.
//!
//! For demographic parity, point `λ` fits a cost-sensitive model with cost
//! `(1 − 2y) + λ·n·(1[priv]/n_priv − 1[unpriv]/n_unpriv)` for a favorable
//! prediction, so positive `λ` favors the unprivileged group. For bounded
//! group loss, point `λ ≥ 0` upweights unprivileged rows by `1 + λ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{constraint_violation, cost_sensitive_fit, hard_predictions, ConstraintKind};
use crate::classifier::{fit, predict_proba, LogisticModel, TrainConfig};
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub constraint: ConstraintKind,
    pub grid_size: usize,
    pub lambda_max: f64,
    /// Largest violation a point may have to be selectable.
    pub tolerance: f64,
    /// Per-group log-loss ceiling for bounded group loss; defaults to the
    /// pooled loss of the unconstrained point.
    pub loss_bound: Option<f64>,
    pub train: TrainConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            constraint: ConstraintKind::DemographicParity,
            grid_size: 41,
            lambda_max: 1.0,
            tolerance: 0.05,
            loss_bound: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub multiplier: f64,
    /// Training 0-1 error of the hard predictions.
    pub error: f64,
    pub violation: f64,
    pub model: LogisticModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub model: LogisticModel,
    pub index: usize,
    /// False when no point met the tolerance and the least-violating one was returned.
    pub satisfied: bool,
    pub trace: Vec<GridPoint>,
}

impl GridConfig {
    pub fn multipliers(&self) -> Vec<f64> {
        let (lo, hi) = match self.constraint {
            ConstraintKind::BoundedGroupLoss => (0.0, self.lambda_max),
            _ => (-self.lambda_max, self.lambda_max),
        };
        let k = self.grid_size;
        (0..k)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / (k - 1) as f64;
                // keep an exact zero point on symmetric grids
                if v.abs() < 1e-12 { 0.0 } else { v }
            })
            .collect()
    }
}

fn group_log_loss(p: &[f64], y: &[u8], s: &[u8]) -> ([f64; 2], f64) {
    let mut sum = [0.0f64; 2];
    let mut count = [0.0f64; 2];
    for i in 0..p.len() {
        let l = if y[i] == 1 { -p[i].ln() } else { -(1.0 - p[i]).ln() };
        sum[usize::from(s[i])] += l;
        count[usize::from(s[i])] += 1.0;
    }
    let pooled = (sum[0] + sum[1]) / (count[0] + count[1]);
    ([sum[0] / count[0], sum[1] / count[1]], pooled)
}

pub fn grid_search_fit(ds: &TabularDataset, cfg: &GridConfig) -> Result<GridResult> {
    if cfg.grid_size < 2 {
        return Err(Error::Config(format!("grid size must be at least 2, got {}", cfg.grid_size)));
    }
    if !(cfg.lambda_max > 0.0 && cfg.lambda_max.is_finite()) {
        return Err(Error::Config("lambda_max must be positive".into()));
    }
    let y = ds.labels();
    let s = ds.protected();
    let n = ds.len() as f64;
    let mut n_group = [0.0f64; 2];
    for &g in s {
        n_group[usize::from(g)] += 1.0;
    }
    let fits: Vec<(f64, LogisticModel)> = match cfg.constraint {
        ConstraintKind::DemographicParity => cfg
            .multipliers()
            .into_par_iter()
            .map(|lambda| {
                let costs: Vec<f64> = (0..y.len())
                    .map(|i| {
                        let gap = if s[i] == 1 { 1.0 / n_group[1] } else { -1.0 / n_group[0] };
                        (1.0 - 2.0 * f64::from(y[i])) + lambda * n * gap
                    })
                    .collect();
                cost_sensitive_fit(ds, &costs, &cfg.train).map(|m| (lambda, m))
            })
            .collect::<Result<_>>()?,
        ConstraintKind::BoundedGroupLoss => cfg
            .multipliers()
            .into_par_iter()
            .map(|lambda| {
                let w = s.iter().map(|&g| if g == 0 { 1.0 + lambda } else { 1.0 }).collect();
                fit(&ds.with_weights(w)?, &cfg.train).map(|m| (lambda, m))
            })
            .collect::<Result<_>>()?,
        other => {
            return Err(Error::Config(format!(
                "grid search supports demographic_parity and bounded_group_loss, not {other}"
            )))
        }
    };

    let mut trace = Vec::with_capacity(fits.len());
    let mut bound = cfg.loss_bound;
    for (lambda, model) in fits {
        let h = hard_predictions(&model, ds)?;
        let error = h.iter().zip(y).filter(|(h, &y)| (**h >= 0.5) != (y == 1)).count() as f64 / n;
        let violation = match cfg.constraint {
            ConstraintKind::BoundedGroupLoss => {
                let (groups, pooled) = group_log_loss(&predict_proba(&model, ds)?, y, s);
                let b = *bound.get_or_insert(pooled);
                groups[0].max(groups[1]) - b
            }
            kind => constraint_violation(kind, y, s, &h, 1.0)?,
        };
        trace.push(GridPoint {
            multiplier: lambda,
            error,
            violation,
            model,
        });
    }

    let better = |a: &GridPoint, b: &GridPoint| {
        a.error
            .total_cmp(&b.error)
            .then(a.multiplier.abs().total_cmp(&b.multiplier.abs()))
    };
    let feasible = trace
        .iter()
        .enumerate()
        .filter(|(_, p)| p.violation <= cfg.tolerance)
        .min_by(|a, b| better(a.1, b.1));
    let (index, satisfied) = match feasible {
        Some((i, _)) => (i, true),
        None => {
            let i = trace
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.violation.total_cmp(&b.1.violation).then(better(a.1, b.1)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            (i, false)
        }
    };
    Ok(GridResult {
        model: trace[index].model.clone(),
        index,
        satisfied,
        trace,
    })
}
