//! Exponentiated-gradient reduction.
//!
//! The learner plays best responses (cost-sensitive logistic fits) against
//! multipliers `λ_j = B·e^{θ_j} / (1 + Σ_k e^{θ_k})`, `B = 1/ε`, while `θ`
//! follows the constraint values with step `η/√t`. The result is the uniform
//! average of the best responses.

use serde::{Deserialize, Serialize};

use super::{cost_sensitive_fit, hard_predictions, linear_constraints, ConstraintKind, RandomizedClassifier};
use crate::classifier::{LogisticModel, TrainConfig};
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpgradConfig {
    pub constraint: ConstraintKind,
    pub eps: f64,
    pub max_iter: usize,
    pub eta: f64,
    /// Bound for the error-rate ratio constraint.
    pub ratio: f64,
    pub train: TrainConfig,
}

impl Default for ExpgradConfig {
    fn default() -> Self {
        ExpgradConfig {
            constraint: ConstraintKind::DemographicParity,
            eps: 0.05,
            max_iter: 50,
            eta: 2.0,
            ratio: 1.0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpgradResult {
    pub classifier: RandomizedClassifier,
    /// Multipliers averaged over iterations.
    pub multipliers: Vec<f64>,
    /// Largest constraint value of the mixture on the training data.
    pub violation: f64,
    pub iterations: usize,
}

pub fn expgrad_fit(ds: &TabularDataset, cfg: &ExpgradConfig) -> Result<ExpgradResult> {
    if !(cfg.eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {}", cfg.eps)));
    }
    if cfg.max_iter == 0 || !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(Error::Config("expgrad needs max_iter >= 1 and a positive step".into()));
    }
    let y = ds.labels();
    let s = ds.protected();
    let n = ds.len() as f64;
    let constraints = linear_constraints(cfg.constraint, y, s, cfg.ratio)?;
    let bound = 1.0 / cfg.eps;
    let mut theta = vec![0.0; constraints.len()];
    let mut lambda_sum = vec![0.0; constraints.len()];
    let mut members: Vec<(LogisticModel, Vec<f64>, usize)> = Vec::new();

    for t in 1..=cfg.max_iter {
        let z = 1.0 + theta.iter().map(|v: &f64| v.exp()).sum::<f64>();
        let lambda: Vec<f64> = theta.iter().map(|v| bound * v.exp() / z).collect();
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::Divergence("non-finite multipliers".into()));
        }
        let costs: Vec<f64> = (0..y.len())
            .map(|i| {
                let shift: f64 = constraints.iter().zip(&lambda).map(|(c, l)| l * c.coef[i]).sum();
                (1.0 - 2.0 * f64::from(y[i])) + n * shift
            })
            .collect();
        let model = cost_sensitive_fit(ds, &costs, &cfg.train)?;
        let h = hard_predictions(&model, ds)?;
        let step = cfg.eta / (t as f64).sqrt();
        if cfg.eps.is_finite() {
            for (th, c) in theta.iter_mut().zip(&constraints) {
                *th += step * (c.value(&h) - cfg.eps);
            }
        }
        for (acc, l) in lambda_sum.iter_mut().zip(&lambda) {
            *acc += l;
        }
        match members.iter_mut().find(|(m, _, _)| *m == model) {
            Some(entry) => entry.2 += 1,
            None => members.push((model, h, 1)),
        }
    }

    let total = cfg.max_iter as f64;
    let mut mixed = vec![0.0; y.len()];
    for (_, h, count) in &members {
        for (m, hv) in mixed.iter_mut().zip(h) {
            *m += *count as f64 / total * hv;
        }
    }
    let violation = constraints
        .iter()
        .map(|c| c.value(&mixed))
        .fold(f64::NEG_INFINITY, f64::max);
    let (models, probabilities): (Vec<_>, Vec<_>) = members
        .into_iter()
        .map(|(m, _, count)| (m, count as f64 / total))
        .unzip();
    Ok(ExpgradResult {
        classifier: RandomizedClassifier::new(models, probabilities)?,
        multipliers: lambda_sum.iter().map(|l| l / total).collect(),
        violation,
        iterations: cfg.max_iter,
    })
}
