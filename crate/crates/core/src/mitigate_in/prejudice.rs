use serde::{Deserialize, Serialize};

use crate::classifier::{fit_with_penalty, LogisticModel, ProbabilityPenalty, TrainConfig};
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrejudiceConfig {
    pub eta: f64,
    pub train: TrainConfig,
}

impl Default for PrejudiceConfig {
    fn default() -> Self {
        PrejudiceConfig {
            eta: 1.0,
            train: TrainConfig::default(),
        }
    }
}

fn h(a: f64) -> f64 {
    let a = a.clamp(1e-12, 1.0 - 1e-12);
    a * a.ln() + (1.0 - a) * (1.0 - a).ln()
}

fn logit(a: f64) -> f64 {
    let a = a.clamp(1e-12, 1.0 - 1e-12);
    (a / (1.0 - a)).ln()
}

/// Mutual information (nats) between the protected flag and a Bernoulli
/// prediction with the given per-row favorable probabilities:
/// `Σ_s (N_s/N)·h(A_s) − h(B)` with `h(a) = a ln a + (1 − a) ln(1 − a)`,
/// `A_s` the group mean and `B` the overall mean.
pub fn prejudice_index(probabilities: &[f64], protected: &[u8]) -> f64 {
    let n = probabilities.len() as f64;
    let mut sum = [0.0f64; 2];
    let mut count = [0.0f64; 2];
    for (&p, &s) in probabilities.iter().zip(protected) {
        sum[usize::from(s)] += p;
        count[usize::from(s)] += 1.0;
    }
    let b = (sum[0] + sum[1]) / n;
    let mut pi = -h(b);
    for g in 0..2 {
        if count[g] > 0.0 {
            pi += count[g] / n * h(sum[g] / count[g]);
        }
    }
    pi
}

/// `η · prejudice_index`, differentiable in the probabilities.
pub struct PrejudicePenalty<'a> {
    pub eta: f64,
    pub protected: &'a [u8],
}

impl ProbabilityPenalty for PrejudicePenalty<'_> {
    fn value_and_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let n = p.len() as f64;
        let mut sum = [0.0f64; 2];
        let mut count = [0.0f64; 2];
        for (&pi, &s) in p.iter().zip(self.protected) {
            sum[usize::from(s)] += pi;
            count[usize::from(s)] += 1.0;
        }
        let b = (sum[0] + sum[1]) / n;
        let slope = [0, 1].map(|g| {
            if count[g] > 0.0 {
                self.eta * (logit(sum[g] / count[g]) - logit(b)) / n
            } else {
                0.0
            }
        });
        let grad = self.protected.iter().map(|&s| slope[usize::from(s)]).collect();
        (self.eta * prejudice_index(p, self.protected), grad)
    }
}

/// Logistic regression with the prejudice regularizer `η·PI` added to the loss.
pub fn prejudice_remover_fit(ds: &TabularDataset, cfg: &PrejudiceConfig) -> Result<LogisticModel> {
    if !(cfg.eta >= 0.0 && cfg.eta.is_finite()) {
        return Err(Error::Config(format!("prejudice strength must be finite and >= 0, got {}", cfg.eta)));
    }
    let penalty = PrejudicePenalty {
        eta: cfg.eta,
        protected: ds.protected(),
    };
    fit_with_penalty(ds, &cfg.train, Some(&penalty)).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_zero_when_groups_match() {
        let p = [0.2, 0.8, 0.2, 0.8];
        let s = [0, 0, 1, 1];
        assert!(prejudice_index(&p, &s).abs() < 1e-12);
    }

    #[test]
    fn index_is_flag_entropy_when_prediction_is_the_flag() {
        let p = [1.0, 1.0, 0.0, 0.0];
        let s = [1, 1, 0, 0];
        assert!((prejudice_index(&p, &s) - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let p = vec![0.3, 0.6, 0.55, 0.9, 0.1, 0.45];
        let s = [0, 0, 1, 1, 1, 0];
        let pen = PrejudicePenalty { eta: 3.0, protected: &s };
        let (_, g) = pen.value_and_grad(&p);
        let step = 1e-6;
        for j in 0..p.len() {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[j] += step;
            dn[j] -= step;
            let fd = (pen.value_and_grad(&up).0 - pen.value_and_grad(&dn).0) / (2.0 * step);
            assert!((fd - g[j]).abs() < 1e-6, "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn negative_strength_rejected() {
        let ds = TabularDataset::new(vec![0.0, 1.0], vec!["x".into()], vec![0, 1], vec![0, 1], None).unwrap();
        let cfg = PrejudiceConfig { eta: -1.0, ..PrejudiceConfig::default() };
        assert!(prejudice_remover_fit(&ds, &cfg).is_err());
    }
}
