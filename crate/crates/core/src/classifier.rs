//! Weighted, L2-regularized binary logistic regression.
//!
//! Fitting minimizes
//!
//! ```text
//! J(β, b) = (1/N) Σ w_i [log(1 + e^{z_i}) − y_i z_i] + (λ/2)‖β‖² + penalty(p)
//! ```
//!
//! with `z_i = β·x̃_i + b` on z-scored features. The optimizer is gradient
//! descent with a fixed step, Nesterov momentum and a monotone restart: a step
//! that would raise `J` is replaced by a plain gradient step from the current
//! iterate (halving the step if needed), so the loss sequence never increases.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1e-3,
            learning_rate: 0.5,
            max_iter: 3000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config("l2 strength must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-feature z-scoring fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &TabularDataset) -> Self {
        let (n, d) = (ds.len() as f64, ds.n_features());
        let mut mean = vec![0.0; d];
        for r in ds.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in ds.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    /// Row-major standardized copy of the dataset features.
    pub fn transform(&self, ds: &TabularDataset) -> Vec<f64> {
        let d = ds.n_features();
        let mut out = vec![0.0; ds.len() * d];
        for (i, r) in ds.rows().enumerate() {
            self.transform_into(r, &mut out[i * d..(i + 1) * d]);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Coefficients on standardized features.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
    pub converged: bool,
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

const PROBA_EPS: f64 = 1e-15;

impl LogisticModel {
    /// A model that scores every row with the same probability.
    pub fn constant(standardizer: Standardizer, probability: f64, config: TrainConfig) -> Self {
        let p = probability.clamp(1e-9, 1.0 - 1e-9);
        LogisticModel {
            coefficients: vec![0.0; standardizer.mean.len()],
            intercept: (p / (1.0 - p)).ln(),
            standardizer,
            config,
            converged: true,
            iterations: 0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for j in 0..row.len() {
            z += self.coefficients[j] * (row[j] - self.standardizer.mean[j]) / self.standardizer.scale[j];
        }
        z
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LogisticModel = serde_json::from_str(text)?;
        if model.standardizer.mean.len() != model.coefficients.len()
            || model.standardizer.scale.len() != model.coefficients.len()
        {
            return Err(Error::Data("model standardizer does not match coefficients".into()));
        }
        Ok(model)
    }
}

/// Probability of the favorable label for every row, strictly inside (0, 1).
pub fn predict_proba(model: &LogisticModel, ds: &TabularDataset) -> Result<Vec<f64>> {
    if ds.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: ds.n_features(),
        });
    }
    Ok(ds
        .rows()
        .map(|r| sigmoid(model.score_row(r)).clamp(PROBA_EPS, 1.0 - PROBA_EPS))
        .collect())
}

/// Favorable (1) iff probability ≥ threshold; ties go to favorable.
pub fn threshold_labels(probabilities: &[f64], threshold: f64) -> Vec<u8> {
    probabilities.iter().map(|&p| u8::from(p >= threshold)).collect()
}

pub fn predict_label(model: &LogisticModel, ds: &TabularDataset, threshold: f64) -> Result<Vec<u8>> {
    Ok(threshold_labels(&predict_proba(model, ds)?, threshold))
}

/// Extra differentiable term on the vector of predicted probabilities.
pub trait ProbabilityPenalty: Sync {
    /// Returns the penalty value and its gradient with respect to each probability.
    fn value_and_grad(&self, probabilities: &[f64]) -> (f64, Vec<f64>);
}

/// The training objective on a fixed design; parameters are `[β…, b]`.
pub struct LogisticObjective<'a> {
    design: Vec<f64>,
    d: usize,
    labels: Vec<f64>,
    weights: &'a [f64],
    l2: f64,
    penalty: Option<&'a dyn ProbabilityPenalty>,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(
        ds: &'a TabularDataset,
        standardizer: &Standardizer,
        l2: f64,
        penalty: Option<&'a dyn ProbabilityPenalty>,
    ) -> Self {
        LogisticObjective {
            design: standardizer.transform(ds),
            d: ds.n_features(),
            labels: ds.labels().iter().map(|&l| f64::from(l)).collect(),
            weights: ds.weights(),
            l2,
            penalty,
        }
    }

    pub fn n_params(&self) -> usize {
        self.d + 1
    }

    fn scores(&self, params: &[f64]) -> Vec<f64> {
        let (beta, b) = params.split_at(self.d);
        self.design
            .chunks(self.d.max(1))
            .take(self.labels.len())
            .map(|x| b[0] + x.iter().zip(beta).map(|(x, w)| x * w).sum::<f64>())
            .collect()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.value_and_grad(params).0
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.value_and_grad(params).1
    }

    pub fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.labels.len() as f64;
        let d = self.d;
        let z = self.scores(params);
        let p: Vec<f64> = z.iter().map(|&z| sigmoid(z)).collect();
        let beta = &params[..d];

        let mut value = 0.0;
        // dJ/dz_i
        let mut dz = vec![0.0; z.len()];
        for i in 0..z.len() {
            value += self.weights[i] * (softplus(z[i]) - self.labels[i] * z[i]);
            dz[i] = self.weights[i] * (p[i] - self.labels[i]) / n;
        }
        value /= n;
        value += 0.5 * self.l2 * beta.iter().map(|b| b * b).sum::<f64>();

        if let Some(pen) = self.penalty {
            let (pv, pg) = pen.value_and_grad(&p);
            value += pv;
            for i in 0..z.len() {
                dz[i] += pg[i] * p[i] * (1.0 - p[i]);
            }
        }

        let mut grad = vec![0.0; d + 1];
        for (i, x) in self.design.chunks(d.max(1)).take(z.len()).enumerate() {
            for j in 0..d {
                grad[j] += dz[i] * x[j];
            }
            grad[d] += dz[i];
        }
        for j in 0..d {
            grad[j] += self.l2 * beta[j];
        }
        (value, grad)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Outcome of [`minimize`].
pub struct Minimized {
    pub params: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Monotone accelerated gradient descent on `f`, which returns `(value, gradient)`.
pub fn minimize<F>(f: F, init: Vec<f64>, learning_rate: f64, max_iter: usize, tolerance: f64) -> Result<Minimized>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut lr = learning_rate;
    let mut theta = init;
    let (mut fx, mut gx) = f(&theta);
    if !fx.is_finite() {
        return Err(Error::Divergence("non-finite initial objective".into()));
    }
    let mut prev = theta.clone();
    let mut momentum_k = 0usize;
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it;
        if norm(&gx) < tolerance {
            converged = true;
            break;
        }
        let beta = momentum_k as f64 / (momentum_k as f64 + 3.0);
        let y: Vec<f64> = theta
            .iter()
            .zip(&prev)
            .map(|(t, p)| t + beta * (t - p))
            .collect();
        let (_, gy) = if momentum_k == 0 { (fx, gx.clone()) } else { f(&y) };
        let mut cand: Vec<f64> = y.iter().zip(&gy).map(|(y, g)| y - lr * g).collect();
        let (mut fc, mut gc) = f(&cand);
        if !(fc <= fx) {
            momentum_k = 0;
            let mut halvings = 0;
            loop {
                cand = theta.iter().zip(&gx).map(|(t, g)| t - lr * g).collect();
                (fc, gc) = f(&cand);
                if fc <= fx {
                    break;
                }
                lr *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    // no descent possible at machine precision
                    return Ok(Minimized {
                        params: theta,
                        converged: norm(&gx) < tolerance.sqrt(),
                        iterations: it,
                        trace,
                    });
                }
            }
        } else {
            momentum_k += 1;
        }
        if !fc.is_finite() {
            return Err(Error::Divergence("non-finite objective".into()));
        }
        prev = std::mem::replace(&mut theta, cand);
        fx = fc;
        gx = gc;
        trace.push(fx);
        iterations = it + 1;
    }
    if !converged && norm(&gx) < tolerance {
        converged = true;
    }
    Ok(Minimized {
        params: theta,
        converged,
        iterations,
        trace,
    })
}

/// Fits with an optional extra penalty; also returns the objective trace.
pub fn fit_with_penalty(
    ds: &TabularDataset,
    cfg: &TrainConfig,
    penalty: Option<&dyn ProbabilityPenalty>,
) -> Result<(LogisticModel, Vec<f64>)> {
    cfg.validate()?;
    if !(ds.labels().contains(&0) && ds.labels().contains(&1)) {
        return Err(Error::DegenerateLabels);
    }
    let standardizer = Standardizer::fit(ds);
    let objective = LogisticObjective::new(ds, &standardizer, cfg.l2, penalty);
    let init = vec![0.0; objective.n_params()];
    let out = minimize(
        |p| objective.value_and_grad(p),
        init,
        cfg.learning_rate,
        cfg.max_iter,
        cfg.tolerance,
    )?;
    let d = ds.n_features();
    if out.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite coefficients".into()));
    }
    let model = LogisticModel {
        coefficients: out.params[..d].to_vec(),
        intercept: out.params[d],
        standardizer,
        config: cfg.clone(),
        converged: out.converged,
        iterations: out.iterations,
    };
    Ok((model, out.trace))
}

/// Weighted logistic regression on `ds` (instance weights honored).
pub fn fit(ds: &TabularDataset, cfg: &TrainConfig) -> Result<LogisticModel> {
    fit_with_penalty(ds, cfg, None).map(|(m, _)| m)
}
