//! Learned fair representations.
//!
//! Each instance is encoded by its soft membership in `k` prototypes,
//! `M_nk = softmax_k(−‖x_n − v_k‖²)`, on z-scored features. Training minimizes
//!
//! ```text
//! A_z·Σ_k |mean_{s=1} M_·k − mean_{s=0} M_·k| + A_x·mean‖x − Σ_k M_·k v_k‖² + A_y·CE(y, Σ_k M_·k w_k)
//! ```
//!
//! with `w_k = σ(u_k)`, by monotone gradient descent from prototypes seeded
//! on random training rows.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{minimize, sigmoid, Standardizer};
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfrConfig {
    pub k: usize,
    pub a_z: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub threshold: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub tolerance: f64,
}

impl Default for LfrConfig {
    fn default() -> Self {
        LfrConfig {
            k: 5,
            a_z: 50.0,
            a_x: 0.01,
            a_y: 1.0,
            threshold: 0.5,
            seed: 0,
            max_iter: 500,
            learning_rate: 0.5,
            tolerance: 1e-7,
        }
    }
}

impl LfrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("LFR needs k >= 2, got {}", self.k)));
        }
        for (name, a) in [("a_z", self.a_z), ("a_x", self.a_x), ("a_y", self.a_y)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("LFR threshold must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("LFR optimizer budget must be positive".into()));
        }
        Ok(())
    }
}

/// The three loss terms and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfrLosses {
    pub parity: f64,
    pub reconstruction: f64,
    pub prediction: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfrModel {
    /// Row-major `k × d` prototypes in z-scored space.
    pub prototypes: Vec<f64>,
    /// Favorable probability attached to each prototype.
    pub prototype_probability: Vec<f64>,
    pub standardizer: Standardizer,
    pub config: LfrConfig,
    pub losses: LfrLosses,
    /// Total loss after each optimizer step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn memberships_into(x: &[f64], prototypes: &[f64], d: usize, out: &mut [f64]) {
    for (k, v) in prototypes.chunks(d).enumerate() {
        out[k] = -x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for m in out.iter_mut() {
        *m = (*m - max).exp();
        z += *m;
    }
    for m in out.iter_mut() {
        *m /= z;
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

struct Problem<'a> {
    x: Vec<f64>,
    d: usize,
    k: usize,
    y: &'a [u8],
    group: &'a [u8],
    group_size: [f64; 2],
    a: (f64, f64, f64),
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn loss_and_grad(&self, params: &[f64]) -> (LfrLosses, Vec<f64>) {
        let (n, d, k) = (self.n(), self.d, self.k);
        let nf = n as f64;
        let (a_z, a_x, a_y) = self.a;
        let (v, u) = params.split_at(k * d);
        let w: Vec<f64> = u.iter().map(|&u| sigmoid(u)).collect();

        let mut m = vec![0.0; n * k];
        let mut mean = [vec![0.0; k], vec![0.0; k]];
        for i in 0..n {
            let mi = &mut m[i * k..(i + 1) * k];
            memberships_into(self.row(i), v, d, mi);
            let g = usize::from(self.group[i]);
            for (acc, &mk) in mean[g].iter_mut().zip(mi.iter()) {
                *acc += mk / self.group_size[g];
            }
        }
        let gap: Vec<f64> = (0..k).map(|j| mean[1][j] - mean[0][j]).collect();
        let parity: f64 = gap.iter().map(|g| g.abs()).sum();

        let mut grad = vec![0.0; params.len()];
        let (gv, gu) = grad.split_at_mut(k * d);
        let (mut recon, mut pred) = (0.0, 0.0);
        let mut xhat = vec![0.0; d];
        let mut big_g = vec![0.0; k];
        for i in 0..n {
            let xi = self.row(i);
            let mi = &m[i * k..(i + 1) * k];
            xhat.iter_mut().for_each(|c| *c = 0.0);
            for (j, vj) in v.chunks(d).enumerate() {
                for (c, &vc) in xhat.iter_mut().zip(vj) {
                    *c += mi[j] * vc;
                }
            }
            let r: Vec<f64> = xhat.iter().zip(xi).map(|(a, b)| a - b).collect();
            recon += r.iter().map(|c| c * c).sum::<f64>();

            let y = f64::from(self.y[i]);
            let yhat = clamp_prob(mi.iter().zip(&w).map(|(a, b)| a * b).sum());
            pred -= y * yhat.ln() + (1.0 - y) * (1.0 - yhat).ln();
            let dyhat = (yhat - y) / (yhat * (1.0 - yhat)) / nf;

            let side = if self.group[i] == 1 {
                1.0 / self.group_size[1]
            } else {
                -1.0 / self.group_size[0]
            };
            let mut s = 0.0;
            for (j, vj) in v.chunks(d).enumerate() {
                let gz = gap[j].signum() * side * f64::from(u8::from(gap[j] != 0.0));
                let gx = 2.0 / nf * r.iter().zip(vj).map(|(a, b)| a * b).sum::<f64>();
                big_g[j] = a_z * gz + a_x * gx + a_y * dyhat * w[j];
                s += mi[j] * big_g[j];
            }
            for (j, vj) in v.chunks(d).enumerate() {
                let da = mi[j] * (big_g[j] - s);
                let gvj = &mut gv[j * d..(j + 1) * d];
                for c in 0..d {
                    gvj[c] += 2.0 * da * (xi[c] - vj[c]) + a_x * 2.0 / nf * mi[j] * r[c];
                }
                gu[j] += a_y * dyhat * mi[j] * w[j] * (1.0 - w[j]);
            }
        }
        let reconstruction = recon / nf;
        let prediction = pred / nf;
        let losses = LfrLosses {
            parity,
            reconstruction,
            prediction,
            total: a_z * parity + a_x * reconstruction + a_y * prediction,
        };
        (losses, grad)
    }
}

fn problem<'a>(ds: &'a TabularDataset, standardizer: &Standardizer, cfg: &LfrConfig) -> Result<Problem<'a>> {
    let mut group_size = [0.0; 2];
    for &s in ds.protected() {
        group_size[usize::from(s)] += 1.0;
    }
    if group_size.contains(&0.0) {
        return Err(Error::EmptyGroup("LFR training data lacks a group".into()));
    }
    Ok(Problem {
        x: standardizer.transform(ds),
        d: ds.n_features(),
        k: cfg.k,
        y: ds.labels(),
        group: ds.protected(),
        group_size,
        a: (cfg.a_z, cfg.a_x, cfg.a_y),
    })
}

/// Total loss and gradient at a flat parameter vector `[prototypes…, u…]`,
/// on unscaled features.
pub fn lfr_objective(ds: &TabularDataset, cfg: &LfrConfig, params: &[f64]) -> Result<(LfrLosses, Vec<f64>)> {
    let p = problem(ds, &Standardizer::identity(ds.n_features()), cfg)?;
    Ok(p.loss_and_grad(params))
}

pub fn lfr_fit(train: &TabularDataset, cfg: &LfrConfig) -> Result<LfrModel> {
    cfg.validate()?;
    let n = train.len();
    if cfg.k > n {
        return Err(Error::Config(format!("LFR k = {} exceeds {n} training rows", cfg.k)));
    }
    let standardizer = Standardizer::fit(train);
    let p = problem(train, &standardizer, cfg)?;
    let d = p.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = Vec::with_capacity(cfg.k * (d + 1));
    for i in sample(&mut rng, n, cfg.k) {
        init.extend_from_slice(p.row(i));
    }
    init.extend(std::iter::repeat(0.0).take(cfg.k));

    let out = minimize(
        |theta| {
            let (l, g) = p.loss_and_grad(theta);
            (l.total, g)
        },
        init,
        cfg.learning_rate,
        cfg.max_iter,
        cfg.tolerance,
    )?;
    let (losses, _) = p.loss_and_grad(&out.params);
    if !losses.total.is_finite() {
        return Err(Error::Divergence("LFR loss is not finite".into()));
    }
    let (v, u) = out.params.split_at(cfg.k * d);
    Ok(LfrModel {
        prototypes: v.to_vec(),
        prototype_probability: u.iter().map(|&u| sigmoid(u)).collect(),
        standardizer,
        config: cfg.clone(),
        losses,
        trace: out.trace,
        converged: out.converged,
    })
}

impl LfrModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn check(&self, ds: &TabularDataset) -> Result<()> {
        if ds.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: ds.n_features(),
            });
        }
        Ok(())
    }

    /// Row-major `n × k` memberships.
    pub fn memberships(&self, ds: &TabularDataset) -> Result<Vec<f64>> {
        self.check(ds)?;
        let d = self.n_features();
        let k = self.config.k;
        let mut z = vec![0.0; d];
        let mut out = vec![0.0; ds.len() * k];
        for (i, row) in ds.rows().enumerate() {
            self.standardizer.transform_into(row, &mut z);
            memberships_into(&z, &self.prototypes, d, &mut out[i * k..(i + 1) * k]);
        }
        Ok(out)
    }

    /// Favorable probability of each instance under the representation.
    pub fn predict_proba(&self, ds: &TabularDataset) -> Result<Vec<f64>> {
        let k = self.config.k;
        let m = self.memberships(ds)?;
        Ok(m.chunks(k)
            .map(|mi| mi.iter().zip(&self.prototype_probability).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Prototypes mapped back to the original feature scale.
    pub fn prototypes_original(&self) -> Vec<f64> {
        let d = self.n_features();
        self.prototypes
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.standardizer.scale[i % d] + self.standardizer.mean[i % d])
            .collect()
    }
}

/// Replaces features by their prototype reconstruction (original scale).
/// With `relabel`, labels become the representation's thresholded predictions.
pub fn lfr_transform(model: &LfrModel, ds: &TabularDataset, relabel: bool) -> Result<TabularDataset> {
    let d = model.n_features();
    let k = model.config.k;
    let m = model.memberships(ds)?;
    let protos = model.prototypes_original();
    let mut x = vec![0.0; ds.len() * d];
    for (i, mi) in m.chunks(k).enumerate() {
        let xi = &mut x[i * d..(i + 1) * d];
        for (j, vj) in protos.chunks(d).enumerate() {
            for (c, &vc) in xi.iter_mut().zip(vj) {
                *c += mi[j] * vc;
            }
        }
    }
    let out = ds.with_features(x)?;
    if relabel {
        let labels = model
            .predict_proba(ds)?
            .iter()
            .map(|&p| u8::from(p >= model.config.threshold))
            .collect();
        return out.with_labels(labels);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn gaussian_groups(n: usize, seed: u64) -> TabularDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let (mut y, mut s) = (Vec::new(), Vec::new());
        for i in 0..n {
            let g = (i % 2) as u8;
            let shift = if g == 1 { 1.5 } else { -1.5 };
            x.push(shift + rng.gen_range(-1.0..1.0));
            x.push(rng.gen_range(-1.0..1.0));
            y.push(u8::from(x[2 * i + 1] > 0.0));
            s.push(g);
        }
        TabularDataset::new(x, vec!["a".into(), "b".into()], y, s, None).unwrap()
    }

    #[test]
    fn parity_term_driven_down() {
        let ds = gaussian_groups(200, 1);
        let cfg = LfrConfig {
            a_z: 1.0,
            a_x: 0.0,
            a_y: 0.0,
            max_iter: 2000,
            ..LfrConfig::default()
        };
        let model = lfr_fit(&ds, &cfg).unwrap();
        assert!(model.losses.parity < 0.02, "parity {}", model.losses.parity);
    }

    #[test]
    fn loss_trace_non_increasing() {
        let ds = gaussian_groups(100, 2);
        let model = lfr_fit(&ds, &LfrConfig::default()).unwrap();
        assert!(model.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn memorizing_prototypes() {
        let ds = gaussian_groups(6, 3);
        let cfg = LfrConfig {
            k: 6,
            a_z: 0.0,
            a_x: 1.0,
            a_y: 0.0,
            max_iter: 3000,
            ..LfrConfig::default()
        };
        let model = lfr_fit(&ds, &cfg).unwrap();
        assert!(model.losses.reconstruction < 0.05, "{}", model.losses.reconstruction);
    }

    #[test]
    fn memberships_are_distributions_and_hull_holds() {
        let ds = gaussian_groups(80, 4);
        let model = lfr_fit(&ds, &LfrConfig { max_iter: 50, ..LfrConfig::default() }).unwrap();
        let m = model.memberships(&ds).unwrap();
        assert!(m.chunks(5).all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        let out = lfr_transform(&model, &ds, false).unwrap();
        let protos = model.prototypes_original();
        for c in 0..2 {
            let lo = protos.chunks(2).map(|v| v[c]).fold(f64::INFINITY, f64::min);
            let hi = protos.chunks(2).map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
            assert!(out.rows().all(|r| r[c] >= lo - 1e-9 && r[c] <= hi + 1e-9));
        }
        assert_eq!(out.labels(), ds.labels());
        assert_eq!(out.protected(), ds.protected());
    }

    #[test]
    fn sharp_membership_reconstructs_prototype() {
        let ds = gaussian_groups(10, 5);
        let mut model = lfr_fit(&ds, &LfrConfig { max_iter: 1, ..LfrConfig::default() }).unwrap();
        model.standardizer = Standardizer::identity(2);
        model.prototypes = vec![0.0, 0.0, 100.0, 0.0, 0.0, 100.0, -100.0, 0.0, 0.0, -100.0];
        let probe = TabularDataset::new(
            vec![100.0, 0.0, 0.0, -100.0],
            vec!["a".into(), "b".into()],
            vec![1, 0],
            vec![0, 1],
            None,
        )
        .unwrap();
        let out = lfr_transform(&model, &probe, false).unwrap();
        assert_eq!(out.features(), probe.features());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = gaussian_groups(30, 6);
        let cfg = LfrConfig { k: 3, a_z: 2.0, a_x: 0.5, a_y: 1.0, ..LfrConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params: Vec<f64> = (0..3 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = lfr_objective(&ds, &cfg, &params).unwrap();
        let h = 1e-6;
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut dn = params.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (lfr_objective(&ds, &cfg, &up).unwrap().0.total - lfr_objective(&ds, &cfg, &dn).unwrap().0.total) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-5 * (1.0 + fd.abs()), "param {j}: fd {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn config_checks() {
        let ds = gaussian_groups(10, 8);
        assert!(lfr_fit(&ds, &LfrConfig { k: 1, ..LfrConfig::default() }).is_err());
        assert!(lfr_fit(&ds, &LfrConfig { k: 11, ..LfrConfig::default() }).is_err());
        assert!(lfr_fit(&ds, &LfrConfig { a_z: -1.0, ..LfrConfig::default() }).is_err());
    }
}
