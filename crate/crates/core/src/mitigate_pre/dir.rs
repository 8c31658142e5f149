//! Rank-preserving partial repair of numeric features.
//!
//! A value `x` of group `g` sits at quantile `u = F_g(x)` of its group; the
//! target is `T(u)`, the pointwise median of the group quantile functions,
//! and the repaired value is `(1 − λ)·x + λ·T(u)`.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureKind, TabularDataset};
use crate::error::{Error, Result};

/// Sorted sample of one feature within one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GroupSample {
    sorted: Vec<f64>,
}

impl GroupSample {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        GroupSample { sorted: values }
    }

    /// Mid-rank position of `x`: ties share the average of their ranks.
    fn cdf(&self, x: f64) -> f64 {
        let lo = self.sorted.partition_point(|&v| v < x);
        let hi = self.sorted.partition_point(|&v| v <= x);
        (lo + hi) as f64 / (2 * self.sorted.len()) as f64
    }

    /// Quantile with sample `i` placed at `(i + 0.5) / n`, linear in between.
    fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = u * n as f64 - 0.5;
        if pos <= 0.0 {
            return self.sorted[0];
        }
        if pos >= (n - 1) as f64 {
            return self.sorted[n - 1];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        self.sorted[i] + t * (self.sorted[i + 1] - self.sorted[i])
    }
}

/// Repair map for one feature column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRepair {
    pub column: usize,
    groups: [GroupSample; 2],
}

impl FeatureRepair {
    pub fn target(&self, u: f64) -> f64 {
        // the median of two values is their midpoint
        0.5 * (self.groups[0].quantile(u) + self.groups[1].quantile(u))
    }

    pub fn repair(&self, x: f64, group: u8, lambda: f64) -> f64 {
        let u = self.groups[usize::from(group)].cdf(x);
        (1.0 - lambda) * x + lambda * self.target(u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairPlan {
    pub lambda: f64,
    pub features: Vec<FeatureRepair>,
}

impl RepairPlan {
    /// Learns group distributions of every numeric column not named in `keep`.
    pub fn fit(ds: &TabularDataset, lambda: f64, keep: &[String]) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("repair level {lambda} outside [0, 1]")));
        }
        let mut features = Vec::new();
        for (j, kind) in ds.feature_kinds().iter().enumerate() {
            if *kind != FeatureKind::Numeric || keep.contains(&ds.feature_names()[j]) {
                continue;
            }
            let mut by_group = [Vec::new(), Vec::new()];
            for (row, &s) in ds.rows().zip(ds.protected()) {
                by_group[usize::from(s)].push(row[j]);
            }
            let [a, b] = by_group;
            features.push(FeatureRepair {
                column: j,
                groups: [GroupSample::new(a), GroupSample::new(b)],
            });
        }
        Ok(RepairPlan { lambda, features })
    }

    /// Repairs `ds` using the fitted group distributions; labels, flags and weights are kept.
    pub fn transform(&self, ds: &TabularDataset) -> Result<TabularDataset> {
        if self.lambda == 0.0 {
            return Ok(ds.clone());
        }
        let d = ds.n_features();
        if let Some(f) = self.features.iter().find(|f| f.column >= d) {
            return Err(Error::DimensionMismatch {
                expected: f.column + 1,
                got: d,
            });
        }
        let mut x = ds.features().to_vec();
        for (i, &s) in ds.protected().iter().enumerate() {
            for f in &self.features {
                let cell = &mut x[i * d + f.column];
                *cell = f.repair(*cell, s, self.lambda);
            }
        }
        ds.with_features(x)
    }
}

/// Fits and applies a repair of every numeric feature at level `lambda`.
pub fn dir_repair(ds: &TabularDataset, lambda: f64) -> Result<TabularDataset> {
    RepairPlan::fit(ds, lambda, &[])?.transform(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_groups(a: &[f64], b: &[f64]) -> TabularDataset {
        let features: Vec<f64> = a.iter().chain(b).copied().collect();
        let protected: Vec<u8> = a.iter().map(|_| 0).chain(b.iter().map(|_| 1)).collect();
        let labels: Vec<u8> = (0..features.len()).map(|i| (i % 2) as u8).collect();
        TabularDataset::new(features, vec!["x".into()], labels, protected, None).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let ds = two_groups(&[1.5, 2.25, 3.0], &[3.0, 4.0, 5.0]);
        let out = dir_repair(&ds, 0.0).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn full_repair_to_median_distribution() {
        let ds = two_groups(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]);
        let out = dir_repair(&ds, 1.0).unwrap();
        assert_eq!(out.features(), &[2.0, 3.0, 4.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.labels(), ds.labels());
        assert_eq!(out.protected(), ds.protected());
    }

    #[test]
    fn partial_repair_and_order() {
        let ds = two_groups(&[5.0, 1.0, 3.0, 2.0], &[10.0, 12.0, 11.0, 9.0]);
        let out = dir_repair(&ds, 0.5).unwrap();
        let f = out.features();
        assert!(f[1] < f[3] && f[3] < f[2] && f[2] < f[0]);
        assert!(f[7] < f[4] && f[4] < f[6] && f[6] < f[5]);
    }

    #[test]
    fn ties_share_a_target() {
        let ds = two_groups(&[2.0, 2.0, 7.0], &[1.0, 4.0, 9.0]);
        let out = dir_repair(&ds, 1.0).unwrap();
        assert_eq!(out.features()[0], out.features()[1]);
    }

    #[test]
    fn indicators_and_kept_columns_untouched() {
        let features = vec![1.0, 0.0, 2.0, 1.0, 8.0, 0.0, 9.0, 1.0];
        let ds = TabularDataset::new(
            features.clone(),
            vec!["age".into(), "job=a".into()],
            vec![1, 0, 1, 0],
            vec![0, 0, 1, 1],
            None,
        )
        .unwrap();
        let plan = RepairPlan::fit(&ds, 1.0, &["age".to_string()]).unwrap();
        assert!(plan.features.is_empty());
        assert_eq!(plan.transform(&ds).unwrap().features(), &features[..]);
    }

    #[test]
    fn level_outside_unit_interval() {
        let ds = two_groups(&[1.0, 2.0], &[3.0, 4.0]);
        assert!(dir_repair(&ds, 1.5).is_err());
        assert!(dir_repair(&ds, -0.1).is_err());
    }
}
