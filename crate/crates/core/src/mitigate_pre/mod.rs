//! Pre-processing mitigation: instance reweighing, learned fair
//! representations and disparate-impact repair.

mod dir;
mod lfr;

pub use dir::{dir_repair, FeatureRepair, RepairPlan};
pub use lfr::{lfr_fit, lfr_objective, lfr_transform, LfrConfig, LfrLosses, LfrModel};

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

/// Cell weights `P(s)·P(c) / P(s, c)`, indexed `[group][class]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReweighingMap {
    pub weights: [[f64; 2]; 2],
}

impl ReweighingMap {
    /// Estimates the cell weights from the (already weighted) training data.
    pub fn fit(ds: &TabularDataset) -> Result<Self> {
        let mut mass = [[0.0f64; 2]; 2];
        for i in 0..ds.len() {
            mass[usize::from(ds.protected()[i])][usize::from(ds.labels()[i])] += ds.weights()[i];
        }
        let total: f64 = mass.iter().flatten().sum();
        let group = [mass[0][0] + mass[0][1], mass[1][0] + mass[1][1]];
        let class = [mass[0][0] + mass[1][0], mass[0][1] + mass[1][1]];
        let mut weights = [[0.0; 2]; 2];
        for s in 0..2 {
            for c in 0..2 {
                if mass[s][c] == 0.0 {
                    return Err(Error::UndefinedRatio(format!(
                        "no instances with group {s} and class {c}"
                    )));
                }
                weights[s][c] = group[s] * class[c] / (total * mass[s][c]);
            }
        }
        Ok(ReweighingMap { weights })
    }

    pub fn weight(&self, group: u8, class: u8) -> f64 {
        self.weights[usize::from(group)][usize::from(class)]
    }

    /// Multiplies each instance weight by its cell weight.
    pub fn apply(&self, ds: &TabularDataset) -> Result<TabularDataset> {
        let w = (0..ds.len())
            .map(|i| ds.weights()[i] * self.weight(ds.protected()[i], ds.labels()[i]))
            .collect();
        ds.with_weights(w)
    }
}

/// Returns `ds` with weights that make group and class independent.
pub fn reweigh(ds: &TabularDataset) -> Result<TabularDataset> {
    ReweighingMap::fit(ds)?.apply(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(spec: &[(u8, u8, usize)]) -> TabularDataset {
        let (mut labels, mut protected) = (Vec::new(), Vec::new());
        for &(s, c, n) in spec {
            for _ in 0..n {
                protected.push(s);
                labels.push(c);
            }
        }
        let n = labels.len();
        TabularDataset::new(vec![0.0; n], vec!["x".into()], labels, protected, None).unwrap()
    }

    #[test]
    fn hand_case() {
        // protected (s=0): 4 rows, 2 favorable; unprotected: 6 rows, 4 favorable
        let ds = cells(&[(0, 1, 2), (0, 0, 2), (1, 1, 4), (1, 0, 2)]);
        let map = ReweighingMap::fit(&ds).unwrap();
        assert!((map.weight(0, 1) - 1.2).abs() < 1e-12);
        let out = reweigh(&ds).unwrap();
        let total: f64 = out.weights().iter().sum();
        assert!((total - 10.0).abs() < 1e-9);
        assert!((out.weighted_favorable_rate(0) - out.weighted_favorable_rate(1)).abs() < 1e-12);
        assert_eq!(out.labels(), ds.labels());
        assert_eq!(out.protected(), ds.protected());
    }

    #[test]
    fn independent_data_unit_weights() {
        let ds = cells(&[(0, 1, 3), (0, 0, 1), (1, 1, 6), (1, 0, 2)]);
        let out = reweigh(&ds).unwrap();
        assert!(out.weights().iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_cell_is_error() {
        let ds = cells(&[(0, 1, 3), (1, 1, 2), (1, 0, 2)]);
        assert!(matches!(ReweighingMap::fit(&ds), Err(Error::UndefinedRatio(_))));
    }
}
