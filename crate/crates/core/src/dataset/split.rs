use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};

/// Part sizes of a stratified split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const fn new(train: f64, validation: f64, test: f64) -> Self {
        SplitFractions {
            train,
            validation,
            test,
        }
    }

    fn check(&self) -> Result<()> {
        for (name, f) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&f) || !f.is_finite() {
                return Err(Error::Config(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Disjoint train / validation / test index sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn has_validation(&self) -> bool {
        !self.validation.is_empty()
    }
}

fn indices_by_class(labels: &[u8], pool: &[usize]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for &i in pool {
        by_class[usize::from(labels[i])].push(i);
    }
    by_class
}

/// Random split stratified on the label; deterministic for a fixed seed.
pub fn stratified_split(
    ds: &TabularDataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<DataSplit> {
    fractions.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut split = DataSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in indices_by_class(ds.labels(), &all).into_iter().enumerate() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = (n as f64 * fractions.train).round() as usize;
        let n_val = ((n as f64 * fractions.validation).round() as usize).min(n - n_train);
        let n_test = n - n_train - n_val;
        let wanted = [
            (fractions.train, n_train),
            (fractions.validation, n_val),
            (fractions.test, n_test),
        ];
        if wanted.iter().any(|&(f, k)| f > 0.0 && k == 0) {
            return Err(Error::Data(format!(
                "label class {class} has {n} instances, too few to stratify"
            )));
        }
        split.train.extend_from_slice(&idx[..n_train]);
        split.validation.extend_from_slice(&idx[n_train..n_train + n_val]);
        split.test.extend_from_slice(&idx[n_train + n_val..]);
    }
    if split.train.is_empty() {
        return Err(Error::EmptyPart("train".into()));
    }
    if split.test.is_empty() {
        return Err(Error::EmptyPart("test".into()));
    }
    split.train.shuffle(&mut rng);
    split.validation.shuffle(&mut rng);
    split.test.shuffle(&mut rng);
    Ok(split)
}

/// One cross-validation fold over an index pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Folds over the subset `pool` of the dataset's rows.
    pub fn over(labels: &[u8], pool: &[usize], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
        }
        let by_class = indices_by_class(labels, pool);
        let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
        if k > minority {
            return Err(Error::Config(format!(
                "{k} folds exceed the minority class count {minority}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = vec![Vec::new(); k];
        let mut counter = 0usize;
        for mut idx in by_class {
            idx.shuffle(&mut rng);
            for i in idx {
                assignment[counter % k].push(i);
                counter += 1;
            }
        }
        let mut fold_of = vec![usize::MAX; labels.len()];
        for (f, idx) in assignment.iter().enumerate() {
            for &i in idx {
                fold_of[i] = f;
            }
        }
        let folds = (0..k)
            .map(|f| Fold {
                train: pool.iter().copied().filter(|&i| fold_of[i] != f).collect(),
                test: assignment[f].clone(),
            })
            .collect();
        Ok(FoldPlan { k, seed, folds })
    }

    /// Hash of the fold assignment, used to check paired-seed discipline.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for f in &self.folds {
            f.test.hash(&mut h);
        }
        h.finish()
    }
}

/// Stratified k-fold plan over every row.
pub fn kfold(ds: &TabularDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let all: Vec<usize> = (0..ds.len()).collect();
    FoldPlan::over(ds.labels(), &all, k, seed)
}

/// Splits `indices` into (fit, validation): per label class, the last
/// `fraction` of that class's indices (in the given order) go to validation.
pub fn carve_validation(labels: &[u8], indices: &[usize], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let by_class = indices_by_class(labels, indices);
    let mut take = [0usize; 2];
    for c in 0..2 {
        take[c] = ((by_class[c].len() as f64) * fraction).round() as usize;
    }
    let mut seen = [0usize; 2];
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for &i in indices {
        let c = usize::from(labels[i]);
        let keep = by_class[c].len() - take[c];
        if seen[c] < keep {
            fit.push(i);
        } else {
            val.push(i);
        }
        seen[c] += 1;
    }
    (fit, val)
}

/// Statistical parity difference of the raw labels, per split part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartParity {
    pub train: f64,
    pub validation: Option<f64>,
    pub test: f64,
}

fn label_parity(ds: &TabularDataset, idx: &[usize], part: &str) -> Result<f64> {
    let mut fav = [0usize; 2];
    let mut tot = [0usize; 2];
    for &i in idx {
        let g = usize::from(ds.protected()[i]);
        tot[g] += 1;
        fav[g] += usize::from(ds.labels()[i]);
    }
    if tot[0] == 0 || tot[1] == 0 {
        return Err(Error::EmptyGroup(format!("{part} part lacks a protected group")));
    }
    Ok(fav[0] as f64 / tot[0] as f64 - fav[1] as f64 / tot[1] as f64)
}

pub fn split_parity(ds: &TabularDataset, split: &DataSplit) -> Result<PartParity> {
    Ok(PartParity {
        train: label_parity(ds, &split.train, "train")?,
        validation: if split.has_validation() {
            Some(label_parity(ds, &split.validation, "validation")?)
        } else {
            None
        },
        test: label_parity(ds, &split.test, "test")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, pos: usize) -> TabularDataset {
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < pos)).collect();
        let protected: Vec<u8> = (0..n).map(|i| (i % 3 != 0) as u8).collect();
        let features = (0..n).map(|i| i as f64).collect();
        TabularDataset::new(features, vec!["x".into()], labels, protected, None).unwrap()
    }

    #[test]
    fn seventy_thirty() {
        let ds = synthetic(1000, 700);
        let s = stratified_split(&ds, SplitFractions::new(0.7, 0.0, 0.3), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (700, 0, 300));
    }

    #[test]
    fn everything_in_train_is_empty_part() {
        let ds = synthetic(100, 50);
        let err = stratified_split(&ds, SplitFractions::new(1.0, 0.0, 0.0), 1).unwrap_err();
        assert!(matches!(err, Error::EmptyPart(_)));
    }

    #[test]
    fn bad_fractions_rejected() {
        let ds = synthetic(100, 50);
        assert!(stratified_split(&ds, SplitFractions::new(0.7, 0.2, 0.2), 1).is_err());
        assert!(stratified_split(&ds, SplitFractions::new(1.2, 0.0, -0.2), 1).is_err());
    }

    #[test]
    fn kfold_sizes_and_partition() {
        let ds = synthetic(1000, 700);
        let plan = kfold(&ds, 10, 3).unwrap();
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        assert!(plan.folds.iter().all(|f| f.test.len() == 100 && f.train.len() == 900));
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_balanced_tiny() {
        let ds = synthetic(10, 5);
        let plan = kfold(&ds, 5, 9).unwrap();
        for f in &plan.folds {
            let pos = f.test.iter().filter(|&&i| ds.labels()[i] == 1).count();
            assert_eq!((f.test.len(), pos), (2, 1));
        }
    }

    #[test]
    fn kfold_preconditions() {
        let ds = synthetic(10, 3);
        assert!(kfold(&ds, 1, 0).is_err());
        assert!(kfold(&ds, 4, 0).is_err());
        assert!(kfold(&ds, 3, 0).is_ok());
    }

    #[test]
    fn carve_is_stratified_tail() {
        let labels = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let idx: Vec<usize> = (0..10).collect();
        let (fit, val) = carve_validation(&labels, &idx, 0.2);
        assert_eq!(val, vec![4, 9]);
        assert_eq!(fit.len(), 8);
    }

    #[test]
    fn identical_base_rates_zero_parity() {
        // two groups, each half favorable
        let labels = vec![1, 0, 1, 0, 1, 0, 1, 0];
        let protected = vec![0, 0, 1, 1, 0, 0, 1, 1];
        let ds = TabularDataset::new(vec![0.0; 8], vec!["x".into()], labels, protected, None).unwrap();
        let split = DataSplit {
            train: vec![0, 1, 2, 3],
            validation: vec![],
            test: vec![4, 5, 6, 7],
        };
        let p = split_parity(&ds, &split).unwrap();
        assert_eq!((p.train, p.validation, p.test), (0.0, None, 0.0));
    }
}
