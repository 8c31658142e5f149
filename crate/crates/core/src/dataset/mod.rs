//! Loan-application data: loading, curation, encoding and splitting.
//!
//! Everything downstream consumes a [`TabularDataset`]: a dense, fully numeric
//! feature matrix plus binary labels (1 = favorable), binary protected flags
//! (1 = privileged) and positive instance weights.

mod builtin;
mod curate;
mod load;
mod schema;
mod split;

pub use builtin::{consumer_loans, consumer_loans_schema, german_credit, german_credit_schema};
pub use curate::{curate, median};
pub use load::{load_csv, load_csv_reader, RawColumn, RawTable};
pub use schema::{ColumnKind, FeatureSchema, ProtectedFeature};
pub use split::{
    carve_validation, kfold, split_parity, stratified_split, DataSplit, Fold, FoldPlan,
    PartParity, SplitFractions,
};

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of an encoded feature column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Continuous or count-valued column; eligible for quantile repair.
    Numeric,
    /// 0/1 indicator produced by one-hot or binary encoding.
    Indicator,
}

impl FeatureKind {
    /// Infers the kind from an encoded column name: indicators are named `column=value`.
    pub fn from_encoded_name(name: &str) -> Self {
        if name.contains('=') {
            FeatureKind::Indicator
        } else {
            FeatureKind::Numeric
        }
    }
}

const LABEL_COLUMN: &str = "__label";
const PROTECTED_COLUMN: &str = "__protected";
const WEIGHT_COLUMN: &str = "__weight";

/// Canonical encoded dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    protected: Vec<u8>,
    weights: Vec<f64>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
}

impl TabularDataset {
    /// Builds a dataset from row-major features, checking every invariant.
    pub fn new(
        features: Vec<f64>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        protected: Vec<u8>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let kinds = feature_names
            .iter()
            .map(|n| FeatureKind::from_encoded_name(n))
            .collect();
        Self::with_kinds(features, feature_names, kinds, labels, protected, weights)
    }

    pub fn with_kinds(
        features: Vec<f64>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        labels: Vec<u8>,
        protected: Vec<u8>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if feature_kinds.len() != d {
            return Err(Error::Data("feature kinds do not match feature names".into()));
        }
        if features.len() != n * d {
            return Err(Error::Data(format!(
                "feature matrix has {} cells, expected {n} x {d}",
                features.len()
            )));
        }
        if protected.len() != n || weights.len() != n {
            return Err(Error::Data("label, protected and weight lengths differ".into()));
        }
        let ds = TabularDataset {
            features,
            n_features: d,
            labels,
            protected,
            weights,
            feature_names,
            feature_kinds,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Data("weights must be positive and finite".into()));
        }
        if self.labels.iter().chain(&self.protected).any(|v| *v > 1) {
            return Err(Error::Data("labels and protected flags must be 0/1".into()));
        }
        if !(self.labels.contains(&0) && self.labels.contains(&1)) {
            return Err(Error::DegenerateLabels);
        }
        if !self.protected.contains(&0) {
            return Err(Error::EmptyGroup("unprivileged".into()));
        }
        if !self.protected.contains(&1) {
            return Err(Error::EmptyGroup("privileged".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.n_features.max(1)).take(self.len())
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn protected(&self) -> &[u8] {
        &self.protected
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let d = self.n_features;
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self::with_kinds(
            features,
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.protected[i]).collect(),
            Some(indices.iter().map(|&i| self.weights[i]).collect()),
        )
    }

    /// Same rows with new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::with_kinds(
            self.features.clone(),
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            self.labels.clone(),
            self.protected.clone(),
            Some(weights),
        )
    }

    /// Same labels, flags and weights with a replaced feature matrix of equal shape.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        Self::with_kinds(
            features,
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            self.labels.clone(),
            self.protected.clone(),
            Some(self.weights.clone()),
        )
    }

    /// Same features with replaced labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::with_kinds(
            self.features.clone(),
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            labels,
            self.protected.clone(),
            Some(self.weights.clone()),
        )
    }

    /// Weighted favorable rate within one protected group.
    pub fn weighted_favorable_rate(&self, group: u8) -> f64 {
        let (mut fav, mut tot) = (0.0, 0.0);
        for i in 0..self.len() {
            if self.protected[i] == group {
                tot += self.weights[i];
                if self.labels[i] == 1 {
                    fav += self.weights[i];
                }
            }
        }
        fav / tot
    }

    /// Writes the encoded dataset as CSV: feature columns, then `__label`,
    /// `__protected`, `__weight`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend([LABEL_COLUMN, PROTECTED_COLUMN, WEIGHT_COLUMN]);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(self.labels[i].to_string());
            rec.push(self.protected[i].to_string());
            rec.push(format!("{}", self.weights[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a dataset written by [`TabularDataset::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let pos = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("encoded dataset lacks `{name}` column")))
        };
        let (li, pi, wi) = (pos(LABEL_COLUMN)?, pos(PROTECTED_COLUMN)?, pos(WEIGHT_COLUMN)?);
        let feature_cols: Vec<usize> = (0..header.len())
            .filter(|c| ![li, pi, wi].contains(c))
            .collect();
        let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
        let (mut features, mut labels, mut protected, mut weights) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                let cell = rec.get(c).unwrap_or("").trim();
                cell.parse::<f64>().map_err(|_| Error::UnparseableNumeric {
                    column: header[c].clone(),
                    row: row + 1,
                    value: cell.to_string(),
                })
            };
            for &c in &feature_cols {
                features.push(num(c)?);
            }
            labels.push(num(li)? as u8);
            protected.push(num(pi)? as u8);
            weights.push(num(wi)?);
        }
        if labels.is_empty() {
            return Err(Error::EmptyFile);
        }
        Self::new(features, names, labels, protected, Some(weights))
    }

    pub fn load_encoded(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
