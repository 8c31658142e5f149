use std::collections::BTreeSet;

use super::load::{RawColumn, RawTable};
use super::schema::{ColumnKind, FeatureSchema, ProtectedFeature};
use super::{FeatureKind, TabularDataset};
use crate::error::{Error, Result};

/// Category name given to missing cells of categorical columns.
pub const MISSING_CATEGORY: &str = "missing";

/// Median of the finite values; even counts average the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    })
}

fn impute_median(name: &str, values: &[Option<f64>]) -> Result<Vec<f64>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let med = median(&present)
        .ok_or_else(|| Error::Data(format!("numeric column `{name}` is entirely missing")))?;
    Ok(values.iter().map(|v| v.unwrap_or(med)).collect())
}

fn text_of(col: &RawColumn) -> Vec<Option<String>> {
    match col {
        RawColumn::Text(v) => v.clone(),
        RawColumn::Numeric(v) => v.iter().map(|x| x.map(|x| format!("{x}"))).collect(),
    }
}

struct Encoded {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    // column-major
    columns: Vec<Vec<f64>>,
}

impl Encoded {
    fn push(&mut self, name: String, kind: FeatureKind, values: Vec<f64>) {
        self.names.push(name);
        self.kinds.push(kind);
        self.columns.push(values);
    }

    fn one_hot(&mut self, name: &str, cells: &[Option<String>], binary: bool) {
        let mut cats: BTreeSet<&str> = cells.iter().flatten().map(String::as_str).collect();
        let has_missing = cells.iter().any(Option::is_none);
        if has_missing {
            cats.insert(MISSING_CATEGORY);
        }
        let cats: Vec<&str> = cats.into_iter().collect();
        fn value_of(c: &Option<String>) -> &str {
            c.as_deref().unwrap_or(MISSING_CATEGORY)
        }
        if binary && cats.len() == 2 {
            let hot = cats[1];
            let values = cells.iter().map(|c| f64::from(u8::from(value_of(c) == hot))).collect();
            self.push(format!("{name}={hot}"), FeatureKind::Indicator, values);
            return;
        }
        for cat in cats {
            let values = cells.iter().map(|c| f64::from(u8::from(value_of(c) == cat))).collect();
            self.push(format!("{name}={cat}"), FeatureKind::Indicator, values);
        }
    }
}

fn parse_num(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

fn is_favorable(raw: &str, favorable: &str) -> bool {
    if raw.trim() == favorable.trim() {
        return true;
    }
    matches!((parse_num(raw), parse_num(favorable)), (Some(a), Some(b)) if a == b)
}

/// Cleans and encodes a raw table.
///
/// Drop-listed columns are removed, categorical gaps become a `missing`
/// category, numeric gaps take the column median, categoricals are fully
/// one-hot encoded, labels map to 1 = favorable and the protected flag is
/// 1 = privileged (numeric attribute at or above the threshold).
pub fn curate(raw: &RawTable, schema: &FeatureSchema) -> Result<TabularDataset> {
    let n = raw.n_rows;
    let target = raw
        .column(&schema.target)
        .ok_or_else(|| Error::Schema(format!("target `{}` missing", schema.target)))?;
    let labels = text_of(target)
        .into_iter()
        .enumerate()
        .map(|(row, cell)| {
            cell.map(|c| u8::from(is_favorable(&c, &schema.favorable)))
                .ok_or_else(|| Error::Data(format!("target missing at row {}", row + 1)))
        })
        .collect::<Result<Vec<u8>>>()?;

    let prot_col = raw
        .column(&schema.protected)
        .ok_or_else(|| Error::Schema(format!("protected `{}` missing", schema.protected)))?;
    let protected: Vec<u8> = match (prot_col, schema.protected_threshold) {
        (RawColumn::Numeric(v), Some(threshold)) => v
            .iter()
            .enumerate()
            .map(|(row, x)| {
                x.map(|x| u8::from(x >= threshold)).ok_or_else(|| {
                    Error::Data(format!("protected attribute missing at row {}", row + 1))
                })
            })
            .collect::<Result<_>>()?,
        (col, _) => text_of(col)
            .iter()
            .enumerate()
            .map(|(row, x)| {
                x.as_ref()
                    .map(|x| u8::from(schema.privileged_values.iter().any(|p| p == x)))
                    .ok_or_else(|| {
                        Error::Data(format!("protected attribute missing at row {}", row + 1))
                    })
            })
            .collect::<Result<_>>()?,
    };

    let mut enc = Encoded {
        names: Vec::new(),
        kinds: Vec::new(),
        columns: Vec::new(),
    };
    for (name, col) in &raw.columns {
        if *name == schema.target || schema.is_dropped(name) {
            continue;
        }
        if *name == schema.protected {
            match schema.protected_feature {
                ProtectedFeature::Drop => continue,
                ProtectedFeature::Flag => {
                    let flag_name = match schema.protected_threshold {
                        Some(t) => format!("{name}>={t}"),
                        None => format!("{name}=privileged"),
                    };
                    let values = protected.iter().map(|&p| f64::from(p)).collect();
                    enc.push(flag_name, FeatureKind::Indicator, values);
                    continue;
                }
                ProtectedFeature::Raw => {}
            }
        }
        let kind = schema
            .kind(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        match (kind, col) {
            (ColumnKind::Numeric, RawColumn::Numeric(v)) => {
                enc.push(name.clone(), FeatureKind::Numeric, impute_median(name, v)?);
            }
            (ColumnKind::Numeric, RawColumn::Text(_)) => {
                return Err(Error::Schema(format!("column `{name}` was not loaded as numeric")))
            }
            (ColumnKind::Categorical, col) => enc.one_hot(name, &text_of(col), false),
            (ColumnKind::Binary, col) => enc.one_hot(name, &text_of(col), true),
        }
    }

    let d = enc.names.len();
    let mut features = vec![0.0; n * d];
    for (j, col) in enc.columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            features[i * d + j] = *v;
        }
    }
    TabularDataset::with_kinds(features, enc.names, enc.kinds, labels, protected, None)
}
