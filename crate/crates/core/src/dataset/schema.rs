use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw column type as declared in a schema file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
}

/// How the protected attribute itself enters the feature matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtectedFeature {
    /// Keep the raw attribute as an ordinary feature.
    #[default]
    Raw,
    /// Replace it by the 0/1 privileged indicator.
    Flag,
    /// Leave it out of the features entirely.
    Drop,
}

/// Declarative description of a raw loan-application table.
///
/// ```toml
/// target = "credit"
/// favorable = "1"
/// protected = "age"
/// protected_threshold = 25
/// drop = ["id"]
///
/// [columns]
/// age = "numeric"
/// purpose = "categorical"
/// credit = "categorical"
/// id = "categorical"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub target: String,
    pub favorable: String,
    pub protected: String,
    #[serde(default)]
    pub protected_threshold: Option<f64>,
    /// Privileged raw values when the protected attribute is categorical.
    #[serde(default)]
    pub privileged_values: Vec<String>,
    #[serde(default)]
    pub protected_feature: ProtectedFeature,
    #[serde(default)]
    pub drop: Vec<String>,
    pub columns: BTreeMap<String, ColumnKind>,
}

impl FeatureSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema =
            toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.columns.contains_key(&self.target) {
            return Err(Error::Schema(format!("target `{}` not declared", self.target)));
        }
        let Some(kind) = self.columns.get(&self.protected) else {
            return Err(Error::Schema(format!(
                "protected attribute `{}` not declared",
                self.protected
            )));
        };
        if self.protected == self.target {
            return Err(Error::Schema("target and protected attribute coincide".into()));
        }
        match kind {
            ColumnKind::Numeric if self.protected_threshold.is_none() => {
                return Err(Error::Schema(
                    "numeric protected attribute needs `protected_threshold`".into(),
                ))
            }
            ColumnKind::Categorical | ColumnKind::Binary if self.privileged_values.is_empty() => {
                return Err(Error::Schema(
                    "categorical protected attribute needs `privileged_values`".into(),
                ))
            }
            _ => {}
        }
        for d in &self.drop {
            if !self.columns.contains_key(d) {
                return Err(Error::Schema(format!("drop-listed column `{d}` not declared")));
            }
            if *d == self.target || *d == self.protected {
                return Err(Error::Schema(format!("cannot drop `{d}`")));
            }
        }
        Ok(())
    }

    pub fn kind(&self, column: &str) -> Option<ColumnKind> {
        self.columns.get(column).copied()
    }

    pub fn is_dropped(&self, column: &str) -> bool {
        self.drop.iter().any(|d| d == column)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OK: &str = r#"
        target = "y"
        favorable = "good"
        protected = "age"
        protected_threshold = 25
        [columns]
        y = "categorical"
        age = "numeric"
        job = "categorical"
    "#;

    #[test]
    fn parses_valid_schema() {
        let s = FeatureSchema::from_toml_str(OK).unwrap();
        assert_eq!(s.kind("age"), Some(ColumnKind::Numeric));
        assert_eq!(s.protected_feature, ProtectedFeature::Raw);
        assert_eq!(s.protected_threshold, Some(25.0));
    }

    #[test]
    fn numeric_protected_needs_threshold() {
        let text = OK.replace("protected_threshold = 25", "");
        assert!(matches!(FeatureSchema::from_toml_str(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn undeclared_target_rejected() {
        let text = OK.replace("target = \"y\"", "target = \"z\"");
        assert!(FeatureSchema::from_toml_str(&text).is_err());
    }
}
