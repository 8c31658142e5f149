use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_processor, DatasetId, PipelineSpec, Processor};
use crate::classifier::TrainConfig;
use crate::dataset::SplitFractions;
use crate::error::{Error, Result};
use crate::metrics::ProfitConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProcessorEntry {
    Spec(String),
    Typed {
        spec: String,
        #[serde(rename = "type")]
        kind: Option<String>,
    },
}

/// A benchmark suite read from TOML. Every field is optional; an empty
/// processor list means the standard eight processors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub dataset: Option<String>,
    pub schema: Option<PathBuf>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub split: Option<SplitFractions>,
    pub profit: Option<ProfitConfig>,
    pub theil_threshold: Option<f64>,
    pub tune_threshold: Option<bool>,
    pub l2: Option<f64>,
    #[serde(default)]
    pub processors: Vec<ProcessorEntry>,
}

impl SuiteConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("suite: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn processors(&self) -> Result<Vec<Processor>> {
        if self.processors.is_empty() {
            return Ok(Processor::standard_suite());
        }
        self.processors
            .iter()
            .map(|e| match e {
                ProcessorEntry::Spec(s) => parse_processor(s, None),
                ProcessorEntry::Typed { spec, kind } => parse_processor(spec, kind.as_deref()),
            })
            .collect()
    }

    /// One pipeline spec per processor; explicit `seed`/`folds` override the file.
    pub fn specs(&self, dataset: DatasetId, seed: Option<u64>, folds: Option<usize>) -> Result<Vec<PipelineSpec>> {
        let seed = seed.or(self.seed).unwrap_or(0);
        let mut base = PipelineSpec::new(dataset, Processor::None, seed);
        base.folds = folds.or(self.folds).unwrap_or(base.folds);
        if let Some(split) = self.split {
            base.split = split;
        }
        if let Some(profit) = self.profit {
            base.profit = profit;
        }
        if let Some(t) = self.theil_threshold {
            if !(t > 0.0) {
                return Err(Error::Config("theil_threshold must be positive".into()));
            }
            base.intervals.theil_max = t;
        }
        if let Some(t) = self.tune_threshold {
            base.tune_threshold = t;
        }
        if let Some(l2) = self.l2 {
            base.train = TrainConfig { l2, ..base.train };
        }
        base.validate()?;
        self.processors()?
            .into_iter()
            .map(|processor| {
                Ok(PipelineSpec {
                    processor,
                    ..base.clone()
                })
            })
            .collect()
    }
}
