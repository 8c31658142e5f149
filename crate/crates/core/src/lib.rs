//! Fair credit scoring: data curation, a logistic baseline, fairness and
//! profit metrics, pre-, in- and post-processing bias mitigation, and a
//! cross-validated benchmark harness.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mitigate_in;
pub mod mitigate_post;
pub mod mitigate_pre;

pub use classifier::{LogisticModel, TrainConfig};
pub use dataset::{FeatureSchema, SplitFractions, TabularDataset};
pub use error::{Error, Result};
pub use harness::{BenchmarkResult, BenchmarkTable, DatasetId, PipelineSpec, Processor, ProcessorType};
pub use metrics::{MetricReport, ProfitConfig};
