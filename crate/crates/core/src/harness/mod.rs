//! End-to-end benchmark pipeline: split, cross-validate each processor with
//! shared folds, evaluate on the held-out test part, aggregate and report.

mod processor;
mod report;
mod suite;

pub use processor::{parse_processor, Processor, ProcessorType};
pub use report::{emit_plot_data, emit_report, ReportFormat};
pub use suite::{ProcessorEntry, SuiteConfig};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit, predict_proba, threshold_labels, LogisticModel, TrainConfig};
use crate::dataset::{
    carve_validation, consumer_loans_schema, curate, german_credit, german_credit_schema, load_csv,
    stratified_split, FeatureSchema, Fold, FoldPlan, ProtectedFeature, SplitFractions, TabularDataset,
};
use crate::error::{Error, Result};
use crate::metrics::{fairness_verdicts, FairnessVerdicts, Intervals, MetricReport, ProfitConfig};
use crate::mitigate_in::{expgrad_fit, grid_search_fit, prejudice_remover_fit, PrejudiceConfig};
use crate::mitigate_post::{ceo_apply, ceo_fit, roc_apply, roc_fit};
use crate::mitigate_pre::{lfr_fit, lfr_transform, reweigh, RepairPlan};

/// Environment variable holding the consumer-loans CSV path.
pub const CONSUMER_ENV: &str = "CONSUMER_LOANS_CSV";

/// Share of each fold's training rows held back for validation when the
/// split has no validation part.
pub const DEFAULT_VALIDATION_SHARE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    German,
    Consumer,
    Path(PathBuf),
}

impl DatasetId {
    pub fn default_split(&self) -> SplitFractions {
        match self {
            DatasetId::German => SplitFractions::new(0.7, 0.0, 0.3),
            _ => SplitFractions::new(0.7, 0.15, 0.15),
        }
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "german" => DatasetId::German,
            "consumer" => DatasetId::Consumer,
            path => DatasetId::Path(PathBuf::from(path)),
        })
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetId::German => f.write_str("german"),
            DatasetId::Consumer => f.write_str("consumer"),
            DatasetId::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

/// A loaded dataset plus the names of columns that carry the protected attribute.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub dataset: TabularDataset,
    pub protected_columns: Vec<String>,
}

fn protected_columns(schema: &FeatureSchema) -> Vec<String> {
    match schema.protected_feature {
        ProtectedFeature::Raw => vec![schema.protected.clone()],
        _ => Vec::new(),
    }
}

/// Loads a dataset: the bundled German data, the consumer-loans file named by
/// `CONSUMER_LOANS_CSV`, a raw CSV with a schema, or an encoded CSV.
pub fn load_dataset(id: &DatasetId, schema: Option<&Path>) -> Result<LoadedData> {
    match id {
        DatasetId::German => {
            let schema = german_credit_schema();
            Ok(LoadedData {
                dataset: german_credit()?,
                protected_columns: protected_columns(&schema),
            })
        }
        DatasetId::Consumer => {
            let path = std::env::var_os(CONSUMER_ENV).ok_or_else(|| {
                Error::Data(format!("consumer-loans data not found: set {CONSUMER_ENV} to the CSV path"))
            })?;
            let schema = match schema {
                Some(p) => FeatureSchema::from_path(p)?,
                None => consumer_loans_schema(),
            };
            let raw = load_csv(Path::new(&path), &schema)?;
            Ok(LoadedData {
                dataset: curate(&raw, &schema)?,
                protected_columns: protected_columns(&schema),
            })
        }
        DatasetId::Path(path) => match schema {
            Some(sp) => {
                let schema = FeatureSchema::from_path(sp)?;
                let raw = load_csv(path, &schema)?;
                Ok(LoadedData {
                    dataset: curate(&raw, &schema)?,
                    protected_columns: protected_columns(&schema),
                })
            }
            None => Ok(LoadedData {
                dataset: TabularDataset::load_encoded(path)?,
                protected_columns: Vec::new(),
            }),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub dataset: DatasetId,
    pub processor: Processor,
    pub split: SplitFractions,
    /// 0 runs a single split; otherwise at least 2.
    pub folds: usize,
    pub seed: u64,
    pub profit: ProfitConfig,
    pub intervals: Intervals,
    pub train: TrainConfig,
    /// Choose the decision threshold maximizing validation balanced accuracy
    /// instead of using 0.5.
    pub tune_threshold: bool,
}

impl PipelineSpec {
    pub fn new(dataset: DatasetId, processor: Processor, seed: u64) -> Self {
        PipelineSpec {
            split: dataset.default_split(),
            dataset,
            processor,
            folds: 10,
            seed,
            profit: ProfitConfig::default(),
            intervals: Intervals::default(),
            train: TrainConfig::default(),
            tune_threshold: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 1 {
            return Err(Error::Config("fold count must be 0 (single split) or at least 2".into()));
        }
        self.profit.validate()?;
        self.train.validate()
    }

    fn validation_share(&self) -> f64 {
        let pool = self.split.train + self.split.validation;
        if self.split.validation > 0.0 {
            self.split.validation / pool
        } else {
            DEFAULT_VALIDATION_SHARE
        }
    }
}

/// Per-metric values aggregated over folds; `None` where no fold defined it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub di: Option<f64>,
    pub spd: Option<f64>,
    pub aod: Option<f64>,
    pub eod: Option<f64>,
    pub separation_sp: Option<f64>,
    pub theil: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub profit: Option<f64>,
}

type Getter = fn(&MetricReport) -> Option<f64>;

const FIELDS: [Getter; 8] = [
    |r| r.di,
    |r| r.spd,
    |r| r.aod,
    |r| r.eod,
    |r| r.separation_sp,
    |r| r.theil,
    |r| Some(r.balanced_accuracy),
    |r| Some(r.profit),
];

impl MetricSummary {
    fn from_values(v: [Option<f64>; 8]) -> Self {
        MetricSummary {
            di: v[0],
            spd: v[1],
            aod: v[2],
            eod: v[3],
            separation_sp: v[4],
            theil: v[5],
            balanced_accuracy: v[6],
            profit: v[7],
        }
    }

    /// Mean and sample standard deviation of each metric over `reports`.
    pub fn aggregate(reports: &[&MetricReport]) -> (Self, Self) {
        let mut means = [None; 8];
        let mut stds = [None; 8];
        for (k, get) in FIELDS.iter().enumerate() {
            let vals: Vec<f64> = reports.iter().filter_map(|r| get(r)).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            means[k] = Some(mean);
            stds[k] = Some(var.sqrt());
        }
        (Self::from_values(means), Self::from_values(stds))
    }

    pub fn as_report(&self, intervals: &Intervals) -> MetricReport {
        let mut r = MetricReport {
            di: self.di,
            spd: self.spd,
            aod: self.aod,
            eod: self.eod,
            separation_sp: self.separation_sp,
            theil: self.theil,
            balanced_accuracy: self.balanced_accuracy.unwrap_or(f64::NAN),
            profit: self.profit.unwrap_or(f64::NAN),
            verdicts: FairnessVerdicts {
                di: false,
                spd: false,
                aod: false,
                eod: false,
                theil: false,
            },
        };
        r.verdicts = fairness_verdicts(&r, intervals);
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub report: Option<MetricReport>,
    /// Decision threshold used on the test part, when one applies.
    pub threshold: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub processor: Processor,
    pub kind: ProcessorType,
    pub folds: Vec<FoldRecord>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub verdicts: FairnessVerdicts,
    /// Hash of the fold assignment; equal across rows of one benchmark.
    pub fold_fingerprint: u64,
    pub wall_time_ms: u64,
}

impl BenchmarkResult {
    pub fn name(&self) -> &'static str {
        self.processor.display_name()
    }

    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.report.is_none()).count()
    }

    pub fn successful_reports(&self) -> Vec<&MetricReport> {
        self.folds.iter().filter_map(|f| f.report.as_ref()).collect()
    }
}

/// Rows for one dataset, in pre → in → post order with the baseline last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub dataset: String,
    pub seed: u64,
    pub folds: usize,
    pub intervals: Intervals,
    pub rows: Vec<BenchmarkResult>,
}

impl BenchmarkTable {
    pub fn baseline(&self) -> Option<&BenchmarkResult> {
        self.rows.iter().find(|r| r.kind == ProcessorType::None)
    }

    pub fn row(&self, name: &str) -> Option<&BenchmarkResult> {
        self.rows.iter().find(|r| r.name() == name)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: BenchmarkTable = serde_json::from_str(text)?;
        if t.rows.is_empty() {
            return Err(Error::Data("results file has no rows".into()));
        }
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Index sets of every fold, with the test part shared by all folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldIndices {
    pub fit: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits the data and builds the fold plan for `spec`.
pub fn plan_folds(ds: &TabularDataset, spec: &PipelineSpec) -> Result<(Vec<FoldIndices>, u64)> {
    let split = stratified_split(ds, spec.split, spec.seed)?;
    let mut pool = split.train.clone();
    pool.extend_from_slice(&split.validation);
    let share = spec.validation_share();
    let trains: Vec<Vec<usize>>;
    let fingerprint;
    if spec.folds == 0 {
        trains = vec![pool.clone()];
        let plan = FoldPlan {
            k: 1,
            seed: spec.seed,
            folds: vec![Fold { train: pool.clone(), test: pool }],
        };
        fingerprint = plan.fingerprint();
    } else {
        let plan = FoldPlan::over(ds.labels(), &pool, spec.folds, spec.seed)?;
        fingerprint = plan.fingerprint();
        trains = plan.folds.into_iter().map(|f| f.train).collect();
    }
    let folds = trains
        .into_iter()
        .map(|train| {
            let (fit, validation) = carve_validation(ds.labels(), &train, share);
            FoldIndices {
                fit,
                validation,
                test: split.test.clone(),
            }
        })
        .collect();
    Ok((folds, fingerprint))
}

/// Fails if any fitting index belongs to the test part.
pub fn leakage_guard(test: &[usize], fitting: &[usize], n: usize) -> Result<()> {
    let mut is_test = vec![false; n];
    for &i in test {
        is_test[i] = true;
    }
    match fitting.iter().find(|&&i| is_test[i]) {
        Some(&i) => Err(Error::Leakage(i)),
        None => Ok(()),
    }
}

/// Threshold in {0.01, …, 0.99} maximizing balanced accuracy; ties keep the lowest.
pub fn best_threshold(probabilities: &[f64], y: &[u8]) -> f64 {
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let neg = y.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    let mut best = (f64::NEG_INFINITY, 0.5);
    for k in 1..100 {
        let t = k as f64 / 100.0;
        let (mut tp, mut tn) = (0.0, 0.0);
        for (&p, &l) in probabilities.iter().zip(y) {
            match (p >= t, l == 1) {
                (true, true) => tp += 1.0,
                (false, false) => tn += 1.0,
                _ => {}
            }
        }
        let bacc = 0.5 * (tp / pos + tn / neg);
        if bacc > best.0 {
            best = (bacc, t);
        }
    }
    best.1
}

struct FoldData {
    fit: TabularDataset,
    validation: TabularDataset,
    test: TabularDataset,
}

fn labels_f64(labels: Vec<u8>) -> Vec<f64> {
    labels.into_iter().map(f64::from).collect()
}

impl PipelineSpec {
    fn decide(&self, model: &LogisticModel, validation: &TabularDataset, test: &TabularDataset) -> Result<(Vec<f64>, f64)> {
        let t = if self.tune_threshold {
            best_threshold(&predict_proba(model, validation)?, validation.labels())
        } else {
            0.5
        };
        Ok((labels_f64(threshold_labels(&predict_proba(model, test)?, t)), t))
    }

    /// Predictions in `[0, 1]` for the test rows and the threshold used.
    fn run_processor(&self, data: &FoldData, keep: &[String]) -> Result<(Vec<f64>, Option<f64>)> {
        let cfg = &self.train;
        let FoldData { fit: train, validation, test } = data;
        let (preds, t) = match &self.processor {
            Processor::None | Processor::Identity => {
                let transformed = train.clone();
                self.decide(&fit(&transformed, cfg)?, validation, test)?
            }
            Processor::Reweighing => self.decide(&fit(&reweigh(train)?, cfg)?, validation, test)?,
            Processor::Lfr(lcfg) => {
                let model = lfr_fit(train, lcfg)?;
                let clf = fit(&lfr_transform(&model, train, false)?, cfg)?;
                self.decide(
                    &clf,
                    &lfr_transform(&model, validation, false)?,
                    &lfr_transform(&model, test, false)?,
                )?
            }
            Processor::Dir { lambda } => {
                let plan = RepairPlan::fit(train, *lambda, keep)?;
                let clf = fit(&plan.transform(train)?, cfg)?;
                self.decide(&clf, &plan.transform(validation)?, &plan.transform(test)?)?
            }
            Processor::PrejudiceRemover { eta } => {
                let pcfg = PrejudiceConfig { eta: *eta, train: cfg.clone() };
                self.decide(&prejudice_remover_fit(train, &pcfg)?, validation, test)?
            }
            Processor::Expgrad(ecfg) => {
                let ecfg = crate::mitigate_in::ExpgradConfig { train: cfg.clone(), ..ecfg.clone() };
                let out = expgrad_fit(train, &ecfg)?;
                (out.classifier.predict_expected(test)?, 0.5)
            }
            Processor::GridSearch(gcfg) => {
                let gcfg = crate::mitigate_in::GridConfig { train: cfg.clone(), ..gcfg.clone() };
                let out = grid_search_fit(train, &gcfg)?;
                (labels_f64(threshold_labels(&predict_proba(&out.model, test)?, 0.5)), 0.5)
            }
            Processor::Roc(rcfg) => {
                let model = fit(train, cfg)?;
                let policy = roc_fit(&predict_proba(&model, validation)?, validation.labels(), validation.protected(), rcfg)?;
                let labels = roc_apply(&policy, &predict_proba(&model, test)?, test.protected())?;
                (labels_f64(labels), policy.threshold)
            }
            Processor::Ceo { cost } => {
                let model = fit(train, cfg)?;
                let val_p = predict_proba(&model, validation)?;
                let policy = ceo_fit(&val_p, validation.labels(), validation.protected(), *cost)?;
                let val_adj = ceo_apply(&policy, &val_p, validation.protected())?;
                let t = if self.tune_threshold {
                    best_threshold(&val_adj, validation.labels())
                } else {
                    0.5
                };
                let test_adj = ceo_apply(&policy, &predict_proba(&model, test)?, test.protected())?;
                (labels_f64(threshold_labels(&test_adj, t)), t)
            }
        };
        Ok((preds, Some(t)))
    }

    fn run_fold(&self, ds: &TabularDataset, idx: &FoldIndices, keep: &[String]) -> Result<(MetricReport, Option<f64>)> {
        leakage_guard(&idx.test, &idx.fit, ds.len())?;
        leakage_guard(&idx.test, &idx.validation, ds.len())?;
        let data = FoldData {
            fit: ds.subset(&idx.fit)?,
            validation: ds.subset(&idx.validation)?,
            test: ds.subset(&idx.test)?,
        };
        let (preds, t) = self.run_processor(&data, keep)?;
        let report = MetricReport::compute(
            data.test.labels(),
            &preds,
            data.test.protected(),
            &self.profit,
            &self.intervals,
        )?;
        Ok((report, t))
    }
}

/// Runs one processor over every fold of an already loaded dataset.
pub fn run_pipeline_on(data: &LoadedData, spec: &PipelineSpec) -> Result<BenchmarkResult> {
    spec.validate()?;
    let start = Instant::now();
    let spec = PipelineSpec {
        processor: spec.processor.clone().with_seed(spec.seed),
        ..spec.clone()
    };
    let (folds, fingerprint) = plan_folds(&data.dataset, &spec)?;
    let records: Vec<FoldRecord> = folds
        .par_iter()
        .enumerate()
        .map(|(k, idx)| match spec.run_fold(&data.dataset, idx, &data.protected_columns) {
            Ok((report, threshold)) => Ok(FoldRecord {
                fold: k,
                report: Some(report),
                threshold,
                error: None,
            }),
            Err(e @ Error::Leakage(_)) => Err(e),
            Err(e) => Ok(FoldRecord {
                fold: k,
                report: None,
                threshold: None,
                error: Some(e.to_string()),
            }),
        })
        .collect::<Result<_>>()?;
    let reports: Vec<&MetricReport> = records.iter().filter_map(|r| r.report.as_ref()).collect();
    let (mean, std) = MetricSummary::aggregate(&reports);
    let verdicts = mean.as_report(&spec.intervals).verdicts;
    Ok(BenchmarkResult {
        kind: spec.processor.kind(),
        processor: spec.processor,
        folds: records,
        mean,
        std,
        verdicts,
        fold_fingerprint: fingerprint,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

pub fn run_pipeline(spec: &PipelineSpec, schema: Option<&Path>) -> Result<BenchmarkResult> {
    let data = load_dataset(&spec.dataset, schema)?;
    run_pipeline_on(&data, spec)
}

/// Runs every spec (which must share dataset, seed and folds), adds the
/// baseline if absent, and orders the rows pre → in → post → baseline.
pub fn run_benchmark_on(data: &LoadedData, specs: &[PipelineSpec]) -> Result<BenchmarkTable> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Config("benchmark needs at least one processor".into()))?;
    if specs
        .iter()
        .any(|s| s.dataset != first.dataset || s.seed != first.seed || s.folds != first.folds || s.split != first.split)
    {
        return Err(Error::Config("benchmark rows must share dataset, split, folds and seed".into()));
    }
    let mut specs = specs.to_vec();
    if !specs.iter().any(|s| s.processor == Processor::None) {
        specs.push(PipelineSpec {
            processor: Processor::None,
            ..first.clone()
        });
    }
    specs.sort_by_key(|s| s.processor.kind());
    let rows: Vec<BenchmarkResult> = specs
        .par_iter()
        .map(|s| run_pipeline_on(data, s))
        .collect::<Result<_>>()?;
    if rows.windows(2).any(|w| w[0].fold_fingerprint != w[1].fold_fingerprint) {
        return Err(Error::Data("fold assignments differ across processors".into()));
    }
    Ok(BenchmarkTable {
        dataset: first.dataset.to_string(),
        seed: first.seed,
        folds: first.folds,
        intervals: first.intervals,
        rows,
    })
}

pub fn run_benchmark(specs: &[PipelineSpec], schema: Option<&Path>) -> Result<BenchmarkTable> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Config("benchmark needs at least one processor".into()))?;
    let data = load_dataset(&first.dataset, schema)?;
    run_benchmark_on(&data, specs)
}
