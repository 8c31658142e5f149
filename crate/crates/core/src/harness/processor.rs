//! Processor selection by name with `name{key=value,...}` hyperparameters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mitigate_in::{ConstraintKind, ExpgradConfig, GridConfig, PrejudiceConfig};
use crate::mitigate_post::{CeoCost, Linspace, RocConfig, RocConstraint};
use crate::mitigate_pre::LfrConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessorType {
    Pre,
    In,
    Post,
    None,
}

impl ProcessorType {
    /// Column label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ProcessorType::Pre => "Pre",
            ProcessorType::In => "In",
            ProcessorType::Post => "Post",
            ProcessorType::None => "N/A",
        }
    }
}

impl FromStr for ProcessorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" => Ok(ProcessorType::Pre),
            "in" => Ok(ProcessorType::In),
            "post" => Ok(ProcessorType::Post),
            "none" | "n/a" => Ok(ProcessorType::None),
            other => Err(Error::Config(format!("unknown processor type `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Processor {
    /// No mitigation.
    None,
    /// Pre-processing that returns the data unchanged.
    Identity,
    Reweighing,
    Lfr(LfrConfig),
    Dir { lambda: f64 },
    PrejudiceRemover { eta: f64 },
    Expgrad(ExpgradConfig),
    GridSearch(GridConfig),
    Roc(RocConfig),
    Ceo { cost: CeoCost },
}

impl Processor {
    pub fn kind(&self) -> ProcessorType {
        match self {
            Processor::None => ProcessorType::None,
            Processor::Identity | Processor::Reweighing | Processor::Lfr(_) | Processor::Dir { .. } => {
                ProcessorType::Pre
            }
            Processor::PrejudiceRemover { .. } | Processor::Expgrad(_) | Processor::GridSearch(_) => ProcessorType::In,
            Processor::Roc(_) | Processor::Ceo { .. } => ProcessorType::Post,
        }
    }

    /// Row label in result tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            Processor::None => "No bias mitigation",
            Processor::Identity => "Identity",
            Processor::Reweighing => "Reweighing",
            Processor::Lfr(_) => "Learning Fair Representations",
            Processor::Dir { .. } => "Disparate Impact Remover",
            Processor::PrejudiceRemover { .. } => "Prejudice Remover",
            Processor::Expgrad(_) => "Exponentiated Gradient Reduction",
            Processor::GridSearch(_) => "Grid Search Reduction",
            Processor::Roc(_) => "Reject Option Classification",
            Processor::Ceo { .. } => "Calibrated Equalized Odds",
        }
    }

    /// The eight processors of the standard benchmark, in table order.
    pub fn standard_suite() -> Vec<Processor> {
        [
            "reweighing",
            "lfr",
            "dir",
            "expgrad",
            "grid_search",
            "prejudice_remover",
            "roc",
            "ceo",
        ]
        .iter()
        .map(|s| s.parse().expect("standard processor names parse"))
        .collect()
    }

    /// Copies the run seed into processors that draw random numbers.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Processor::Lfr(cfg) => cfg.seed = seed,
            Processor::Expgrad(cfg) => cfg.train.seed = seed,
            Processor::GridSearch(cfg) => cfg.train.seed = seed,
            _ => {}
        }
        self
    }
}

struct Params {
    processor: String,
    values: BTreeMap<String, String>,
}

impl Params {
    fn take<T: FromStr>(&mut self, keys: &[&str]) -> Result<Option<T>> {
        for key in keys {
            if let Some(raw) = self.values.remove(*key) {
                return raw.parse().map(Some).map_err(|_| {
                    Error::Config(format!("{}: cannot parse {key} = `{raw}`", self.processor))
                });
            }
        }
        Ok(None)
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(Error::Config(format!("{}: unknown parameter `{k}`", self.processor))),
            None => Ok(()),
        }
    }
}

fn split_spec(s: &str) -> Result<(String, BTreeMap<String, String>)> {
    let s = s.trim();
    let (name, body) = match s.find('{') {
        Some(i) => {
            let body = s[i + 1..]
                .strip_suffix('}')
                .ok_or_else(|| Error::Config(format!("unterminated parameter list in `{s}`")))?;
            (&s[..i], body)
        }
        None => (s, ""),
    };
    let mut values = BTreeMap::new();
    for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        let key = k.trim().to_ascii_lowercase();
        if values.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("parameter `{key}` given twice")));
        }
    }
    Ok((name.trim().to_ascii_lowercase().replace('-', "_"), values))
}

impl FromStr for Processor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = split_spec(s)?;
        let mut p = Params {
            processor: name.clone(),
            values,
        };
        let proc = match name.as_str() {
            "none" | "baseline" => Processor::None,
            "identity" => Processor::Identity,
            "reweighing" => Processor::Reweighing,
            "lfr" => {
                let d = LfrConfig::default();
                Processor::Lfr(LfrConfig {
                    k: p.take(&["k"])?.unwrap_or(d.k),
                    a_z: p.take(&["az", "a_z"])?.unwrap_or(d.a_z),
                    a_x: p.take(&["ax", "a_x"])?.unwrap_or(d.a_x),
                    a_y: p.take(&["ay", "a_y"])?.unwrap_or(d.a_y),
                    threshold: p.take(&["threshold"])?.unwrap_or(d.threshold),
                    seed: p.take(&["seed"])?.unwrap_or(d.seed),
                    max_iter: p.take(&["max_iter"])?.unwrap_or(d.max_iter),
                    ..d
                })
            }
            "dir" | "disparate_impact_remover" => Processor::Dir {
                lambda: p.take(&["lambda", "repair_level"])?.unwrap_or(1.0),
            },
            "prejudice_remover" | "prejudice" => Processor::PrejudiceRemover {
                eta: p.take(&["eta"])?.unwrap_or(PrejudiceConfig::default().eta),
            },
            "expgrad" | "exponentiated_gradient" => {
                let d = ExpgradConfig::default();
                let mut train = d.train.clone();
                train.seed = p.take(&["seed"])?.unwrap_or(train.seed);
                Processor::Expgrad(ExpgradConfig {
                    constraint: p.take(&["constraint"])?.unwrap_or(d.constraint),
                    eps: p.take(&["eps"])?.unwrap_or(d.eps),
                    max_iter: p.take(&["max_iter"])?.unwrap_or(d.max_iter),
                    eta: p.take(&["eta"])?.unwrap_or(d.eta),
                    ratio: p.take(&["ratio"])?.unwrap_or(d.ratio),
                    train,
                })
            }
            "grid_search" | "grid" => {
                let d = GridConfig::default();
                let constraint: ConstraintKind = p.take(&["constraint"])?.unwrap_or(d.constraint);
                Processor::GridSearch(GridConfig {
                    constraint,
                    grid_size: p.take(&["grid_size"])?.unwrap_or(d.grid_size),
                    lambda_max: p.take(&["lambda_max"])?.unwrap_or(d.lambda_max),
                    tolerance: p.take(&["tolerance", "tol"])?.unwrap_or(d.tolerance),
                    loss_bound: p.take(&["loss_bound"])?.or(d.loss_bound),
                    train: d.train,
                })
            }
            "roc" | "reject_option" => {
                let d = RocConfig::default();
                let constraint: RocConstraint = p.take(&["constraint"])?.unwrap_or(d.constraint);
                let bound = match p.take::<f64>(&["bound"])? {
                    Some(b) if b > 0.0 => (-b, b),
                    Some(b) => return Err(Error::Config(format!("roc: bound must be positive, got {b}"))),
                    None => d.bound,
                };
                let thresholds = Linspace::new(
                    p.take(&["t_min"])?.unwrap_or(d.thresholds.lo),
                    p.take(&["t_max"])?.unwrap_or(d.thresholds.hi),
                    p.take(&["t_count"])?.unwrap_or(d.thresholds.count),
                );
                let margins = Linspace::new(
                    p.take(&["m_min"])?.unwrap_or(d.margins.lo),
                    p.take(&["m_max"])?.unwrap_or(d.margins.hi),
                    p.take(&["m_count"])?.unwrap_or(d.margins.count),
                );
                Processor::Roc(RocConfig { constraint, thresholds, margins, bound })
            }
            "ceo" | "calibrated_eq_odds" => Processor::Ceo {
                cost: p.take(&["cost"])?.unwrap_or(CeoCost::Weighted),
            },
            other => return Err(Error::Config(format!("unknown processor `{other}`"))),
        };
        p.finish()?;
        Ok(proc)
    }
}

impl fmt::Display for Processor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Processor::None => write!(f, "none"),
            Processor::Identity => write!(f, "identity"),
            Processor::Reweighing => write!(f, "reweighing"),
            Processor::Lfr(c) => write!(
                f,
                "lfr{{k={},az={},ax={},ay={},threshold={},seed={},max_iter={}}}",
                c.k, c.a_z, c.a_x, c.a_y, c.threshold, c.seed, c.max_iter
            ),
            Processor::Dir { lambda } => write!(f, "dir{{lambda={lambda}}}"),
            Processor::PrejudiceRemover { eta } => write!(f, "prejudice_remover{{eta={eta}}}"),
            Processor::Expgrad(c) => write!(
                f,
                "expgrad{{constraint={},eps={},max_iter={},eta={},ratio={},seed={}}}",
                c.constraint, c.eps, c.max_iter, c.eta, c.ratio, c.train.seed
            ),
            Processor::GridSearch(c) => {
                write!(
                    f,
                    "grid_search{{constraint={},grid_size={},lambda_max={},tolerance={}",
                    c.constraint, c.grid_size, c.lambda_max, c.tolerance
                )?;
                if let Some(b) = c.loss_bound {
                    write!(f, ",loss_bound={b}")?;
                }
                write!(f, "}}")
            }
            Processor::Roc(c) => write!(
                f,
                "roc{{constraint={},bound={},t_min={},t_max={},t_count={},m_min={},m_max={},m_count={}}}",
                c.constraint,
                c.bound.1,
                c.thresholds.lo,
                c.thresholds.hi,
                c.thresholds.count,
                c.margins.lo,
                c.margins.hi,
                c.margins.count
            ),
            Processor::Ceo { cost } => write!(f, "ceo{{cost={cost}}}"),
        }
    }
}

/// Parses a processor and checks it against a declared type, if any.
pub fn parse_processor(spec: &str, declared: Option<&str>) -> Result<Processor> {
    let proc: Processor = spec.parse()?;
    if let Some(t) = declared {
        let t: ProcessorType = t.parse()?;
        if t != proc.kind() {
            return Err(Error::Config(format!(
                "processor `{spec}` is {:?}, not {:?}",
                proc.kind(),
                t
            )));
        }
    }
    Ok(proc)
}
