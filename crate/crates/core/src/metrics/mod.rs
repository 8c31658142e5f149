//! Group fairness, individual fairness, accuracy and profit measures.
//!
//! Predictions are taken as reals in `[0, 1]`: hard labels are 0/1, while a
//! randomized classifier contributes its probability of predicting the
//! favorable label, so confusion counts are expected counts.

mod entropy;
mod report;

pub use entropy::{
    calibration_by_group, mutual_info_independence, score_bins, theil, CalibrationBin,
    CalibrationTable,
};
pub use report::{
    balanced_accuracy, fairness_verdicts, profit, FairnessVerdicts, FprDenominator, Intervals,
    MetricReport, ProfitConfig, CSV_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts hard 0/1 labels to prediction scores.
pub fn as_predictions(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| f64::from(l)).collect()
}

/// Confusion counts of one group (favorable = positive).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl Confusion {
    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> f64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> f64 {
        self.tn + self.fp
    }

    fn add(&mut self, y: u8, pred: f64) {
        if y == 1 {
            self.tp += pred;
            self.fn_ += 1.0 - pred;
        } else {
            self.fp += pred;
            self.tn += 1.0 - pred;
        }
    }

    pub fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Confusion counts split by protected group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionByGroup {
    pub unprivileged: Confusion,
    pub privileged: Confusion,
}

impl ConfusionByGroup {
    pub fn pooled(&self) -> Confusion {
        self.unprivileged.merged(&self.privileged)
    }

    /// Same counts with the group roles exchanged.
    pub fn swapped(&self) -> ConfusionByGroup {
        ConfusionByGroup {
            unprivileged: self.privileged,
            privileged: self.unprivileged,
        }
    }
}

pub fn confusion_by_group(y_true: &[u8], y_pred: &[f64], protected: &[u8]) -> Result<ConfusionByGroup> {
    if y_true.len() != y_pred.len() || y_true.len() != protected.len() {
        return Err(Error::Data("label, prediction and protected lengths differ".into()));
    }
    if y_pred.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("predictions must lie in [0, 1]".into()));
    }
    let mut c = [Confusion::default(); 2];
    for i in 0..y_true.len() {
        c[usize::from(protected[i] == 1)].add(y_true[i], y_pred[i]);
    }
    if c[0].total() == 0.0 {
        return Err(Error::EmptyGroup("unprivileged".into()));
    }
    if c[1].total() == 0.0 {
        return Err(Error::EmptyGroup("privileged".into()));
    }
    Ok(ConfusionByGroup {
        unprivileged: c[0],
        privileged: c[1],
    })
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Confusion rates of one group; `None` where the denominator is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fnr: Option<f64>,
    pub acceptance: Option<f64>,
    pub base_rate: Option<f64>,
}

impl From<&Confusion> for Rates {
    fn from(c: &Confusion) -> Self {
        Rates {
            tpr: ratio(c.tp, c.positives()),
            fpr: ratio(c.fp, c.negatives()),
            tnr: ratio(c.tn, c.negatives()),
            fnr: ratio(c.fn_, c.positives()),
            acceptance: ratio(c.tp + c.fp, c.total()),
            base_rate: ratio(c.positives(), c.total()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub unprivileged: Rates,
    pub privileged: Rates,
}

impl From<&ConfusionByGroup> for GroupRates {
    fn from(c: &ConfusionByGroup) -> Self {
        GroupRates {
            unprivileged: Rates::from(&c.unprivileged),
            privileged: Rates::from(&c.privileged),
        }
    }
}

fn pair(u: Option<f64>, p: Option<f64>, what: &str) -> Result<(f64, f64)> {
    match (u, p) {
        (Some(u), Some(p)) => Ok((u, p)),
        _ => Err(Error::EmptyGroup(format!("{what} undefined for a group"))),
    }
}

/// Statistical parity difference: acceptance(unprivileged) − acceptance(privileged).
pub fn spd(rates: &GroupRates) -> Result<f64> {
    let (u, p) = pair(rates.unprivileged.acceptance, rates.privileged.acceptance, "acceptance rate")?;
    Ok(u - p)
}

/// Disparate impact: acceptance(unprivileged) / acceptance(privileged).
pub fn di(rates: &GroupRates) -> Result<f64> {
    let (u, p) = pair(rates.unprivileged.acceptance, rates.privileged.acceptance, "acceptance rate")?;
    if p == 0.0 {
        return Err(Error::UndefinedRatio("privileged acceptance rate is zero".into()));
    }
    Ok(u / p)
}

/// Average odds difference, signed: ½[(FPR_u − FPR_p) + (TPR_u − TPR_p)].
pub fn aod(rates: &GroupRates) -> Result<f64> {
    let (fu, fp) = pair(rates.unprivileged.fpr, rates.privileged.fpr, "false positive rate")?;
    let (tu, tp) = pair(rates.unprivileged.tpr, rates.privileged.tpr, "true positive rate")?;
    Ok(0.5 * ((fu - fp) + (tu - tp)))
}

/// Equal opportunity difference: TPR_u − TPR_p.
pub fn eod(rates: &GroupRates) -> Result<f64> {
    let (u, p) = pair(rates.unprivileged.tpr, rates.privileged.tpr, "true positive rate")?;
    Ok(u - p)
}

/// Separation: ½|(FPR_u − FPR_p) + (FNR_u − FNR_p)|.
pub fn separation_sp(rates: &GroupRates) -> Result<f64> {
    let (fu, fp) = pair(rates.unprivileged.fpr, rates.privileged.fpr, "false positive rate")?;
    let (nu, np) = pair(rates.unprivileged.fnr, rates.privileged.fnr, "false negative rate")?;
    Ok(0.5 * ((fu - fp) + (nu - np)).abs())
}
