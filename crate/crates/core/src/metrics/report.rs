use serde::{Deserialize, Serialize};

use super::{aod, confusion_by_group, di, eod, separation_sp, spd, theil, Confusion, GroupRates};
use crate::error::{Error, Result};

/// ½(TPR + TNR) over the pooled confusion counts.
pub fn balanced_accuracy(pooled: &Confusion) -> Result<f64> {
    if pooled.positives() == 0.0 || pooled.negatives() == 0.0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(0.5 * (pooled.tp / pooled.positives() + pooled.tn / pooled.negatives()))
}

/// What the wrongly-accepted count is divided by in the loss term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FprDenominator {
    /// FP / N over every applicant: the loss is a share of the whole book.
    #[default]
    AllApplicants,
    /// FP / (FP + TN), the textbook false positive rate.
    Negatives,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfitConfig {
    pub roi: f64,
    pub loss_coefficient: f64,
    pub fpr_denominator: FprDenominator,
}

impl Default for ProfitConfig {
    fn default() -> Self {
        ProfitConfig {
            roi: 0.34,
            loss_coefficient: 0.9,
            fpr_denominator: FprDenominator::AllApplicants,
        }
    }
}

impl ProfitConfig {
    /// ROI = interest rate × years × early-repayment coefficient.
    pub fn from_loan_terms(interest_rate: f64, years: f64, erc: f64, loss_coefficient: f64) -> Result<Self> {
        let cfg = ProfitConfig {
            roi: interest_rate * years * erc,
            loss_coefficient,
            ..ProfitConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.roi > 0.0 && self.roi.is_finite()) {
            return Err(Error::Config(format!("ROI must be positive, got {}", self.roi)));
        }
        if !(self.loss_coefficient > 0.0 && self.loss_coefficient <= 1.0) {
            return Err(Error::Config(format!(
                "loss coefficient must lie in (0, 1], got {}",
                self.loss_coefficient
            )));
        }
        Ok(())
    }

    pub fn from_rates(&self, tpr: f64, fpr: f64) -> f64 {
        tpr * self.roi - fpr * self.loss_coefficient
    }
}

/// TPR·ROI − FPR·LC on pooled counts.
pub fn profit(pooled: &Confusion, cfg: &ProfitConfig) -> Result<f64> {
    if pooled.positives() == 0.0 || pooled.negatives() == 0.0 {
        return Err(Error::DegenerateLabels);
    }
    let tpr = pooled.tp / pooled.positives();
    let fpr = match cfg.fpr_denominator {
        FprDenominator::AllApplicants => pooled.fp / pooled.total(),
        FprDenominator::Negatives => pooled.fp / pooled.negatives(),
    };
    Ok(cfg.from_rates(tpr, fpr))
}

/// Fairness intervals; membership is strict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub difference: (f64, f64),
    pub ratio: (f64, f64),
    pub theil_max: f64,
}

impl Default for Intervals {
    fn default() -> Self {
        Intervals {
            difference: (-0.1, 0.1),
            ratio: (0.8, 1.25),
            theil_max: 0.15,
        }
    }
}

fn inside(v: Option<f64>, (lo, hi): (f64, f64)) -> bool {
    v.is_some_and(|v| v > lo && v < hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessVerdicts {
    pub di: bool,
    pub spd: bool,
    pub aod: bool,
    pub eod: bool,
    pub theil: bool,
}

impl FairnessVerdicts {
    pub fn all(&self) -> bool {
        self.di && self.spd && self.aod && self.eod && self.theil
    }

    pub fn count(&self) -> usize {
        [self.di, self.spd, self.aod, self.eod, self.theil]
            .iter()
            .filter(|&&v| v)
            .count()
    }
}

/// An undefined metric is never inside its interval.
pub fn fairness_verdicts(report: &MetricReport, intervals: &Intervals) -> FairnessVerdicts {
    FairnessVerdicts {
        di: inside(report.di, intervals.ratio),
        spd: inside(report.spd, intervals.difference),
        aod: inside(report.aod, intervals.difference),
        eod: inside(report.eod, intervals.difference),
        theil: report.theil.is_some_and(|t| t < intervals.theil_max),
    }
}

/// One evaluation row. Metrics that are undefined on the sample are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub di: Option<f64>,
    pub spd: Option<f64>,
    pub aod: Option<f64>,
    pub eod: Option<f64>,
    pub separation_sp: Option<f64>,
    pub theil: Option<f64>,
    pub balanced_accuracy: f64,
    pub profit: f64,
    pub verdicts: FairnessVerdicts,
}

pub const CSV_HEADER: [&str; 9] = ["processor", "type", "DI", "SPD", "AOD", "EOD", "TI", "BAcc", "P"];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

impl MetricReport {
    /// Evaluates predictions in `[0, 1]` against labels and protected flags.
    pub fn compute(
        y_true: &[u8],
        y_pred: &[f64],
        protected: &[u8],
        profit_cfg: &ProfitConfig,
        intervals: &Intervals,
    ) -> Result<Self> {
        let confusion = confusion_by_group(y_true, y_pred, protected)?;
        let rates = GroupRates::from(&confusion);
        let pooled = confusion.pooled();
        let mut report = MetricReport {
            di: di(&rates).ok(),
            spd: spd(&rates).ok(),
            aod: aod(&rates).ok(),
            eod: eod(&rates).ok(),
            separation_sp: separation_sp(&rates).ok(),
            theil: theil(y_true, y_pred).ok(),
            balanced_accuracy: balanced_accuracy(&pooled)?,
            profit: profit(&pooled, profit_cfg)?,
            verdicts: FairnessVerdicts {
                di: false,
                spd: false,
                aod: false,
                eod: false,
                theil: false,
            },
        };
        report.verdicts = fairness_verdicts(&report, intervals);
        Ok(report)
    }

    /// The table row, in `CSV_HEADER` order.
    pub fn csv_row(&self, processor: &str, kind: &str) -> Vec<String> {
        vec![
            processor.to_string(),
            kind.to_string(),
            cell(self.di),
            cell(self.spd),
            cell(self.aod),
            cell(self.eod),
            cell(self.theil),
            cell(Some(self.balanced_accuracy)),
            cell(Some(self.profit)),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(di: f64, spd: f64) -> MetricReport {
        MetricReport {
            di: Some(di),
            spd: Some(spd),
            aod: Some(0.0),
            eod: Some(0.0),
            separation_sp: Some(0.0),
            theil: Some(0.0),
            balanced_accuracy: 0.7,
            profit: 0.1,
            verdicts: FairnessVerdicts {
                di: false,
                spd: false,
                aod: false,
                eod: false,
                theil: false,
            },
        }
    }

    #[test]
    fn balanced_accuracy_cases() {
        let c = Confusion { tp: 8.0, fn_: 2.0, tn: 5.0, fp: 5.0 };
        assert!((balanced_accuracy(&c).unwrap() - 0.65).abs() < 1e-12);
        let perfect = Confusion { tp: 3.0, fn_: 0.0, tn: 4.0, fp: 0.0 };
        assert_eq!(balanced_accuracy(&perfect).unwrap(), 1.0);
        let one_class = Confusion { tp: 3.0, fn_: 1.0, tn: 0.0, fp: 0.0 };
        assert!(balanced_accuracy(&one_class).is_err());
    }

    #[test]
    fn profit_from_rates() {
        let cfg = ProfitConfig::default();
        assert!((cfg.from_rates(1.0, 0.0) - 0.34).abs() < 1e-15);
        assert!((cfg.from_rates(0.8, 0.1) - 0.182).abs() < 1e-12);
    }

    #[test]
    fn profit_denominators() {
        let c = Confusion { tp: 8.0, fn_: 2.0, tn: 9.0, fp: 1.0 };
        let textbook = ProfitConfig {
            fpr_denominator: FprDenominator::Negatives,
            ..ProfitConfig::default()
        };
        assert!((profit(&c, &textbook).unwrap() - 0.182).abs() < 1e-12);
        let book = profit(&c, &ProfitConfig::default()).unwrap();
        assert!((book - (0.8 * 0.34 - 0.05 * 0.9)).abs() < 1e-12);
    }

    #[test]
    fn loan_terms() {
        let cfg = ProfitConfig::from_loan_terms(0.17, 2.0, 1.0, 0.9).unwrap();
        assert!((cfg.roi - 0.34).abs() < 1e-12);
        assert!(ProfitConfig::from_loan_terms(0.1, 1.0, 1.0, 1.5).is_err());
        assert!(ProfitConfig::from_loan_terms(0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn verdict_boundaries() {
        let iv = Intervals::default();
        assert!(fairness_verdicts(&report(1.0, 0.0), &iv).di);
        assert!(!fairness_verdicts(&report(1.0, -0.1), &iv).spd);
        let v = fairness_verdicts(&report(0.756, -0.14), &iv);
        assert!(!v.di && !v.spd);
        let mut r = report(1.0, 0.0);
        r.di = None;
        r.theil = Some(0.3);
        let v = fairness_verdicts(&r, &iv);
        assert!(!v.di && !v.theil && v.aod);
    }

    #[test]
    fn csv_row_order_and_na() {
        let mut r = report(0.9, -0.05);
        r.theil = None;
        let row = r.csv_row("Reweighing", "pre");
        assert_eq!(row.len(), CSV_HEADER.len());
        assert_eq!(row[2], "0.9000");
        assert_eq!(row[6], "NA");
    }

    #[test]
    fn compute_end_to_end() {
        let y = [1, 1, 0, 0, 1, 1, 0, 0];
        let yhat = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = MetricReport::compute(&y, &yhat, &s, &ProfitConfig::default(), &Intervals::default()).unwrap();
        assert!((r.spd.unwrap() + 0.5).abs() < 1e-12);
        assert!((r.di.unwrap() - 0.5).abs() < 1e-12);
        assert!((r.eod.unwrap() + 0.5).abs() < 1e-12);
        assert!((r.aod.unwrap() + 0.5).abs() < 1e-12);
        assert!(!r.verdicts.spd);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"verdicts\""));
    }
}
