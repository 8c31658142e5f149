//! Post-processing mitigation. Both processors see only scores, labels and
//! protected flags, never features or the model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aod, balanced_accuracy, calibration_by_group, confusion_by_group, eod, spd, GroupRates};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocConstraint {
    Spd,
    Aod,
    Eod,
}

impl FromStr for RocConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spd" | "statistical_parity_difference" => Ok(RocConstraint::Spd),
            "aod" | "average_odds_difference" => Ok(RocConstraint::Aod),
            "eod" | "equal_opportunity_difference" => Ok(RocConstraint::Eod),
            other => Err(Error::Config(format!("unknown reject-option constraint `{other}`"))),
        }
    }
}

impl fmt::Display for RocConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RocConstraint::Spd => "spd",
            RocConstraint::Aod => "aod",
            RocConstraint::Eod => "eod",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocConfig {
    pub constraint: RocConstraint,
    pub thresholds: Linspace,
    pub margins: Linspace,
    /// Open interval the constraint metric must fall in.
    pub bound: (f64, f64),
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linspace {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Linspace {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Linspace { lo, hi, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            k => (0..k).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (k - 1) as f64).collect(),
        }
    }
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig {
            constraint: RocConstraint::Spd,
            thresholds: Linspace::new(0.3, 0.7, 10),
            margins: Linspace::new(0.01, 0.25, 10),
            bound: (-0.1, 0.1),
        }
    }
}

/// Reject-option relabeling: inside `[threshold − margin, threshold + margin]`
/// the unprivileged group gets the favorable label and the privileged group
/// the unfavorable one; elsewhere plain thresholding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPolicy {
    pub constraint: RocConstraint,
    pub threshold: f64,
    pub margin: f64,
    /// Constraint metric and balanced accuracy on the fitting data.
    pub metric: f64,
    pub balanced_accuracy: f64,
    /// False when no grid pair met the bound and the least-violating one was kept.
    pub feasible: bool,
}

impl RocPolicy {
    pub fn new(constraint: RocConstraint, threshold: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin < 0.5) {
            return Err(Error::Config(format!("critical-region margin {margin} outside (0, 0.5)")));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(RocPolicy {
            constraint,
            threshold,
            margin,
            metric: f64::NAN,
            balanced_accuracy: f64::NAN,
            feasible: true,
        })
    }

    pub fn in_region(&self, p: f64) -> bool {
        (p - self.threshold).abs() <= self.margin
    }
}

pub fn roc_apply(policy: &RocPolicy, probabilities: &[f64], protected: &[u8]) -> Result<Vec<u8>> {
    if probabilities.len() != protected.len() {
        return Err(Error::Data("probabilities and protected flags must align".into()));
    }
    Ok(probabilities
        .iter()
        .zip(protected)
        .map(|(&p, &s)| {
            if policy.in_region(p) {
                u8::from(s == 0)
            } else {
                u8::from(p >= policy.threshold)
            }
        })
        .collect())
}

fn constraint_metric(kind: RocConstraint, rates: &GroupRates) -> Result<f64> {
    match kind {
        RocConstraint::Spd => spd(rates),
        RocConstraint::Aod => aod(rates),
        RocConstraint::Eod => eod(rates),
    }
}

/// Picks the (threshold, margin) pair with the best balanced accuracy whose
/// constraint metric lies strictly inside the bound.
pub fn roc_fit(probabilities: &[f64], y_true: &[u8], protected: &[u8], cfg: &RocConfig) -> Result<RocPolicy> {
    let (thresholds, margins) = (cfg.thresholds.values(), cfg.margins.values());
    if thresholds.is_empty() || margins.is_empty() {
        return Err(Error::Config("reject-option grid is empty".into()));
    }
    let mut best: Option<(RocPolicy, f64)> = None;
    for &t in &thresholds {
        for &m in &margins {
            let mut policy = RocPolicy::new(cfg.constraint, t, m)?;
            let labels = roc_apply(&policy, probabilities, protected)?;
            let preds: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            let confusion = confusion_by_group(y_true, &preds, protected)?;
            let rates = GroupRates::from(&confusion);
            let Ok(metric) = constraint_metric(cfg.constraint, &rates) else {
                continue;
            };
            let bacc = balanced_accuracy(&confusion.pooled())?;
            let (lo, hi) = cfg.bound;
            let excess = if metric > lo && metric < hi {
                0.0
            } else {
                (lo - metric).max(metric - hi).max(f64::MIN_POSITIVE)
            };
            policy.metric = metric;
            policy.balanced_accuracy = bacc;
            policy.feasible = excess == 0.0;
            // lower excess first, then higher accuracy; grid order breaks ties
            let replace = match &best {
                None => true,
                Some((b, bx)) => excess < *bx || (excess == *bx && bacc > b.balanced_accuracy),
            };
            if replace {
                best = Some((policy, excess));
            }
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::EmptyGroup("constraint metric undefined on the fitting data".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeoCost {
    Fnr,
    Fpr,
    Weighted,
}

impl FromStr for CeoCost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fnr" => Ok(CeoCost::Fnr),
            "fpr" => Ok(CeoCost::Fpr),
            "weighted" => Ok(CeoCost::Weighted),
            other => Err(Error::Config(format!("unknown cost constraint `{other}`"))),
        }
    }
}

impl fmt::Display for CeoCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CeoCost::Fnr => "fnr",
            CeoCost::Fpr => "fpr",
            CeoCost::Weighted => "weighted",
        })
    }
}

/// Calibrated equalized odds by deterministic mixing toward group base rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeoPolicy {
    pub cost: CeoCost,
    /// Mixing rate per group (`[unprivileged, privileged]`).
    pub mix: [f64; 2],
    pub base_rate: [f64; 2],
    /// Generalized cost per group before mixing.
    pub group_cost: [f64; 2],
    /// Largest calibration gap on the fitting data; above 0.2 the scores are
    /// too poorly calibrated for the method's guarantees.
    pub calibration_gap: f64,
}

impl CeoPolicy {
    pub fn calibration_warning(&self) -> bool {
        self.calibration_gap > 0.2
    }
}

struct GroupStats {
    base: f64,
    gfnr: f64,
    gfpr: f64,
}

fn group_stats(p: &[f64], y: &[u8], s: &[u8], g: u8) -> Result<GroupStats> {
    let (mut n, mut pos, mut neg) = (0.0, 0.0, 0.0);
    let (mut miss, mut false_alarm) = (0.0, 0.0);
    for i in 0..p.len() {
        if s[i] != g {
            continue;
        }
        n += 1.0;
        if y[i] == 1 {
            pos += 1.0;
            miss += 1.0 - p[i];
        } else {
            neg += 1.0;
            false_alarm += p[i];
        }
    }
    if n == 0.0 {
        return Err(Error::EmptyGroup(format!("group {g} has no instances")));
    }
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::Data(format!("group {g} lacks one label class; its cost is undefined")));
    }
    Ok(GroupStats {
        base: pos / n,
        gfnr: miss / pos,
        gfpr: false_alarm / neg,
    })
}

fn cost_of(cost: CeoCost, gfnr: f64, gfpr: f64, base: f64) -> f64 {
    match cost {
        CeoCost::Fnr => gfnr,
        CeoCost::Fpr => gfpr,
        CeoCost::Weighted => 0.5 * (gfpr * (1.0 - base) + gfnr * base),
    }
}

/// Mixing rate `(c_other − c_g) / (c_trivial − c_g)` clamped to `[0, 1]`.
pub fn mixing_rate(own: f64, other: f64, trivial: f64) -> f64 {
    if other <= own || trivial <= own {
        return 0.0;
    }
    ((other - own) / (trivial - own)).clamp(0.0, 1.0)
}

pub fn ceo_fit(probabilities: &[f64], y_true: &[u8], protected: &[u8], cost: CeoCost) -> Result<CeoPolicy> {
    if probabilities.len() != y_true.len() || y_true.len() != protected.len() {
        return Err(Error::Data("probabilities, labels and flags must align".into()));
    }
    let stats = [
        group_stats(probabilities, y_true, protected, 0)?,
        group_stats(probabilities, y_true, protected, 1)?,
    ];
    let c = stats.each_ref().map(|g| cost_of(cost, g.gfnr, g.gfpr, g.base));
    // the base-rate predictor scores p = base for every row
    let trivial = stats.each_ref().map(|g| cost_of(cost, 1.0 - g.base, g.base, g.base));
    let mix = [mixing_rate(c[0], c[1], trivial[0]), mixing_rate(c[1], c[0], trivial[1])];
    let calibration_gap = calibration_by_group(probabilities, y_true, protected, 10)?.max_gap;
    Ok(CeoPolicy {
        cost,
        mix,
        base_rate: [stats[0].base, stats[1].base],
        group_cost: c,
        calibration_gap,
    })
}

/// `(1 − m_g)·p + m_g·base_g` per row.
pub fn ceo_apply(policy: &CeoPolicy, probabilities: &[f64], protected: &[u8]) -> Result<Vec<f64>> {
    if probabilities.len() != protected.len() {
        return Err(Error::Data("probabilities and protected flags must align".into()));
    }
    Ok(probabilities
        .iter()
        .zip(protected)
        .map(|(&p, &s)| {
            let g = usize::from(s);
            ((1.0 - policy.mix[g]) * p + policy.mix[g] * policy.base_rate[g]).clamp(0.0, 1.0)
        })
        .collect())
}

/// Generalized cost of each group under `probabilities`.
pub fn ceo_group_costs(probabilities: &[f64], y_true: &[u8], protected: &[u8], cost: CeoCost) -> Result<[f64; 2]> {
    let a = group_stats(probabilities, y_true, protected, 0)?;
    let b = group_stats(probabilities, y_true, protected, 1)?;
    Ok([cost_of(cost, a.gfnr, a.gfpr, a.base), cost_of(cost, b.gfnr, b.gfpr, b.base)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_is_closed() {
        let p = RocPolicy::new(RocConstraint::Spd, 0.5, 0.125).unwrap();
        let out = roc_apply(&p, &[0.375, 0.625, 0.374, 0.626], &[0, 1, 0, 1]).unwrap();
        assert_eq!(out, vec![1, 0, 0, 1]);
    }

    #[test]
    fn margin_bounds() {
        assert!(RocPolicy::new(RocConstraint::Spd, 0.5, 0.0).is_err());
        assert!(RocPolicy::new(RocConstraint::Spd, 0.5, 0.5).is_err());
    }

    #[test]
    fn fair_scores_keep_smallest_margin() {
        let p = [0.9, 0.1, 0.8, 0.2, 0.9, 0.1, 0.8, 0.2];
        let y = [1, 0, 1, 0, 1, 0, 1, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let policy = roc_fit(&p, &y, &s, &RocConfig::default()).unwrap();
        assert!(policy.feasible);
        assert!((policy.margin - 0.01).abs() < 1e-12);
        assert_eq!(roc_apply(&policy, &p, &s).unwrap(), vec![1, 0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn mixing_rate_arithmetic() {
        assert!((mixing_rate(0.1, 0.3, 0.5) - 0.5).abs() < 1e-12);
        assert_eq!(mixing_rate(0.2, 0.2, 0.5), 0.0);
        assert_eq!(mixing_rate(0.3, 0.1, 0.5), 0.0);
        assert_eq!(mixing_rate(0.1, 0.9, 0.5), 1.0);
    }

    #[test]
    fn ceo_equalizes_costs() {
        let p = [0.9, 0.8, 0.7, 0.2, 0.1, 0.6, 0.5, 0.6, 0.4, 0.45];
        let y = [1, 1, 1, 0, 0, 1, 1, 1, 0, 0];
        let s = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        for cost in [CeoCost::Fnr, CeoCost::Fpr, CeoCost::Weighted] {
            let policy = ceo_fit(&p, &y, &s, cost).unwrap();
            let adjusted = ceo_apply(&policy, &p, &s).unwrap();
            let c = ceo_group_costs(&adjusted, &y, &s, cost).unwrap();
            assert!((c[0] - c[1]).abs() < 0.01 || policy.mix.contains(&1.0), "{cost}: {c:?}");
            assert!(adjusted.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn equal_costs_no_mixing() {
        let p = [0.8, 0.3, 0.8, 0.3];
        let y = [1, 0, 1, 0];
        let s = [0, 0, 1, 1];
        let policy = ceo_fit(&p, &y, &s, CeoCost::Weighted).unwrap();
        assert_eq!(policy.mix, [0.0, 0.0]);
        assert_eq!(ceo_apply(&policy, &p, &s).unwrap(), p.to_vec());
    }

    #[test]
    fn single_class_group_is_error() {
        assert!(ceo_fit(&[0.5, 0.5, 0.5], &[1, 1, 0], &[0, 0, 1], CeoCost::Fnr).is_err());
    }
}
