use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Theil index over benefits `b_i = ŷ_i − y_i + 1`, with `0·ln 0 = 0`.
pub fn theil(y_true: &[u8], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::Data("theil needs equal-length, non-empty vectors".into()));
    }
    let b: Vec<f64> = y_true
        .iter()
        .zip(y_pred)
        .map(|(&y, &p)| p - f64::from(y) + 1.0)
        .collect();
    let mu = b.iter().sum::<f64>() / b.len() as f64;
    if mu <= 0.0 {
        return Err(Error::Data("mean benefit is zero (every instance a false negative)".into()));
    }
    let sum: f64 = b
        .iter()
        .map(|&bi| {
            let r = bi / mu;
            if r > 0.0 {
                r * r.ln()
            } else {
                0.0
            }
        })
        .sum();
    Ok((sum / b.len() as f64).max(0.0))
}

/// Equal-width bin index in `[0, bins)` for each probability.
pub fn score_bins(probabilities: &[f64], bins: usize) -> Vec<usize> {
    probabilities
        .iter()
        .map(|&p| ((p * bins as f64).floor() as usize).min(bins.saturating_sub(1)))
        .collect()
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information (nats) between the protected flag and a
/// discretized score: `H(S) + H(R) − H(S, R)`.
pub fn mutual_info_independence(score_bins: &[usize], protected: &[u8]) -> Result<f64> {
    if score_bins.len() != protected.len() || score_bins.is_empty() {
        return Err(Error::Data("bins and protected flags must align".into()));
    }
    let n_bins = score_bins.iter().max().map_or(0, |m| m + 1);
    if n_bins < 2 {
        return Err(Error::Config("mutual information needs at least two score bins".into()));
    }
    let mut joint = vec![[0.0f64; 2]; n_bins];
    for (&b, &s) in score_bins.iter().zip(protected) {
        joint[b][usize::from(s)] += 1.0;
    }
    let n = score_bins.len() as f64;
    let h_s = entropy((0..2).map(|s| joint.iter().map(|r| r[s]).sum()), n);
    let h_r = entropy(joint.iter().map(|r| r[0] + r[1]), n);
    let h_sr = entropy(joint.iter().flat_map(|r| r.iter().copied()), n);
    Ok((h_s + h_r - h_sr).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_predicted: Option<f64>,
    pub favorable_rate: Option<f64>,
}

/// Per-group reliability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub unprivileged: Vec<CalibrationBin>,
    pub privileged: Vec<CalibrationBin>,
    /// Largest |mean predicted − favorable rate| over non-empty bins.
    pub max_gap: f64,
    pub empty_bins: usize,
}

pub fn calibration_by_group(
    probabilities: &[f64],
    y_true: &[u8],
    protected: &[u8],
    bins: usize,
) -> Result<CalibrationTable> {
    if bins < 2 {
        return Err(Error::Config("calibration needs at least two bins".into()));
    }
    if probabilities.len() != y_true.len() || y_true.len() != protected.len() {
        return Err(Error::Data("probabilities, labels and flags must align".into()));
    }
    let idx = score_bins(probabilities, bins);
    let mut acc = [vec![(0usize, 0.0f64, 0.0f64); bins], vec![(0usize, 0.0, 0.0); bins]];
    for i in 0..idx.len() {
        let cell = &mut acc[usize::from(protected[i])][idx[i]];
        cell.0 += 1;
        cell.1 += probabilities[i];
        cell.2 += f64::from(y_true[i]);
    }
    let mut max_gap = 0.0f64;
    let mut empty_bins = 0;
    let mut tables = acc.iter().map(|group| {
        group
            .iter()
            .enumerate()
            .map(|(b, &(count, sp, sy))| {
                let (mean_predicted, favorable_rate) = if count > 0 {
                    let (mp, fr) = (sp / count as f64, sy / count as f64);
                    max_gap = max_gap.max((mp - fr).abs());
                    (Some(mp), Some(fr))
                } else {
                    empty_bins += 1;
                    (None, None)
                };
                CalibrationBin {
                    lower: b as f64 / bins as f64,
                    upper: (b + 1) as f64 / bins as f64,
                    count,
                    mean_predicted,
                    favorable_rate,
                }
            })
            .collect::<Vec<_>>()
    });
    let unprivileged = tables.next().unwrap_or_default();
    let privileged = tables.next().unwrap_or_default();
    drop(tables);
    Ok(CalibrationTable {
        unprivileged,
        privileged,
        max_gap,
        empty_bins,
    })
}
