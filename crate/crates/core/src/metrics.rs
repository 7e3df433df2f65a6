//! Ranking metrics for anomaly scores.
//!
//! AUROC is the Mann–Whitney statistic with half credit for ties. AUPR is the
//! area under the precision–recall step curve (average precision), with tied
//! scores entering the curve together. Both have exhaustive reference
//! implementations in [`oracle`].

use crate::error::{Error, Result};

fn validate(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {s} is not comparable")));
    }
    let mut pos = 0;
    let mut neg = 0;
    for &l in labels {
        match l {
            0 => neg += 1,
            1 => pos += 1,
            other => return Err(Error::InvalidArgument(format!("label must be 0 or 1, got {other}"))),
        }
    }
    Ok((pos, neg))
}

/// Indices sorted by score, with the boundaries of equal-score groups.
fn tie_groups(scores: &[f64], descending: bool) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut ends = Vec::new();
    for k in 1..=order.len() {
        if k == order.len() || scores[order[k]] != scores[order[k - 1]] {
            ends.push(k);
        }
    }
    (order, ends)
}

/// Probability that a random anomalous point outscores a random normal one,
/// ties counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = validate(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(if pos == 0 { 0 } else { 1 }));
    }
    let (order, ends) = tie_groups(scores, false);
    // Twice the U statistic, kept integral so the result is exact.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    for end in ends {
        let group = &order[start..end];
        let p = group.iter().filter(|&&i| labels[i] == 1).count() as u128;
        let q = group.len() as u128 - p;
        twice_u += 2 * p * neg_below + p * q;
        neg_below += q;
        start = end;
    }
    Ok(twice_u as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Average precision: `Σ (R_k − R_{k−1}) · P_k` over descending score thresholds.
pub fn aupr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = validate(scores, labels)?;
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let (order, ends) = tie_groups(scores, true);
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut start = 0;
    for end in ends {
        for &i in &order[start..end] {
            if labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    Ok(area)
}

/// Exhaustive reference implementations.
pub mod oracle {
    use super::*;

    /// AUROC by comparing every (anomalous, normal) pair.
    pub fn auroc_all_pairs(scores: &[f64], labels: &[u8]) -> Result<f64> {
        let (pos, neg) = validate(scores, labels)?;
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass(if pos == 0 { 0 } else { 1 }));
        }
        let mut twice_wins: u128 = 0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                if si > sj {
                    twice_wins += 2;
                } else if si == sj {
                    twice_wins += 1;
                }
            }
        }
        Ok(twice_wins as f64 / (2 * pos as u128 * neg as u128) as f64)
    }

    /// AUPR by recounting precision and recall from scratch at every distinct
    /// score threshold.
    pub fn aupr_thresholds(scores: &[f64], labels: &[u8]) -> Result<f64> {
        let (pos, _) = validate(scores, labels)?;
        if pos == 0 {
            return Err(Error::NoPositives);
        }
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let mut prev_recall = 0.0;
        let mut area = 0.0;
        for t in thresholds {
            let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 1).count();
            let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 0).count();
            let recall = tp as f64 / pos as f64;
            let precision = tp as f64 / (tp + fp) as f64;
            area += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        Ok(area)
    }
}
