//! Frame-level scoring and ROC evaluation.
//!
//! A frame's anomaly score is the largest 1-NN distance among its
//! patches. All test frames are pooled into one ROC; AUC is the
//! Mann-Whitney statistic with ties counted one half, and EER is read off
//! the ROC by linear interpolation of the FPR = FNR crossing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataman::DatasetManifest;
use crate::error::{Error, Result};
use crate::featio::FrameRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub clip_id: String,
    /// 0-based.
    pub frame_index: u32,
    pub score: f64,
    /// 1 = anomalous.
    pub label: u8,
}

impl FrameScore {
    pub fn is_anomalous(&self) -> bool {
        self.label == 1
    }
}

/// Max over a frame's patch distances (0 for an empty slice).
pub fn frame_score(patch_distances: &[f64]) -> f64 {
    patch_distances.iter().copied().fold(0.0, f64::max)
}

/// Score and label every frame. `distances` holds `patch_count` values
/// per frame, frame-major, in the order of `frames`.
pub fn frame_scores(
    frames: &[FrameRef],
    distances: &[f64],
    patch_count: usize,
    manifest: &DatasetManifest,
) -> Result<Vec<FrameScore>> {
    if patch_count == 0 {
        return Err(Error::Invalid("patch count must be positive".into()));
    }
    if distances.len() != frames.len() * patch_count {
        return Err(Error::Invalid(format!(
            "{} patch distances for {} frames of {patch_count} patches",
            distances.len(),
            frames.len()
        )));
    }
    frames
        .iter()
        .zip(distances.chunks_exact(patch_count))
        .map(|(f, d)| {
            let clip = manifest.clip(&f.clip_id).ok_or_else(|| {
                Error::Manifest(format!("clip '{}' is not in the manifest", f.clip_id))
            })?;
            Ok(FrameScore {
                clip_id: f.clip_id.clone(),
                frame_index: f.frame_index,
                score: frame_score(d),
                label: u8::from(clip.is_anomalous(f.frame_index)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    /// Decision thresholds, descending; the first is +inf (nothing flagged).
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
    pub eer: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC vertices over every distinct score, from (0,0) to (1,1).
pub fn roc_curve(pairs: &[(f64, bool)]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Invalid(format!(
            "ROC needs both classes (positives {positives}, negatives {negatives})"
        )));
    }
    if let Some(p) = pairs.iter().find(|p| p.0.is_nan()) {
        return Err(Error::Invalid(format!("score {} is not a number", p.0)));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut thresholds, mut fpr, mut tpr) = (vec![f64::INFINITY], vec![0.0], vec![0.0]);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(s);
        fpr.push(fp as f64 / negatives as f64);
        tpr.push(tp as f64 / positives as f64);
    }
    Ok((thresholds, fpr, tpr))
}

/// Mann-Whitney AUC: probability a random positive outscores a random
/// negative, ties counting one half.
pub fn rank_auc(pairs: &[(f64, bool)]) -> Result<f64> {
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Invalid("AUC needs both classes".into()));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j share their mean
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = sorted[i..j].iter().filter(|p| p.1).count();
        rank_sum += mean_rank * pos_in_group as f64;
        i = j;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Trapezoidal area under ROC vertices.
pub fn trapezoid_auc(fpr: &[f64], tpr: &[f64]) -> f64 {
    fpr.windows(2)
        .zip(tpr.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0)
        .sum()
}

/// Equal error rate: the FPR where FPR = 1 - TPR, interpolated linearly
/// between the two ROC vertices that bracket the crossing.
pub fn eer(fpr: &[f64], tpr: &[f64]) -> Result<f64> {
    if fpr.len() != tpr.len() {
        return Err(Error::Invalid("fpr and tpr differ in length".into()));
    }
    if fpr.len() < 2 {
        return Err(Error::Invalid("EER needs at least two ROC points".into()));
    }
    let gap = |i: usize| fpr[i] - (1.0 - tpr[i]);
    if gap(0) >= 0.0 {
        return Ok(fpr[0]);
    }
    for i in 1..fpr.len() {
        let g = gap(i);
        if g == 0.0 {
            return Ok(fpr[i]);
        }
        if g > 0.0 {
            let g0 = gap(i - 1);
            let t = -g0 / (g - g0);
            return Ok(fpr[i - 1] + t * (fpr[i] - fpr[i - 1]));
        }
    }
    Err(Error::Invalid("ROC never reaches FPR = FNR".into()))
}

pub fn roc_auc_pairs(pairs: &[(f64, bool)]) -> Result<RocReport> {
    let (thresholds, fpr, tpr) = roc_curve(pairs)?;
    let positives = pairs.iter().filter(|p| p.1).count();
    Ok(RocReport {
        auc: rank_auc(pairs)?,
        eer: eer(&fpr, &tpr)?,
        thresholds,
        fpr,
        tpr,
        positives,
        negatives: pairs.len() - positives,
    })
}

pub fn roc_auc(scores: &[FrameScore]) -> Result<RocReport> {
    let pairs: Vec<(f64, bool)> = scores.iter().map(|s| (s.score, s.is_anomalous())).collect();
    roc_auc_pairs(&pairs)
}

/// Write `clip_id,frame_index,score,label` rows.
pub fn write_scores_csv(path: impl AsRef<Path>, scores: &[FrameScore]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    for s in scores {
        w.serialize(s).map_err(|e| Error::parse(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<FrameScore>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path.display().to_string(), e)))
        .collect()
}
