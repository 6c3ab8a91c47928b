//! Precision, recall, F1 and average precision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{CategoryId, Dataset};
use crate::error::{Error, Result};
use crate::matching::{check_thresholds, match_image, ConfusionCounts};

/// A ratio in [0, 1]; `degenerate` is set when its denominator was zero
/// and the value was defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }
}

pub fn precision(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp, c.tp + c.fn_)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Round half-up to `decimals` places. Inputs are non-negative percentages;
/// the nudge absorbs binary representation error at exact `.xx5` ties.
pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = x * scale;
    (scaled + scaled.abs() * 1e-12).round() / scale
}

/// One detection in a dataset-wide ranking, already judged by the greedy
/// per-image matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedDetection {
    pub confidence: f64,
    pub true_positive: bool,
}

/// Ranks every detection of `category_id` in the dataset by descending
/// confidence and marks each as TP or FP using [`match_image`].
///
/// Returns the ranking and the number of ground-truth objects of the
/// category. Ties keep image order, then file order.
pub fn rank_detections(
    d: &Dataset,
    category_id: CategoryId,
    iou_threshold: f64,
) -> Result<(Vec<RankedDetection>, u64)> {
    check_thresholds(iou_threshold, 0.0)?;
    let mut ranked = Vec::new();
    let mut gt_total = 0u64;
    for rec in &d.images {
        let (m, c) = match_image(rec, category_id, iou_threshold, 0.0)?;
        gt_total += c.tp + c.fn_;
        let mut flags = vec![None; rec.detections.len()];
        for &(det, _, _) in &m.pairs {
            flags[det] = Some(true);
        }
        for &det in &m.unmatched_detections {
            flags[det] = Some(false);
        }
        for (det, flag) in flags.into_iter().enumerate() {
            if let Some(true_positive) = flag {
                ranked.push(RankedDetection {
                    confidence: rec.detections[det].confidence,
                    true_positive,
                });
            }
        }
    }
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    Ok((ranked, gt_total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` after each ranked detection.
    pub points: Vec<(f64, f64)>,
    pub total_gt: u64,
}

/// Cumulative precision/recall over a ranked list.
///
/// The list is (stably) re-sorted by descending confidence, so callers may
/// pass it in any order that is already correct for ties.
pub fn pr_curve(ranked: &[RankedDetection], gt_total: u64) -> Result<PrCurve> {
    if gt_total == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut sorted = ranked.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut tp = 0u64;
    let points = sorted
        .iter()
        .enumerate()
        .map(|(i, det)| {
            tp += det.true_positive as u64;
            let recall = tp as f64 / gt_total as f64;
            (recall.min(1.0), tp as f64 / (i + 1) as f64)
        })
        .collect();
    Ok(PrCurve {
        points,
        total_gt: gt_total,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    AllPoint,
    ElevenPoint,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-point" => Ok(Interpolation::AllPoint),
            "11-point" => Ok(Interpolation::ElevenPoint),
            other => Err(Error::InvalidArgument(format!(
                "unknown interpolation `{other}` (expected all-point or 11-point)"
            ))),
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpolation::AllPoint => "all-point",
            Interpolation::ElevenPoint => "11-point",
        })
    }
}

pub fn average_precision(curve: &PrCurve, interpolation: Interpolation) -> f64 {
    match interpolation {
        Interpolation::AllPoint => all_point_ap(&curve.points),
        Interpolation::ElevenPoint => eleven_point_ap(&curve.points),
    }
}

/// Area under the monotone precision envelope, integrated stepwise.
fn all_point_ap(points: &[(f64, f64)]) -> f64 {
    let mut recall = Vec::with_capacity(points.len() + 2);
    let mut prec = Vec::with_capacity(points.len() + 2);
    recall.push(0.0);
    prec.push(0.0);
    for &(r, p) in points {
        recall.push(r);
        prec.push(p);
    }
    recall.push(1.0);
    prec.push(0.0);
    for i in (0..prec.len() - 1).rev() {
        prec[i] = prec[i].max(prec[i + 1]);
    }
    (1..recall.len())
        .filter(|&i| recall[i] != recall[i - 1])
        .map(|i| (recall[i] - recall[i - 1]) * prec[i])
        .sum()
}

fn eleven_point_ap(points: &[(f64, f64)]) -> f64 {
    (0..=10)
        .map(|k| {
            let level = k as f64 / 10.0;
            points
                .iter()
                .filter(|&&(r, _)| r >= level - 1e-12)
                .map(|&(_, p)| p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Unweighted mean of per-category AP.
pub fn mean_average_precision<K>(per_category_ap: &BTreeMap<K, f64>) -> Result<f64> {
    if per_category_ap.is_empty() {
        return Err(Error::InvalidArgument(
            "mAP needs at least one category".into(),
        ));
    }
    Ok(per_category_ap.values().sum::<f64>() / per_category_ap.len() as f64)
}

/// Table-ready percentages, rounded half-up to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub recall_pct: f64,
    pub precision_pct: f64,
    pub f1_pct: f64,
    pub map_pct: Option<f64>,
    pub degenerate: bool,
}

/// Builds a row from counts; `map_pct` (already a percentage) passes through.
pub fn metrics_row(c: &ConfusionCounts, map_pct: Option<f64>) -> MetricsRow {
    let p = precision(c);
    let r = recall(c);
    MetricsRow {
        recall_pct: round_half_up(r.value * 100.0, 2),
        precision_pct: round_half_up(p.value * 100.0, 2),
        f1_pct: round_half_up(f1(p.value, r.value) * 100.0, 2),
        map_pct: map_pct.map(|m| round_half_up(m, 2)),
        degenerate: p.degenerate || r.degenerate,
    }
}
