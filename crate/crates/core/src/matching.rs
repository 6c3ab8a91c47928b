//! IoU and greedy detection-to-ground-truth matching.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::annotations::{BoundingBox, CategoryId, ImageRecord};
use crate::error::{Error, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.25;

/// IoUs closer than this count as tied.
pub const IOU_TIE_EPS: f64 = 1e-12;

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    for bx in [a, b] {
        if bx.area().is_nan() || bx.area() <= 0.0 {
            return Err(Error::InvalidBox(format!("degenerate box {bx:?}")));
        }
    }
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    // Areas from the same corners as the intersection, so iou(a, a) == 1.
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts::new(self.tp + rhs.tp, self.fp + rhs.fp, self.fn_ + rhs.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

impl<'a> Sum<&'a ConfusionCounts> for ConfusionCounts {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

pub fn accumulate_counts<'a>(
    per_image: impl IntoIterator<Item = &'a ConfusionCounts>,
) -> ConfusionCounts {
    per_image.into_iter().sum()
}

/// Indices refer to positions in the image's `detections` and
/// `ground_truth` vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(detection, ground truth, iou)` in matching order.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Considered detections left unmatched, in matching order.
    pub unmatched_detections: Vec<usize>,
    /// Ground-truth objects of the category left unmatched, ascending.
    pub unmatched_ground_truth: Vec<usize>,
}

impl MatchResult {
    pub fn counts(&self) -> ConfusionCounts {
        ConfusionCounts::new(
            self.pairs.len() as u64,
            self.unmatched_detections.len() as u64,
            self.unmatched_ground_truth.len() as u64,
        )
    }
}

pub(crate) fn check_thresholds(iou_threshold: f64, confidence_threshold: f64) -> Result<()> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "IoU threshold {iou_threshold} outside (0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&confidence_threshold) {
        return Err(Error::InvalidArgument(format!(
            "confidence threshold {confidence_threshold} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Indices of the category's detections at or above the confidence
/// threshold, by descending confidence; ties keep file order.
pub(crate) fn ranked_detections(
    rec: &ImageRecord,
    category_id: CategoryId,
    confidence_threshold: f64,
) -> Vec<usize> {
    let mut order: Vec<usize> = rec
        .detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.category_id == category_id && d.confidence >= confidence_threshold)
        .map(|(i, _)| i)
        .collect();
    order.sort_by(|&a, &b| {
        rec.detections[b]
            .confidence
            .total_cmp(&rec.detections[a].confidence)
    });
    order
}

/// Greedy matching of one image for one category.
///
/// Detections are visited by descending confidence; each claims the still
/// unmatched ground-truth box with the highest IoU at or above
/// `iou_threshold` (lowest index on IoU ties, within [`IOU_TIE_EPS`]).
pub fn match_image(
    rec: &ImageRecord,
    category_id: CategoryId,
    iou_threshold: f64,
    confidence_threshold: f64,
) -> Result<(MatchResult, ConfusionCounts)> {
    check_thresholds(iou_threshold, confidence_threshold)?;
    let gt: Vec<usize> = rec
        .ground_truth
        .iter()
        .enumerate()
        .filter(|(_, g)| g.category_id == category_id)
        .map(|(i, _)| i)
        .collect();
    let mut taken = vec![false; rec.ground_truth.len()];
    let mut result = MatchResult::default();

    for det_idx in ranked_detections(rec, category_id, confidence_threshold) {
        let det = &rec.detections[det_idx].bbox;
        let mut best: Option<(usize, f64)> = None;
        for &g in &gt {
            if taken[g] {
                continue;
            }
            let overlap = iou(det, &rec.ground_truth[g].bbox)?;
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b + IOU_TIE_EPS) {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, overlap)) => {
                taken[g] = true;
                result.pairs.push((det_idx, g, overlap));
            }
            None => result.unmatched_detections.push(det_idx),
        }
    }
    result.unmatched_ground_truth = gt.into_iter().filter(|&g| !taken[g]).collect();
    let counts = result.counts();
    Ok((result, counts))
}
