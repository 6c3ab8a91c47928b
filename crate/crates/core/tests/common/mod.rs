//! Fixture paths and brute-force oracles shared by the integration tests.
//! The oracles deliberately avoid the library's code paths.

#![allow(dead_code)]

use std::path::PathBuf;

use axle_eval::annotations::{BoundingBox, ImageRecord};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

/// Published mAP per database, model order v3-tiny..v11x.
pub const REAL_MAP: [f64; 9] = [0.03, 92.01, 98.26, 78.32, 92.06, 97.60, 89.98, 97.67, 98.88];
pub const SYNTHETIC_MAP: [f64; 9] = [1.78, 99.06, 98.30, 77.90, 92.15, 98.49, 82.65, 98.12, 99.02];
pub const MIXED_MAP: [f64; 9] = [
    76.42, 97.46, 98.28, 78.59, 92.09, 98.57, 81.20, 98.19, 99.04,
];

/// U of `a`: pairs with a > b, ties counting one half.
pub fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Distribution of U1 over all C(n1+n2, n1) assignments of pooled ranks,
/// by enumerating bitmasks.
pub fn enumerate_u_distribution(n1: usize, n2: usize) -> Vec<u64> {
    let n = n1 + n2;
    let mut counts = vec![0u64; n1 * n2 + 1];
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        // Bit i set: rank i+1 belongs to the first sample.
        let mut u = 0;
        let mut seconds_below = 0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                u += seconds_below;
            } else {
                seconds_below += 1;
            }
        }
        counts[u] += 1;
    }
    counts
}

pub fn iou_oracle(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let left = (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0);
    let right = (a.cx + a.w / 2.0).min(b.cx + b.w / 2.0);
    let top = (a.cy - a.h / 2.0).max(b.cy - b.h / 2.0);
    let bottom = (a.cy + a.h / 2.0).min(b.cy + b.h / 2.0);
    let inter = if right > left && bottom > top {
        (right - left) * (bottom - top)
    } else {
        0.0
    };
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Replays the greedy rule by repeated selection: take the highest-confidence
/// unvisited detection (lowest index on ties), give it the free ground-truth
/// box of highest IoU >= threshold (lowest index on ties).
/// Returns `(pairs, unmatched detections)` with pairs as (det, gt).
pub fn greedy_replay(
    rec: &ImageRecord,
    category: u32,
    iou_thr: f64,
    conf_thr: f64,
) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let mut pending: Vec<usize> = (0..rec.detections.len())
        .filter(|&i| {
            rec.detections[i].category_id == category && rec.detections[i].confidence >= conf_thr
        })
        .collect();
    let mut free: Vec<usize> = (0..rec.ground_truth.len())
        .filter(|&g| rec.ground_truth[g].category_id == category)
        .collect();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    while !pending.is_empty() {
        let mut pick = 0;
        for k in 1..pending.len() {
            if rec.detections[pending[k]].confidence > rec.detections[pending[pick]].confidence {
                pick = k;
            }
        }
        let d = pending.remove(pick);
        let mut best: Option<(usize, f64)> = None;
        for (pos, &g) in free.iter().enumerate() {
            let v = iou_oracle(&rec.detections[d].bbox, &rec.ground_truth[g].bbox);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b + 1e-12) {
                best = Some((pos, v));
            }
        }
        match best {
            Some((pos, _)) => pairs.push((d, free.remove(pos))),
            None => unmatched.push(d),
        }
    }
    (pairs, unmatched, free)
}

/// All-point AP by direct enumeration: for each point, the interpolated
/// precision is the maximum precision at any point with recall >= its
/// recall; each recall increment is weighted by that value.
pub fn envelope_ap(points: &[(f64, f64)]) -> f64 {
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.sort_by(f64::total_cmp);
    recalls.dedup();
    for r in recalls {
        let interp = points
            .iter()
            .filter(|p| p.0 >= r)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ap += (r - prev_recall) * interp;
        prev_recall = r;
    }
    ap
}

/// Cumulative (recall, precision) points by recounting prefixes.
pub fn prefix_points(flags: &[bool], gt_total: u64) -> Vec<(f64, f64)> {
    (1..=flags.len())
        .map(|k| {
            let tp = flags[..k].iter().filter(|&&f| f).count() as f64;
            (tp / gt_total as f64, tp / k as f64)
        })
        .collect()
}
