//! Acceptance criteria, one `[PASS]`/`[FAIL]` line each. Runs without the
//! libtest harness so the lines always print.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use axle_eval::annotations::{
    load_dataset, BoundingBox, Detection, GroundTruthObject, ImageRecord,
};
use axle_eval::composer::{compose_mixed, CompositionSpec};
use axle_eval::matching::{iou, match_image};
use axle_eval::metrics::{average_precision, f1, pr_curve, Interpolation, RankedDetection};
use axle_eval::report::{
    database_hypothesis_battery, derive_metric_table, load_matrix, version_hypothesis_battery,
};
use axle_eval::stats::{
    approx_p_value, exact_p_value, u_statistic, Decision, ExactDistribution, PMethod, Sample,
};
use common::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PP_TOLERANCE: f64 = 0.01;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    check(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })?;
    Ok(elapsed)
}

fn criterion_1_metric_chain_golden() -> Result<String, String> {
    let start = Instant::now();
    let m = load_matrix(fixture("experiment_matrix.csv")).map_err(|e| e.to_string())?;
    let derived = derive_metric_table(&m);
    let mut expected =
        csv::Reader::from_path(fixture("published_metrics.csv")).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for rec in expected.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let (model, db) = (&rec[0], &rec[1]);
        let row = derived
            .iter()
            .find(|k| k.model == model && k.database == db)
            .ok_or_else(|| format!("no derived row for {db}/{model}"))?;
        let ours = [
            row.metrics.recall_pct,
            row.metrics.precision_pct,
            row.metrics.f1_pct,
        ];
        for (k, name) in ["recall", "precision", "f1"].iter().enumerate() {
            let published: f64 = rec[2 + k].parse().map_err(|_| "bad fixture".to_string())?;
            checked += 1;
            if (ours[k] - published).abs() > PP_TOLERANCE + 1e-9 {
                mismatches.push(format!(
                    "{db}/{model} {name}: computed {:.2}, table {published:.2}",
                    ours[k]
                ));
            }
        }
    }
    check(checked == 81, || {
        format!("checked {checked} values, expected 81")
    })?;
    let elapsed = within_time(start, Duration::from_secs(1))?;
    check(mismatches.is_empty(), || {
        format!(
            "{} of 81 values outside ±0.01 pp: {}",
            mismatches.len(),
            mismatches.join("; ")
        )
    })?;
    Ok(format!("81/81 values within ±0.01 pp in {elapsed:?}"))
}

fn criterion_2_database_battery() -> Result<String, String> {
    let m = load_matrix(fixture("experiment_matrix.csv")).map_err(|e| e.to_string())?;
    let tests = database_hypothesis_battery(&m, 0.05).map_err(|e| e.to_string())?;
    let expected = [
        ("Real", "Synthetic", 31.0),
        ("Real", "Mixed", 34.0),
        ("Synthetic", "Mixed", 44.0),
    ];
    check(tests.len() == 3, || format!("{} comparisons", tests.len()))?;
    for (t, (a, b, u)) in tests.iter().zip(expected) {
        check(t.label_a == a && t.label_b == b, || {
            format!("order {} x {}", t.label_a, t.label_b)
        })?;
        check(t.u1 == u, || {
            format!("{a} x {b}: U = {}, expected {u}", t.u1)
        })?;
        check(t.critical_value == Some(17), || {
            format!("{a} x {b}: critical {:?}", t.critical_value)
        })?;
        check(t.decision == Decision::FailToReject, || {
            format!("{a} x {b}: {}", t.decision)
        })?;
    }
    Ok("U = 31, 34, 44 vs critical 17, all Fail to Reject".to_string())
}

fn criterion_3_version_battery() -> Result<String, String> {
    let m = load_matrix(fixture("experiment_matrix.csv")).map_err(|e| e.to_string())?;
    let tests = version_hypothesis_battery(&m, 0.05).map_err(|e| e.to_string())?;
    let expected = [("v3", "v8", 39.0), ("v3", "v11", 33.0), ("v8", "v11", 24.0)];
    check(tests.len() == 3, || format!("{} comparisons", tests.len()))?;
    for (t, (a, b, u)) in tests.iter().zip(expected) {
        check(t.label_a == a && t.label_b == b, || {
            format!("order {} x {}", t.label_a, t.label_b)
        })?;
        check(t.n1 == 9 && t.n2 == 9, || {
            format!("{a} x {b}: n = {}, {}", t.n1, t.n2)
        })?;
        check(t.u1 == u, || {
            format!("{a} x {b}: U = {}, expected {u}", t.u1)
        })?;
        check(t.critical_value == Some(17), || {
            format!("{a} x {b}: critical {:?}", t.critical_value)
        })?;
        check(t.decision == Decision::FailToReject, || {
            format!("{a} x {b}: {}", t.decision)
        })?;
    }
    Ok("U = 39, 33, 24 vs critical 17, all Fail to Reject".to_string())
}

fn criterion_4_p_values() -> Result<String, String> {
    let m = load_matrix(fixture("experiment_matrix.csv")).map_err(|e| e.to_string())?;
    let db = database_hypothesis_battery(&m, 0.05).map_err(|e| e.to_string())?;
    let min_p = db
        .iter()
        .map(|t| t.p_two_tailed)
        .fold(f64::INFINITY, f64::min);
    check(min_p >= 0.42, || {
        format!("min database p = {min_p:.4} < 0.42")
    })?;
    check(db.iter().all(|t| t.p_method == PMethod::Exact), || {
        "expected exact p-values".into()
    })?;

    let versions = version_hypothesis_battery(&m, 0.05).map_err(|e| e.to_string())?;
    let v8_v11 = versions
        .iter()
        .find(|t| t.label_a == "v8" && t.label_b == "v11")
        .ok_or("no v8 x v11 comparison")?;
    let exact = exact_p_value(v8_v11.u, 9, 9).map_err(|e| e.to_string())?;
    let approx = approx_p_value(v8_v11.u, 9, 9, 0.0).map_err(|e| e.to_string())?;
    check((exact - 0.16).abs() <= 0.01, || {
        format!("exact p = {exact:.4}")
    })?;
    check((approx - 0.16).abs() <= 0.02, || {
        format!("approx p = {approx:.4}")
    })?;
    check(v8_v11.p_two_tailed == exact, || {
        "battery did not use the exact p".into()
    })?;
    Ok(format!(
        "min database p = {min_p:.4}; v8 x v11 exact {exact:.4}, approx {approx:.4}"
    ))
}

fn criterion_5_exact_distribution_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut pairs = 0;
    for n1 in 1..=11usize {
        for n2 in 1..=(12 - n1) {
            let dist = ExactDistribution::new(n1, n2).map_err(|e| e.to_string())?;
            let oracle = enumerate_u_distribution(n1, n2);
            check(dist.counts() == oracle.as_slice(), || {
                format!("counts differ at ({n1}, {n2})")
            })?;
            let total: u64 = oracle.iter().sum();
            for u in 0..oracle.len() {
                let lower = u.min(n1 * n2 - u);
                let tail: u64 = oracle[..=lower].iter().sum();
                let expected = (2.0 * tail as f64 / total as f64).min(1.0);
                let p = exact_p_value(u as f64, n1, n2).map_err(|e| e.to_string())?;
                check((p - expected).abs() < 1e-12, || {
                    format!("({n1}, {n2}, u={u}): recurrence {p}, enumeration {expected}")
                })?;
            }
            pairs += 1;
        }
    }
    let elapsed = within_time(start, Duration::from_secs(10))?;
    Ok(format!(
        "{pairs} size pairs with n1+n2 <= 12 match enumeration in {elapsed:?}"
    ))
}

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let w = rng.random_range(0.02..0.5);
    let h = rng.random_range(0.02..0.5);
    BoundingBox::new(
        rng.random_range(w / 2.0..=1.0 - w / 2.0),
        rng.random_range(h / 2.0..=1.0 - h / 2.0),
        w,
        h,
    )
    .expect("valid box")
}

fn random_image(rng: &mut ChaCha8Rng) -> ImageRecord {
    let mut rec = ImageRecord::new("img");
    let n_gt = rng.random_range(0..6);
    for _ in 0..n_gt {
        rec.ground_truth.push(GroundTruthObject {
            category_id: rng.random_range(0..2),
            bbox: random_box(rng),
        });
    }
    let n_det = rng.random_range(0..8);
    for _ in 0..n_det {
        // Detections near existing boxes make matches likely.
        let bbox = match rec.ground_truth.get(rng.random_range(0..n_gt.max(1))) {
            Some(g) if rng.random_bool(0.7) => {
                let b = g.bbox;
                BoundingBox::clipped(b.cx + rng.random_range(-0.05..0.05), b.cy, b.w, b.h)
                    .unwrap_or(b)
            }
            _ => random_box(rng),
        };
        let confidence = (rng.random_range(0..20) as f64) / 20.0;
        rec.detections.push(Detection {
            category_id: rng.random_range(0..2),
            confidence,
            bbox,
        });
    }
    rec
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Coarse grid so ties occur.
    (0..n).map(|_| rng.random_range(0..15) as f64).collect()
}

fn random_sample(rng: &mut ChaCha8Rng, label: &str) -> Sample {
    let n = rng.random_range(1..12);
    Sample::new(label, random_values(rng, n)).unwrap()
}

fn criterion_6_property_suite() -> Result<String, String> {
    const CASES: usize = 1000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    for case in 0..CASES {
        let a = random_sample(&mut rng, "a");
        let b = random_sample(&mut rng, "b");
        let (u1, u2) = u_statistic(&a, &b).map_err(|e| e.to_string())?;
        let n1n2 = (a.len() * b.len()) as f64;
        check(u1 + u2 == n1n2, || {
            format!("case {case}: u1 + u2 = {} != {n1n2}", u1 + u2)
        })?;
        check(u1 == pair_count_u(&a.values, &b.values), || {
            format!("case {case}: u1 differs from pair count")
        })?;
    }

    for case in 0..CASES {
        let a = random_sample(&mut rng, "a");
        let b = random_sample(&mut rng, "b");
        let (u1, u2) = u_statistic(&a, &b).unwrap();
        let transform = |s: &Sample| {
            Sample::new(
                "t",
                s.values.iter().map(|v| (v / 3.0).exp() + 7.0).collect(),
            )
            .unwrap()
        };
        let (t1, t2) = u_statistic(&transform(&a), &transform(&b)).unwrap();
        let (s1, s2) = u_statistic(&b, &a).unwrap();
        let min_u = u1.min(u2);
        check(t1.min(t2) == min_u && s1.min(s2) == min_u, || {
            format!("case {case}: min-U not invariant")
        })?;
    }

    for case in 0..CASES {
        let a = random_box(&mut rng);
        let b = if rng.random_bool(0.3) {
            a
        } else {
            random_box(&mut rng)
        };
        let ab = iou(&a, &b).unwrap();
        let ba = iou(&b, &a).unwrap();
        check(ab == ba, || format!("case {case}: iou asymmetric"))?;
        check((0.0..=1.0).contains(&ab), || {
            format!("case {case}: iou {ab} out of bounds")
        })?;
        check((ab - iou_oracle(&a, &b)).abs() < 1e-12, || {
            format!("case {case}: iou differs from oracle")
        })?;
        check((iou(&a, &a).unwrap() - 1.0).abs() < 1e-12, || {
            format!("case {case}: iou(a, a) != 1")
        })?;
    }

    for case in 0..CASES {
        let rec = random_image(&mut rng);
        let iou_thr = rng.random_range(0.1..=1.0);
        let conf_thr = rng.random_range(0.0..=1.0);
        for category in 0..2 {
            let (m, c) = match_image(&rec, category, iou_thr, conf_thr).unwrap();
            let gt = rec
                .ground_truth
                .iter()
                .filter(|g| g.category_id == category)
                .count() as u64;
            let dets = rec
                .detections
                .iter()
                .filter(|d| d.category_id == category && d.confidence >= conf_thr)
                .count() as u64;
            check(c.tp + c.fn_ == gt, || {
                format!("case {case}: tp + fn != |GT|")
            })?;
            check(c.tp + c.fp == dets, || {
                format!("case {case}: tp + fp != |detections|")
            })?;
            let (pairs, unmatched, free) = greedy_replay(&rec, category, iou_thr, conf_thr);
            let ours: Vec<(usize, usize)> = m.pairs.iter().map(|p| (p.0, p.1)).collect();
            check(
                ours == pairs
                    && m.unmatched_detections == unmatched
                    && m.unmatched_ground_truth == free,
                || format!("case {case}: greedy trace differs from replay"),
            )?;
        }
    }

    for case in 0..CASES {
        let n = rng.random_range(0..=10);
        let gt_total = rng.random_range(1..=5u64);
        let mut tp_left = gt_total;
        let ranked: Vec<RankedDetection> = (0..n)
            .map(|i| {
                let tp = tp_left > 0 && rng.random_bool(0.5);
                tp_left -= tp as u64;
                RankedDetection {
                    confidence: 1.0 - i as f64 / 16.0,
                    true_positive: tp,
                }
            })
            .collect();
        let curve = pr_curve(&ranked, gt_total).unwrap();
        let flags: Vec<bool> = ranked.iter().map(|r| r.true_positive).collect();
        let oracle = envelope_ap(&prefix_points(&flags, gt_total));
        let ap = average_precision(&curve, Interpolation::AllPoint);
        check((ap - oracle).abs() < 1e-12, || {
            format!("case {case}: AP {ap} vs envelope {oracle}")
        })?;
    }

    let elapsed = within_time(start, Duration::from_secs(30))?;
    Ok(format!("5 × {CASES} randomized cases in {elapsed:?}"))
}

fn criterion_7_composition() -> Result<String, String> {
    let real = load_dataset(fixture("real/manifest.json")).map_err(|e| e.to_string())?;
    let synthetic = load_dataset(fixture("synthetic/manifest.json")).map_err(|e| e.to_string())?;
    let spec = CompositionSpec::new([("real".to_string(), 175), ("synthetic".to_string(), 175)])
        .with_target(1176);
    let first = compose_mixed(&real, &synthetic, &spec, 42).map_err(|e| e.to_string())?;
    let again = compose_mixed(&real, &synthetic, &spec, 42).map_err(|e| e.to_string())?;
    check(first == again, || {
        "same seed gave different compositions".into()
    })?;
    check(first.dataset.images.len() == 350, || {
        format!("{} images", first.dataset.images.len())
    })?;
    let per_source: BTreeMap<_, _> = first.per_source_images.clone();
    check(
        per_source["real"] == 175 && per_source["synthetic"] == 175,
        || format!("{per_source:?}"),
    )?;
    let deviation = (first.object_count as f64 - 1176.0).abs();
    check(deviation <= 0.01 * 1176.0, || {
        format!("{} axles, {deviation} from 1176", first.object_count)
    })?;
    Ok(format!(
        "350 images, {} axles (target 1176 ± 1%), deterministic",
        first.object_count
    ))
}

fn criterion_8_fixture_boundary() -> Result<String, String> {
    // mAP values and detection counts come from GPU training on unpublished
    // images; they enter only as fixture data. Everything downstream of
    // them is recomputed by the criteria above.
    let m = load_matrix(fixture("experiment_matrix.csv")).map_err(|e| e.to_string())?;
    check(m.rows.len() == 27, || format!("{} rows", m.rows.len()))?;
    check(m.databases.len() == 3 && m.models.len() == 9, || {
        "expected 3 databases × 9 models".into()
    })?;
    check(m.has_map(), || "mAP column incomplete".into())?;
    let test = load_dataset(fixture("testing/manifest.json")).map_err(|e| e.to_string())?;
    let axles: usize = test.images.iter().map(|i| i.ground_truth.len()).sum();
    check(test.images.len() == 36 && axles == 119, || {
        format!("{} images / {axles} axles", test.images.len())
    })?;
    // F1 is a pure function of the fixture counts.
    let row = m.row("YOLOv3", "Real").ok_or("missing Real/YOLOv3")?;
    let (p, r) = (111.0 / 122.0, 111.0 / 119.0);
    check(
        row.counts.tp == 111 && (f1(p, r) * 100.0 - 92.12).abs() < 0.005,
        || "Real/YOLOv3 chain".into(),
    )?;
    Ok("mAP and TP/FP/FN ingested as fixtures (27 rows); downstream chain recomputed".to_string())
}

fn main() {
    let criteria = [
        (
            1,
            "metric-chain golden test",
            criterion_1_metric_chain_golden as fn() -> Result<String, String>,
        ),
        (
            2,
            "database battery",
            criterion_2_database_battery as fn() -> Result<String, String>,
        ),
        (
            3,
            "version battery",
            criterion_3_version_battery as fn() -> Result<String, String>,
        ),
        (
            4,
            "p-value checks",
            criterion_4_p_values as fn() -> Result<String, String>,
        ),
        (
            5,
            "exact-distribution oracle",
            criterion_5_exact_distribution_oracle as fn() -> Result<String, String>,
        ),
        (
            6,
            "matching/metrics/statistics property suite",
            criterion_6_property_suite as fn() -> Result<String, String>,
        ),
        (
            7,
            "balanced composition",
            criterion_7_composition as fn() -> Result<String, String>,
        ),
        (
            8,
            "desk-scale boundary",
            criterion_8_fixture_boundary as fn() -> Result<String, String>,
        ),
    ];
    let mut failed = 0;
    for (id, name, criterion) in criteria {
        let outcome =
            std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id}: {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id}: {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
