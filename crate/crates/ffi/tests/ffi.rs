use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use axle_eval_ffi::*;

fn fixture(rel: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = axle_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dataset_handle_lifecycle() {
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(
            axle_dataset_load(
                fixture("testing/manifest_yolov3spp_real.json").as_ptr(),
                &mut ds
            ),
            AxleStatus::Ok
        );
        let mut n = 0usize;
        assert_eq!(axle_dataset_image_count(ds, &mut n), AxleStatus::Ok);
        assert_eq!(n, 36);
        assert_eq!(axle_dataset_object_count(ds, 0, &mut n), AxleStatus::Ok);
        assert_eq!(n, 119);
        assert_eq!(axle_dataset_object_count(ds, 9, &mut n), AxleStatus::Ok);
        assert_eq!(n, 0);

        let mut counts = AxleCounts {
            true_positives: 0,
            false_positives: 0,
            false_negatives: 0,
        };
        assert_eq!(axle_evaluate(ds, 0.5, 0.25, &mut counts), AxleStatus::Ok);
        assert_eq!(
            (
                counts.true_positives,
                counts.false_positives,
                counts.false_negatives
            ),
            (117, 2, 2)
        );

        let mut ap = 0.0;
        assert_eq!(
            axle_average_precision(ds, 0, 0.5, AxleInterpolation::AllPoint, &mut ap),
            AxleStatus::Ok
        );
        assert!(ap > 0.9 && ap <= 1.0);
        assert_eq!(
            axle_average_precision(ds, 9, 0.5, AxleInterpolation::AllPoint, &mut ap),
            AxleStatus::Input
        );
        axle_dataset_free(ds);
        axle_dataset_free(ptr::null_mut());
    }
}

#[test]
fn load_errors_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    unsafe {
        let missing = CString::new("/nonexistent/manifest.json").unwrap();
        assert_eq!(axle_dataset_load(missing.as_ptr(), &mut ds), AxleStatus::Io);
        assert!(last_error().contains("/nonexistent/manifest.json"));
        assert!(ds.is_null());
        assert_eq!(
            axle_dataset_load(ptr::null(), &mut ds),
            AxleStatus::NullPointer
        );
        assert_eq!(
            axle_dataset_load(missing.as_ptr(), ptr::null_mut()),
            AxleStatus::NullPointer
        );
        let mut n = 0usize;
        assert_eq!(
            axle_dataset_image_count(ptr::null(), &mut n),
            AxleStatus::NullPointer
        );
    }
}

#[test]
fn iou_and_metrics() {
    unsafe { iou_and_metrics_unchecked() }
}

unsafe fn iou_and_metrics_unchecked() {
    let a = AxleBox {
        cx: 0.25,
        cy: 0.5,
        w: 0.5,
        h: 0.5,
    };
    let b = AxleBox {
        cx: 0.5,
        cy: 0.5,
        w: 0.5,
        h: 0.5,
    };
    let mut v = 0.0;
    assert_eq!(axle_iou(a, b, &mut v), AxleStatus::Ok);
    assert!((v - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        axle_iou(a, AxleBox { w: 0.0, ..b }, &mut v),
        AxleStatus::InvalidArgument
    );
    assert_eq!(axle_iou(a, b, ptr::null_mut()), AxleStatus::NullPointer);

    let mut m = AxleMetrics {
        recall_pct: 0.0,
        precision_pct: 0.0,
        f1_pct: 0.0,
        degenerate: true,
    };
    let counts = AxleCounts {
        true_positives: 111,
        false_positives: 11,
        false_negatives: 8,
    };
    assert_eq!(axle_metrics_from_counts(counts, &mut m), AxleStatus::Ok);
    assert_eq!(
        (m.recall_pct, m.precision_pct, m.f1_pct, m.degenerate),
        (93.28, 90.98, 92.12, false)
    );
    let empty = AxleCounts {
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
    };
    assert_eq!(axle_metrics_from_counts(empty, &mut m), AxleStatus::Ok);
    assert!(m.degenerate);
}

#[test]
fn mann_whitney_over_ffi() {
    let v8 = [
        78.32, 92.06, 97.60, 77.90, 92.15, 98.49, 78.59, 92.09, 98.57,
    ];
    let v11 = [
        89.98, 97.67, 98.88, 82.65, 98.12, 99.02, 81.20, 98.19, 99.04,
    ];
    let mut t = std::mem::MaybeUninit::<AxleUTest>::uninit();
    unsafe {
        assert_eq!(
            axle_mann_whitney(v8.as_ptr(), 9, v11.as_ptr(), 9, 0.05, t.as_mut_ptr()),
            AxleStatus::Ok
        );
        let t = t.assume_init();
        assert_eq!((t.u1, t.u2, t.u), (24.0, 57.0, 24.0));
        assert!(t.has_critical_value);
        assert_eq!(t.critical_value, 17);
        assert_eq!(t.p_method, AxlePMethod::Exact);
        assert_eq!(t.decision, AxleDecision::FailToReject);
        assert!((t.p_two_tailed - 0.1615).abs() < 1e-4);

        let mut out = std::mem::MaybeUninit::<AxleUTest>::uninit();
        assert_eq!(
            axle_mann_whitney(v8.as_ptr(), 0, v11.as_ptr(), 9, 0.05, out.as_mut_ptr()),
            AxleStatus::InvalidArgument
        );
        assert_eq!(
            axle_mann_whitney(ptr::null(), 3, v11.as_ptr(), 9, 0.05, out.as_mut_ptr()),
            AxleStatus::NullPointer
        );
        let nan = [f64::NAN];
        assert_eq!(
            axle_mann_whitney(nan.as_ptr(), 1, v11.as_ptr(), 9, 0.05, out.as_mut_ptr()),
            AxleStatus::InvalidArgument
        );
    }
}

#[test]
fn matrix_render() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            axle_matrix_load(fixture("experiment_matrix.csv").as_ptr(), &mut m),
            AxleStatus::Ok
        );
        let mut rows = 0usize;
        assert_eq!(axle_matrix_row_count(m, &mut rows), AxleStatus::Ok);
        assert_eq!(rows, 27);

        let mut s = ptr::null_mut();
        assert_eq!(
            axle_report_render(m, 0.05, AxleFormat::Markdown, ptr::null(), &mut s),
            AxleStatus::Ok
        );
        let md = CStr::from_ptr(s).to_string_lossy().into_owned();
        axle_string_free(s);
        assert!(md.contains("| Synthetic x Mixed | 44 | 17 | 0.7962 | Fail to Reject |"));

        let name = CString::new("hypothesis_tests.csv").unwrap();
        assert_eq!(
            axle_report_render(m, 0.05, AxleFormat::Csv, name.as_ptr(), &mut s),
            AxleStatus::Ok
        );
        let csv = CStr::from_ptr(s).to_string_lossy().into_owned();
        axle_string_free(s);
        assert_eq!(csv.lines().count(), 7);

        let bogus = CString::new("nope.csv").unwrap();
        assert_eq!(
            axle_report_render(m, 0.05, AxleFormat::Csv, bogus.as_ptr(), &mut s),
            AxleStatus::InvalidArgument
        );
        assert!(last_error().contains("nope.csv"));
        assert_eq!(
            axle_report_render(ptr::null(), 0.05, AxleFormat::Json, ptr::null(), &mut s),
            AxleStatus::NullPointer
        );
        axle_matrix_free(m);
        axle_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_symbol() {
    let header = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/axle_eval.h"),
    )
    .unwrap();
    assert!(header.contains("#ifndef AXLE_EVAL_H"));
    for symbol in [
        "axle_last_error_message",
        "axle_dataset_load",
        "axle_dataset_free",
        "axle_dataset_image_count",
        "axle_dataset_object_count",
        "axle_iou",
        "axle_evaluate",
        "axle_average_precision",
        "axle_metrics_from_counts",
        "axle_mann_whitney",
        "axle_matrix_load",
        "axle_matrix_free",
        "axle_matrix_row_count",
        "axle_report_render",
        "axle_string_free",
    ] {
        assert!(
            header.contains(&format!("{symbol}(")),
            "header lacks {symbol}"
        );
    }
    for ty in [
        "typedef struct AxleDataset AxleDataset;",
        "typedef struct AxleMatrix AxleMatrix;",
        "AXLE_STATUS_OK = 0",
    ] {
        assert!(header.contains(ty), "header lacks {ty}");
    }
}

#[test]
fn header_compiles_as_c99() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let status = std::process::Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
