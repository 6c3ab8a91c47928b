//! `axle-eval` command-line front end.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on user or input
//! errors (including argument parsing).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::annotations::{
    dataset_stats, load_dataset, load_dataset_lenient, write_dataset, Dataset, DatasetStats,
};
use crate::composer::{check_disjoint, compose_mixed, default_tolerance, CompositionSpec};
use crate::error::Error;
use crate::matching::{
    match_image, ConfusionCounts, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_IOU_THRESHOLD,
};
use crate::metrics::{
    average_precision, mean_average_precision, metrics_row, pr_curve, rank_detections,
    Interpolation, MetricsRow,
};
use crate::report::{
    load_matrix, pct, render, write_rendered, ExperimentMatrix, Format, Rendered, Report,
};
use crate::stats::{UTestOutcome, DEFAULT_ALPHA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the log filter (e.g. `info`, `debug`).
pub const LOG_ENV: &str = "AXLE_EVAL_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "axle-eval",
    version,
    about = "Evaluate object detections and compare experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count images and ground-truth objects per category in a dataset.
    Stats(StatsArgs),
    /// Build a mixed dataset from two sources with a balanced object count.
    Compose(ComposeArgs),
    /// Match detections to ground truth and compute precision, recall, F1 and AP.
    Eval(EvalArgs),
    /// Run Mann-Whitney U tests across databases and model versions.
    Compare(CompareArgs),
    /// Render metric tables and hypothesis tests from an experiment matrix.
    Report(CompareArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset manifest (JSON).
    pub manifest: PathBuf,
    /// Output format; plain text when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// First source manifest (e.g. real images).
    pub manifest_a: PathBuf,
    /// Second source manifest (e.g. synthetic images).
    pub manifest_b: PathBuf,
    /// Images taken from the first source [default: all].
    #[arg(long)]
    pub quota_a: Option<usize>,
    /// Images taken from the second source [default: all].
    #[arg(long)]
    pub quota_b: Option<usize>,
    /// Target total object count for the mixed dataset.
    #[arg(long)]
    pub target: Option<usize>,
    /// Allowed deviation from --target, in objects [default: 1% of target].
    #[arg(long)]
    pub tolerance: Option<usize>,
    /// Seed for the deterministic selection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Testing manifest that must share no image ids with the result.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Directory receiving manifest.json and the copied label files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest whose images list detection files.
    pub manifest: PathBuf,
    /// Minimum IoU for a detection to match a ground-truth object.
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    /// Detections below this confidence are ignored for TP/FP/FN counts.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    pub conf_thresh: f64,
    /// AP interpolation: all-point or 11-point.
    #[arg(long, default_value = "all-point", value_parser = parse_interp)]
    pub ap_interp: Interpolation,
    /// Output format; plain text when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment matrix CSV (model,version,database,tp,fp,fn,map_pct).
    pub matrix: PathBuf,
    /// Significance level for the two-tailed tests.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Comma-separated database order, fixing which sample comes first.
    #[arg(long, value_delimiter = ',')]
    pub databases: Option<Vec<String>>,
    /// Output format [compare: plain text when omitted; report: markdown].
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Directory receiving the rendered report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_interp(s: &str) -> Result<Interpolation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Json(_) | Error::Csv(_) => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Stats(a) => cmd_stats(&a, out),
        Command::Compose(a) => cmd_compose(&a, out),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::Report(a) => cmd_report(&a, out, err),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Error> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn plural(label: &str) -> String {
    if label.ends_with('s') {
        label.to_string()
    } else {
        format!("{label}s")
    }
}

/// `images: 346, axles: 1184`
pub fn stats_line(d: &Dataset, s: &DatasetStats) -> String {
    let mut parts = vec![format!("images: {}", s.image_count)];
    for (id, label) in &d.categories {
        let n = s.object_count_per_category.get(id).copied().unwrap_or(0);
        parts.push(format!("{}: {n}", plural(label)));
    }
    parts.join(", ")
}

fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<(), Error> {
    let d = load_dataset(&a.manifest)?;
    let s = dataset_stats(&d);
    let text = match a.format {
        None => stats_line(&d, &s) + "\n",
        Some(Format::Json) => serde_json::to_string_pretty(&s)? + "\n",
        Some(Format::Csv) => {
            let mut t = String::from("category_id,label,objects\n");
            for (id, label) in &d.categories {
                let n = s.object_count_per_category.get(id).copied().unwrap_or(0);
                t += &format!("{id},{label},{n}\n");
            }
            t + &format!(",images,{}\n", s.image_count)
        }
        Some(Format::Markdown) => {
            let mut t = String::from("| Category | Objects |\n|---|---:|\n");
            for (id, label) in &d.categories {
                let n = s.object_count_per_category.get(id).copied().unwrap_or(0);
                t += &format!("| {label} | {n} |\n");
            }
            t + &format!("| images | {} |\n", s.image_count)
        }
    };
    emit(out, &text)
}

fn cmd_compose(a: &ComposeArgs, out: &mut dyn Write) -> Result<(), Error> {
    let da = load_dataset(&a.manifest_a)?;
    let db = load_dataset(&a.manifest_b)?;
    let quotas = [
        (da.name.clone(), a.quota_a.unwrap_or(da.images.len())),
        (db.name.clone(), a.quota_b.unwrap_or(db.images.len())),
    ];
    let mut spec = CompositionSpec::new(quotas);
    if let Some(target) = a.target {
        spec = spec.with_target(target);
        spec.balance_tolerance = a.tolerance.unwrap_or(default_tolerance(target));
    } else if a.tolerance.is_some() {
        return Err(Error::InvalidArgument(
            "--tolerance requires --target".into(),
        ));
    }
    let composition = compose_mixed(&da, &db, &spec, a.seed)?;
    if let Some(test) = &a.test {
        let test = load_dataset(test)?;
        let shared = check_disjoint(&composition.dataset, &test);
        if !shared.is_empty() {
            let ids: Vec<_> = shared.into_iter().collect();
            return Err(Error::Composition(format!(
                "{} image(s) shared with the testing set: {}",
                ids.len(),
                ids.join(", ")
            )));
        }
    }
    let manifest = write_dataset(&composition.dataset, &a.out)?;
    let per_source = composition
        .per_source_images
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut text = format!(
        "images: {} ({per_source}), objects: {}",
        composition.dataset.images.len(),
        composition.object_count
    );
    if let Some(t) = composition.target_object_count {
        let status = if composition.within_tolerance() {
            "within"
        } else {
            "OUTSIDE"
        };
        text += &format!(
            " (target {t}, tolerance {}, {status} tolerance)",
            composition.balance_tolerance
        );
    }
    text += &format!("\nmanifest: {}\n", manifest.display());
    if !composition.within_tolerance() {
        log::warn!("no quota-respecting selection reaches the target within tolerance");
    }
    emit(out, &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub images: usize,
    pub missing_detections: Vec<String>,
    pub counts: ConfusionCounts,
    pub metrics: MetricsRow,
    pub ap_interpolation: Interpolation,
    /// AP per category label, for categories with ground truth.
    pub ap: BTreeMap<String, f64>,
    pub map: Option<f64>,
}

/// Counts over all categories at the confidence threshold, plus AP per
/// category over all detections.
pub fn evaluate(
    d: &Dataset,
    iou_threshold: f64,
    confidence_threshold: f64,
    interpolation: Interpolation,
) -> Result<(ConfusionCounts, BTreeMap<String, f64>), Error> {
    let mut counts = ConfusionCounts::default();
    for rec in &d.images {
        for &category in d.categories.keys() {
            counts += match_image(rec, category, iou_threshold, confidence_threshold)?.1;
        }
    }
    let mut ap = BTreeMap::new();
    for (&category, label) in &d.categories {
        let (ranked, gt_total) = rank_detections(d, category, iou_threshold)?;
        if gt_total == 0 {
            continue;
        }
        let curve = pr_curve(&ranked, gt_total)?;
        ap.insert(label.clone(), average_precision(&curve, interpolation));
    }
    Ok((counts, ap))
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let loaded = load_dataset_lenient(&a.manifest)?;
    if !loaded.missing_detections.is_empty() {
        let _ = writeln!(
            err,
            "warning: {} image(s) without detection file, counted as zero detections: {}",
            loaded.missing_detections.len(),
            loaded.missing_detections.join(", ")
        );
    }
    let d = &loaded.dataset;
    let (counts, ap) = evaluate(d, a.iou_thresh, a.conf_thresh, a.ap_interp)?;
    let map = if ap.is_empty() {
        None
    } else {
        Some(mean_average_precision(&ap)?)
    };
    let summary = EvalSummary {
        images: d.images.len(),
        missing_detections: loaded.missing_detections.clone(),
        counts,
        metrics: metrics_row(&counts, map.map(|m| m * 100.0)),
        ap_interpolation: a.ap_interp,
        ap,
        map,
    };
    let text = render_eval(&summary, a.format)?;
    match &a.out {
        Some(path) => crate::annotations::write_file(path, &text),
        None => emit(out, &text),
    }
}

fn render_eval(s: &EvalSummary, format: Option<Format>) -> Result<String, Error> {
    let m = &s.metrics;
    let map = m.map_pct.map(pct).unwrap_or_default();
    Ok(match format {
        None => {
            let mut t = format!(
                "images: {} (without detections: {})\ntp: {}, fp: {}, fn: {}\n\
                 recall: {}, precision: {}, f1: {}\n",
                s.images,
                s.missing_detections.len(),
                s.counts.tp,
                s.counts.fp,
                s.counts.fn_,
                pct(m.recall_pct),
                pct(m.precision_pct),
                pct(m.f1_pct),
            );
            for (label, ap) in &s.ap {
                t += &format!("AP[{label}]: {ap:.4} ({})\n", s.ap_interpolation);
            }
            if s.map.is_some() {
                t += &format!("mAP: {map}\n");
            }
            if m.degenerate {
                t += "degenerate: a zero denominator was reported as 0\n";
            }
            t
        }
        Some(Format::Json) => serde_json::to_string_pretty(s)? + "\n",
        Some(Format::Csv) => format!(
            "tp,fp,fn,recall_pct,precision_pct,f1_pct,map_pct,degenerate\n{},{},{},{},{},{},{map},{}\n",
            s.counts.tp,
            s.counts.fp,
            s.counts.fn_,
            pct(m.recall_pct),
            pct(m.precision_pct),
            pct(m.f1_pct),
            m.degenerate
        ),
        Some(Format::Markdown) => format!(
            "| True Positive | False Positive | False Negative | Recall (%) | Precision (%) | F1-score (%) | mAP (%) |\n\
             |---:|---:|---:|---:|---:|---:|---:|\n| {} | {} | {} | {} | {} | {} | {} |\n",
            s.counts.tp,
            s.counts.fp,
            s.counts.fn_,
            pct(m.recall_pct),
            pct(m.precision_pct),
            pct(m.f1_pct),
            if map.is_empty() { "-".to_string() } else { map }
        ),
    })
}

fn load_ordered_matrix(a: &CompareArgs) -> Result<ExperimentMatrix, Error> {
    let m = load_matrix(&a.matrix)?;
    match &a.databases {
        Some(order) => m.with_database_order(order),
        None => Ok(m),
    }
}

/// `database  Real x Synthetic  U=31  critical=17  p=0.4363 (exact)  Fail to Reject`
pub fn outcome_line(battery: &str, t: &UTestOutcome) -> String {
    format!(
        "{battery:<8}  {} x {}  U={}  critical={}  p={:.4} ({})  {}",
        t.label_a,
        t.label_b,
        crate::report::format_u(t.u1),
        t.critical_value
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into()),
        t.p_two_tailed,
        t.p_method,
        t.decision
    )
}

fn write_or_print(
    rendered: &Rendered,
    dir: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), Error> {
    match dir {
        Some(dir) => write_rendered(rendered, dir),
        None => {
            for contents in rendered.values() {
                emit(out, contents)?;
            }
            Ok(())
        }
    }
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Result<(), Error> {
    let m = load_ordered_matrix(a)?;
    if !m.has_map() {
        return Err(Error::MissingMap(
            "the hypothesis tests compare mAP values".into(),
        ));
    }
    let report = Report::build(&m, a.alpha)?;
    match a.format {
        None => {
            let mut text = String::new();
            for t in &report.database_tests {
                text += &(outcome_line("database", t) + "\n");
            }
            for t in &report.version_tests {
                text += &(outcome_line("version", t) + "\n");
            }
            emit(out, &text)?;
            if let Some(dir) = &a.out {
                write_rendered(&render(&report, Format::Json)?, dir)?;
            }
            Ok(())
        }
        Some(format) => write_or_print(&render(&report, format)?, &a.out, out),
    }
}

fn cmd_report(a: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let m = load_ordered_matrix(a)?;
    let report = if m.has_map() {
        Report::build(&m, a.alpha)?
    } else {
        if !m.rows.is_empty() {
            let _ = writeln!(
                err,
                "warning: mAP column incomplete; hypothesis tests skipped"
            );
        }
        Report::metrics_only(&m)
    };
    write_or_print(
        &render(&report, a.format.unwrap_or(Format::Markdown))?,
        &a.out,
        out,
    )
}

/// Initializes logging from [`LOG_ENV`], defaulting to warnings.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}
