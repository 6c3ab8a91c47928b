//! Experiment matrix, hypothesis batteries and report rendering.
//!
//! The matrix CSV has the header `model,version,database,tp,fp,fn,map_pct`;
//! `map_pct` may be left empty per row. Databases and models keep the order
//! in which they first appear in the file; that order fixes which sample is
//! "first" in each comparison and the row order of rendered tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::ConfusionCounts;
use crate::metrics::{metrics_row, MetricsRow};
use crate::stats::{mann_whitney_test, Sample, UTestOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub model: String,
    pub version: String,
    pub database: String,
    pub counts: ConfusionCounts,
    pub map_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub rows: Vec<MatrixRow>,
    pub model_version: BTreeMap<String, String>,
    pub databases: Vec<String>,
    pub models: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    model: String,
    version: String,
    database: String,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    #[serde(default)]
    map_pct: Option<f64>,
}

const MATRIX_HEADER: [&str; 7] = ["model", "version", "database", "tp", "fp", "fn", "map_pct"];

impl ExperimentMatrix {
    pub fn from_rows(rows: Vec<MatrixRow>) -> Result<Self> {
        let mut m = ExperimentMatrix::default();
        let mut pairs = HashSet::new();
        for row in rows {
            if row.model.is_empty() || row.database.is_empty() || row.version.is_empty() {
                return Err(Error::Matrix(
                    "model, version and database must be non-empty".into(),
                ));
            }
            if !pairs.insert((row.model.clone(), row.database.clone())) {
                return Err(Error::Matrix(format!(
                    "duplicate row for model `{}` on database `{}`",
                    row.model, row.database
                )));
            }
            if let Some(map) = row.map_pct {
                if !(0.0..=100.0).contains(&map) {
                    return Err(Error::Matrix(format!("map_pct {map} outside [0, 100]")));
                }
            }
            match m.model_version.get(&row.model) {
                Some(v) if *v != row.version => {
                    return Err(Error::Matrix(format!(
                        "model `{}` tagged with both `{v}` and `{}`",
                        row.model, row.version
                    )))
                }
                Some(_) => {}
                None => {
                    m.model_version
                        .insert(row.model.clone(), row.version.clone());
                    m.models.push(row.model.clone());
                }
            }
            if !m.databases.contains(&row.database) {
                m.databases.push(row.database.clone());
            }
            m.rows.push(row);
        }
        Ok(m)
    }

    /// Reorders databases, e.g. to fix the orientation of comparisons.
    /// `order` must be a permutation of the current databases.
    pub fn with_database_order(mut self, order: &[String]) -> Result<Self> {
        let mut given: Vec<&String> = order.iter().collect();
        let mut have: Vec<&String> = self.databases.iter().collect();
        given.sort();
        have.sort();
        if given != have {
            return Err(Error::Matrix(format!(
                "database order {order:?} is not a permutation of {:?}",
                self.databases
            )));
        }
        self.databases = order.to_vec();
        Ok(self)
    }

    /// Version tags in natural order (`v3` < `v8` < `v11`).
    pub fn versions(&self) -> Vec<String> {
        let mut v: Vec<String> = self.model_version.values().cloned().collect();
        v.sort_by_key(|s| natural_key(s));
        v.dedup();
        v
    }

    pub fn row(&self, model: &str, database: &str) -> Option<&MatrixRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.database == database)
    }

    /// Rows ordered by database, then model.
    pub fn ordered_rows(&self) -> Vec<&MatrixRow> {
        let mut out = Vec::with_capacity(self.rows.len());
        for db in &self.databases {
            for model in &self.models {
                if let Some(r) = self.row(model, db) {
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn has_map(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.map_pct.is_some())
    }
}

fn natural_key(s: &str) -> (String, u64, String) {
    let prefix: String = s.chars().take_while(|c| !c.is_ascii_digit()).collect();
    let rest = &s[prefix.len()..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let tail = rest[digits.len()..].to_string();
    (prefix, digits.parse().unwrap_or(0), tail)
}

pub fn parse_matrix(text: &str) -> Result<ExperimentMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != MATRIX_HEADER {
        return Err(Error::Matrix(format!(
            "header must be `{}`, found `{}`",
            MATRIX_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<CsvRow>() {
        let r = record.map_err(|e| Error::Matrix(e.to_string()))?;
        rows.push(MatrixRow {
            model: r.model,
            version: r.version,
            database: r.database,
            counts: ConfusionCounts::new(r.tp, r.fp, r.fn_),
            map_pct: r.map_pct,
        });
    }
    ExperimentMatrix::from_rows(rows)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<ExperimentMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedMetrics {
    pub model: String,
    pub database: String,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: MetricsRow,
}

/// Recomputes recall, precision and F1 from counts; mAP passes through.
pub fn derive_metric_table(m: &ExperimentMatrix) -> Vec<KeyedMetrics> {
    m.ordered_rows()
        .into_iter()
        .map(|r| KeyedMetrics {
            model: r.model.clone(),
            database: r.database.clone(),
            counts: r.counts,
            metrics: metrics_row(&r.counts, r.map_pct),
        })
        .collect()
}

fn require_map(m: &ExperimentMatrix) -> Result<()> {
    if m.rows.is_empty() {
        return Err(Error::Matrix("matrix is empty".into()));
    }
    if let Some(r) = m.rows.iter().find(|r| r.map_pct.is_none()) {
        return Err(Error::MissingMap(format!(
            "row `{}`/`{}` has no map_pct",
            r.model, r.database
        )));
    }
    Ok(())
}

fn all_pairs<T>(items: &[T]) -> impl Iterator<Item = (&T, &T)> {
    items
        .iter()
        .enumerate()
        .flat_map(move |(i, a)| items[i + 1..].iter().map(move |b| (a, b)))
}

/// One sample per database: the mAP of every model trained on it, in model
/// order. Compares every pair of databases.
pub fn database_hypothesis_battery(m: &ExperimentMatrix, alpha: f64) -> Result<Vec<UTestOutcome>> {
    require_map(m)?;
    if m.databases.len() < 2 {
        return Err(Error::Matrix("at least two databases are needed".into()));
    }
    for db in &m.databases {
        for model in &m.models {
            if m.row(model, db).is_none() {
                return Err(Error::Matrix(format!(
                    "unbalanced matrix: model `{model}` missing on database `{db}`"
                )));
            }
        }
    }
    let samples = m
        .databases
        .iter()
        .map(|db| {
            let values = m
                .models
                .iter()
                .filter_map(|model| m.row(model, db)?.map_pct)
                .collect();
            Sample::new(db.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    all_pairs(&samples)
        .map(|(a, b)| mann_whitney_test(a, b, alpha))
        .collect()
}

/// One sample per version tag: the mAP of every model of that version on
/// every database (database-major). Compares every pair of versions.
pub fn version_hypothesis_battery(m: &ExperimentMatrix, alpha: f64) -> Result<Vec<UTestOutcome>> {
    require_map(m)?;
    let versions = m.versions();
    if versions.len() < 2 {
        return Err(Error::Matrix(
            "at least two model versions are needed".into(),
        ));
    }
    let mut samples = Vec::with_capacity(versions.len());
    for version in &versions {
        let mut values = Vec::new();
        for db in &m.databases {
            for model in m
                .models
                .iter()
                .filter(|model| m.model_version[*model] == *version)
            {
                let row = m.row(model, db).ok_or_else(|| {
                    Error::Matrix(format!(
                        "unbalanced matrix: model `{model}` missing on database `{db}`"
                    ))
                })?;
                values.extend(row.map_pct);
            }
        }
        samples.push(Sample::new(version.clone(), values)?);
    }
    let n = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::Matrix(format!(
            "unbalanced versions: `{}` has {} values, `{}` has {n}",
            s.label,
            s.len(),
            samples[0].label
        )));
    }
    all_pairs(&samples)
        .map(|(a, b)| mann_whitney_test(a, b, alpha))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metrics: Vec<KeyedMetrics>,
    pub database_tests: Vec<UTestOutcome>,
    pub version_tests: Vec<UTestOutcome>,
}

impl Report {
    /// Metric table plus both batteries.
    pub fn build(m: &ExperimentMatrix, alpha: f64) -> Result<Self> {
        Ok(Report {
            metrics: derive_metric_table(m),
            database_tests: database_hypothesis_battery(m, alpha)?,
            version_tests: version_hypothesis_battery(m, alpha)?,
        })
    }

    /// Metric table only.
    pub fn metrics_only(m: &ExperimentMatrix) -> Self {
        Report {
            metrics: derive_metric_table(m),
            ..Report::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown format `{other}` (expected csv, json or markdown)"
            ))),
        }
    }
}

/// Rendered report: file name to contents, in a stable order.
pub type Rendered = BTreeMap<String, String>;

pub fn pct(v: f64) -> String {
    format!("{v:.2}")
}

/// Integral U values print without decimals, half values with one.
pub fn format_u(u: f64) -> String {
    if u.fract() == 0.0 {
        format!("{u:.0}")
    } else {
        format!("{u:.1}")
    }
}

fn format_p(p: f64) -> String {
    format!("{p:.4}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub metric: String,
    pub label: String,
    pub value: f64,
}

/// `(label, value)` series for bar charts, one per metric.
pub fn metric_series(metrics: &[KeyedMetrics]) -> Vec<SeriesPoint> {
    type Column = (&'static str, fn(&MetricsRow) -> Option<f64>);
    let columns: [Column; 4] = [
        ("recall_pct", |r| Some(r.recall_pct)),
        ("precision_pct", |r| Some(r.precision_pct)),
        ("f1_pct", |r| Some(r.f1_pct)),
        ("map_pct", |r| r.map_pct),
    ];
    columns
        .iter()
        .flat_map(|(name, get)| {
            metrics.iter().filter_map(move |k| {
                get(&k.metrics).map(|value| SeriesPoint {
                    metric: name.to_string(),
                    label: format!("{}/{}", k.database, k.model),
                    value,
                })
            })
        })
        .collect()
}

pub fn render(report: &Report, format: Format) -> Result<Rendered> {
    let mut out = Rendered::new();
    match format {
        Format::Csv => {
            out.insert("metrics.csv".into(), render_metrics_csv(&report.metrics)?);
            out.insert("hypothesis_tests.csv".into(), render_tests_csv(report)?);
            out.insert(
                "series.csv".into(),
                render_series_csv(&metric_series(&report.metrics))?,
            );
        }
        Format::Json => {
            #[derive(Serialize)]
            struct JsonReport<'a> {
                metrics: &'a [KeyedMetrics],
                database_tests: &'a [UTestOutcome],
                version_tests: &'a [UTestOutcome],
                series: Vec<SeriesPoint>,
            }
            let doc = JsonReport {
                metrics: &report.metrics,
                database_tests: &report.database_tests,
                version_tests: &report.version_tests,
                series: metric_series(&report.metrics),
            };
            out.insert(
                "report.json".into(),
                serde_json::to_string_pretty(&doc)? + "\n",
            );
        }
        Format::Markdown => {
            out.insert("report.md".into(), render_markdown(report));
        }
    }
    Ok(out)
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Matrix(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn render_metrics_csv(metrics: &[KeyedMetrics]) -> Result<String> {
    csv_string(|w| {
        w.write_record([
            "model",
            "database",
            "tp",
            "fp",
            "fn",
            "recall_pct",
            "precision_pct",
            "f1_pct",
            "map_pct",
        ])?;
        for k in metrics {
            let r = &k.metrics;
            w.write_record([
                k.model.clone(),
                k.database.clone(),
                k.counts.tp.to_string(),
                k.counts.fp.to_string(),
                k.counts.fn_.to_string(),
                pct(r.recall_pct),
                pct(r.precision_pct),
                pct(r.f1_pct),
                r.map_pct.map(pct).unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

fn render_tests_csv(report: &Report) -> Result<String> {
    csv_string(|w| {
        w.write_record([
            "battery",
            "sample_a",
            "sample_b",
            "n1",
            "n2",
            "u1",
            "u2",
            "u",
            "p_two_tailed",
            "p_method",
            "critical_value",
            "alpha",
            "decision",
        ])?;
        let batteries = [
            ("database", &report.database_tests),
            ("version", &report.version_tests),
        ];
        for (battery, tests) in batteries {
            for t in tests {
                w.write_record([
                    battery.to_string(),
                    t.label_a.clone(),
                    t.label_b.clone(),
                    t.n1.to_string(),
                    t.n2.to_string(),
                    format_u(t.u1),
                    format_u(t.u2),
                    format_u(t.u),
                    format_p(t.p_two_tailed),
                    t.p_method.to_string(),
                    t.critical_value.map(|c| c.to_string()).unwrap_or_default(),
                    t.alpha.to_string(),
                    t.decision.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

fn render_series_csv(series: &[SeriesPoint]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["metric", "label", "value"])?;
        for s in series {
            w.write_record([s.metric.clone(), s.label.clone(), pct(s.value)])?;
        }
        Ok(())
    })
}

fn render_markdown(report: &Report) -> String {
    let mut md = String::new();
    md.push_str("## Detection results\n\n");
    md.push_str(
        "| Training Database | Model | True Positive | False Positive | False Negative |\n",
    );
    md.push_str("|---|---|---:|---:|---:|\n");
    for k in &report.metrics {
        let c = k.counts;
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            k.database, k.model, c.tp, c.fp, c.fn_
        );
    }
    md.push_str("\n## Calculated metrics\n\n");
    md.push_str(
        "| Training Database | Model | Recall (%) | Precision (%) | F1-score (%) | mAP (%) |\n",
    );
    md.push_str("|---|---|---:|---:|---:|---:|\n");
    for k in &report.metrics {
        let r = &k.metrics;
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            k.database,
            k.model,
            pct(r.recall_pct),
            pct(r.precision_pct),
            pct(r.f1_pct),
            r.map_pct.map(pct).unwrap_or_else(|| "-".into())
        );
    }
    let batteries = [
        (
            "Mann-Whitney U test between databases",
            &report.database_tests,
        ),
        (
            "Mann-Whitney U test between model versions",
            &report.version_tests,
        ),
    ];
    for (title, tests) in batteries.into_iter().filter(|(_, t)| !t.is_empty()) {
        let _ = write!(md, "\n## {title}\n\n");
        md.push_str("| Comparison | U Value | Critical Value* | p-value | Results |\n");
        md.push_str("|---|---:|---:|---:|---|\n");
        for t in tests {
            let _ = writeln!(
                md,
                "| {} x {} | {} | {} | {} | {} |",
                t.label_a,
                t.label_b,
                format_u(t.u1),
                t.critical_value
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "-".into()),
                format_p(t.p_two_tailed),
                t.decision
            );
        }
        if let Some(t) = tests.first() {
            let _ = write!(
                md,
                "\n\\* two-tailed, α={}, n1={}, n2={}; p-values by {} method.\n",
                t.alpha, t.n1, t.n2, t.p_method
            );
        }
    }
    md
}

/// Writes each rendered file into `dir`.
pub fn write_rendered(rendered: &Rendered, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, contents) in rendered {
        crate::annotations::write_file(&dir.join(name), contents)?;
    }
    Ok(())
}
