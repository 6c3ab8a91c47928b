//! Annotation data model and the line-based label formats.
//!
//! Ground-truth files hold one object per line, `category_id cx cy w h`, and
//! detection files one detection per line, `category_id confidence cx cy w h`.
//! All coordinates are normalized to the image, center format. A dataset is
//! described by a JSON manifest that lists the per-image files; relative paths
//! resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CategoryId = u32;

/// Slack allowed outside the unit square before a coordinate is rejected.
pub const CLIP_MARGIN: f64 = 0.05;

// Extents this close to the unit square are not re-clipped, so clipped boxes
// survive a write/parse round trip unchanged.
const CLIP_EPS: f64 = 1e-9;

/// Axis-aligned box in normalized center/size coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box that must already lie inside the unit square.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { cx, cy, w, h };
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(cx) && in_unit(cy)) {
            return Err(Error::InvalidBox(format!(
                "center ({cx}, {cy}) outside the unit square"
            )));
        }
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidBox(format!("size {w}x{h} outside (0, 1]")));
        }
        Ok(b)
    }

    /// Clips a raw box to the unit square, returning `None` when nothing of
    /// positive area remains.
    pub fn clipped(cx: f64, cy: f64, w: f64, h: f64) -> Option<Self> {
        let (cx, w) = clip_axis(cx, w);
        let (cy, h) = clip_axis(cy, h);
        let b = BoundingBox { cx, cy, w, h };
        (b.area() > 0.0).then_some(b)
    }

    /// Corner form `(x_min, y_min, x_max, y_max)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

/// Clips one axis; untouched spans keep their raw center and size.
fn clip_axis(center: f64, size: f64) -> (f64, f64) {
    let lo = center - size / 2.0;
    let hi = center + size / 2.0;
    if lo >= -CLIP_EPS && hi <= 1.0 + CLIP_EPS {
        return (center, size);
    }
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    ((lo + hi) / 2.0, hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub category_id: CategoryId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category_id: CategoryId,
    pub confidence: f64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub ground_truth: Vec<GroundTruthObject>,
    pub detections: Vec<Detection>,
    /// Pixel dimensions, recorded for provenance only.
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>) -> Self {
        ImageRecord {
            image_id: image_id.into(),
            ground_truth: Vec::new(),
            detections: Vec::new(),
            width: None,
            height: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub categories: BTreeMap<CategoryId, String>,
    pub images: Vec<ImageRecord>,
}

impl Dataset {
    /// Checks id uniqueness and that every referenced category exists.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.images.len());
        for image in &self.images {
            if image.image_id.is_empty() {
                return Err(Error::InvalidArgument("empty image id".into()));
            }
            if !seen.insert(image.image_id.as_str()) {
                return Err(Error::DuplicateImage(image.image_id.clone()));
            }
            let categories = image
                .ground_truth
                .iter()
                .map(|o| o.category_id)
                .chain(image.detections.iter().map(|d| d.category_id));
            for category in categories {
                if !self.categories.contains_key(&category) {
                    return Err(Error::UnknownCategory {
                        image: image.image_id.clone(),
                        category,
                    });
                }
            }
        }
        Ok(())
    }

    /// Same dataset with images ordered by id.
    pub fn canonical(&self) -> Dataset {
        let mut out = self.clone();
        out.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        out
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub image_count: usize,
    pub object_count_per_category: BTreeMap<CategoryId, usize>,
}

impl DatasetStats {
    pub fn total_objects(&self) -> usize {
        self.object_count_per_category.values().sum()
    }
}

pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let mut per_category = BTreeMap::new();
    for object in d.images.iter().flat_map(|i| &i.ground_truth) {
        *per_category.entry(object.category_id).or_insert(0) += 1;
    }
    DatasetStats {
        image_count: d.images.len(),
        object_count_per_category: per_category,
    }
}

struct LineFields<'a> {
    file: &'a str,
    line: usize,
    tokens: Vec<&'a str>,
}

impl<'a> LineFields<'a> {
    fn error(&self, token: &str, reason: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_string(),
            line: self.line,
            token: token.to_string(),
            reason: reason.into(),
        }
    }

    fn category(&self) -> Result<CategoryId> {
        let token = self.tokens[0];
        token
            .parse::<CategoryId>()
            .map_err(|_| self.error(token, "category id is not a non-negative integer"))
    }

    fn number(&self, index: usize) -> Result<f64> {
        let token = self.tokens[index];
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(token, "not a decimal number")),
        }
    }

    /// Parses `cx cy w h` starting at `start` and clips to the unit square.
    fn bbox(&self, start: usize) -> Result<BoundingBox> {
        let [cx, cy, w, h] = [0, 1, 2, 3].map(|k| self.number(start + k));
        let (cx, cy, w, h) = (cx?, cy?, w?, h?);
        let range = -CLIP_MARGIN..=1.0 + CLIP_MARGIN;
        for (k, v) in [cx, cy].into_iter().enumerate() {
            if !range.contains(&v) {
                return Err(self.error(self.tokens[start + k], "coordinate outside [-0.05, 1.05]"));
            }
        }
        for (k, v) in [w, h].into_iter().enumerate() {
            if !(v > 0.0 && v <= 1.0 + CLIP_MARGIN) {
                return Err(self.error(self.tokens[start + 2 + k], "size outside (0, 1.05]"));
            }
        }
        let extents = [
            (cx - w / 2.0, start),
            (cx + w / 2.0, start),
            (cy - h / 2.0, start + 1),
            (cy + h / 2.0, start + 1),
        ];
        for (edge, token) in extents {
            if !range.contains(&edge) {
                return Err(self.error(self.tokens[token], "box edge outside [-0.05, 1.05]"));
            }
        }
        BoundingBox::clipped(cx, cy, w, h)
            .ok_or_else(|| self.error(self.tokens[start], "box has no area after clipping"))
    }
}

fn split_lines<'a>(
    text: &'a str,
    file: &'a str,
    expected: usize,
) -> impl Iterator<Item = Result<LineFields<'a>>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(move |(idx, line)| {
            let fields = LineFields {
                file,
                line: idx + 1,
                tokens: line.split_whitespace().collect(),
            };
            if fields.tokens.len() != expected {
                let n = fields.tokens.len();
                return Err(fields.error(
                    line.trim(),
                    format!("expected {expected} fields, found field count {n}"),
                ));
            }
            Ok(fields)
        })
}

/// Parses a ground-truth label file. `source` names the file in errors.
pub fn parse_ground_truth(text: &str, source: &str) -> Result<Vec<GroundTruthObject>> {
    split_lines(text, source, 5)
        .map(|fields| {
            let fields = fields?;
            Ok(GroundTruthObject {
                category_id: fields.category()?,
                bbox: fields.bbox(1)?,
            })
        })
        .collect()
}

/// Parses a detection file, preserving file order.
pub fn parse_detections(text: &str, source: &str) -> Result<Vec<Detection>> {
    split_lines(text, source, 6)
        .map(|fields| {
            let fields = fields?;
            let category_id = fields.category()?;
            let confidence = fields.number(1)?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(fields.error(fields.tokens[1], "confidence outside [0, 1]"));
            }
            Ok(Detection {
                category_id,
                confidence,
                bbox: fields.bbox(2)?,
            })
        })
        .collect()
}

pub fn format_ground_truth(objects: &[GroundTruthObject]) -> String {
    let mut out = String::new();
    for o in objects {
        let b = o.bbox;
        let _ = writeln!(out, "{} {} {} {} {}", o.category_id, b.cx, b.cy, b.w, b.h);
    }
    out
}

pub fn format_detections(detections: &[Detection]) -> String {
    let mut out = String::new();
    for d in detections {
        let b = d.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            d.category_id, d.confidence, b.cx, b.cy, b.w, b.h
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub categories: BTreeMap<CategoryId, String>,
    pub images: Vec<ManifestImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub id: String,
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

/// A dataset together with the images whose detection file was absent.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Image ids with no `det` entry or whose detection file does not exist.
    pub missing_detections: Vec<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Loads a manifest and every annotation file it references.
///
/// Any missing file, including a listed detection file, is an error.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    load_impl(manifest_path.as_ref(), true).map(|l| l.dataset)
}

/// Like [`load_dataset`], but images whose detection file is absent load
/// with no detections and are reported in `missing_detections`.
pub fn load_dataset_lenient(manifest_path: impl AsRef<Path>) -> Result<LoadedDataset> {
    load_impl(manifest_path.as_ref(), false)
}

fn load_impl(manifest_path: &Path, strict: bool) -> Result<LoadedDataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut images = Vec::with_capacity(manifest.images.len());
    let mut missing = Vec::new();
    let mut seen = HashSet::new();

    for entry in &manifest.images {
        if entry.id.is_empty() {
            return Err(Error::Manifest {
                path: manifest_path.to_path_buf(),
                reason: "image with empty id".into(),
            });
        }
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateImage(entry.id.clone()));
        }
        let gt_path = base.join(&entry.gt);
        let ground_truth =
            parse_ground_truth(&read_text(&gt_path)?, &gt_path.display().to_string())?;
        let detections = match &entry.det {
            Some(det) => {
                let det_path = base.join(det);
                if !strict && !det_path.exists() {
                    missing.push(entry.id.clone());
                    Vec::new()
                } else {
                    parse_detections(&read_text(&det_path)?, &det_path.display().to_string())?
                }
            }
            None => {
                missing.push(entry.id.clone());
                Vec::new()
            }
        };
        images.push(ImageRecord {
            image_id: entry.id.clone(),
            ground_truth,
            detections,
            width: entry.width,
            height: entry.height,
        });
    }

    let dataset = Dataset {
        name: manifest.name,
        categories: manifest.categories,
        images,
    };
    dataset.validate()?;
    Ok(LoadedDataset {
        dataset,
        missing_detections: missing,
    })
}

/// Writes a self-contained copy of `d` into `dir`: `manifest.json` plus one
/// label and one detection file per image. Returns the manifest path.
pub fn write_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let labels = dir.join("labels");
    let detections = dir.join("detections");
    for sub in [&labels, &detections] {
        fs::create_dir_all(sub).map_err(|e| Error::io(sub, e))?;
    }
    let mut entries = Vec::with_capacity(d.images.len());
    for image in &d.images {
        let file = format!("{}.txt", image.image_id);
        let gt = Path::new("labels").join(&file);
        let det = Path::new("detections").join(&file);
        write_file(&dir.join(&gt), &format_ground_truth(&image.ground_truth))?;
        write_file(&dir.join(&det), &format_detections(&image.detections))?;
        entries.push(ManifestImage {
            id: image.image_id.clone(),
            gt,
            det: Some(det),
            width: image.width,
            height: image.height,
        });
    }
    let manifest = Manifest {
        name: d.name.clone(),
        categories: d.categories.clone(),
        images: entries,
    };
    let path = dir.join("manifest.json");
    write_file(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(path)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
