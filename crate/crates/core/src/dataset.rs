//! Dataset ingest: directory scanning, manifests, image loading, splits.
//!
//! A dataset is a directory tree in which every immediate subdirectory is a
//! class and every decodable image file inside it is a sample. Scanning
//! produces a [`Manifest`]: a deterministic, persistable listing that the
//! rest of the pipeline treats as the single source of truth for sample
//! identity and ordering. Class indices are assigned by ascending
//! lexicographic class name; records are sorted by (class name, file name),
//! compared byte-wise, so a manifest built from the same files is always
//! byte-identical.
//!
//! Images are decoded on demand and resized to the manifest's fixed target
//! with corner-aligned bilinear interpolation, so downstream feature
//! extractors always see rasters of one shape.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::colorspace::RasterRgb;
use crate::error::{Error, Result};
use crate::rng;

/// Manifest schema version written to and expected in the header line.
const MANIFEST_VERSION: u32 = 1;

/// A class with its dense index and directory name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabel {
    pub index: usize,
    pub name: String,
}

/// One image sample within a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    /// Dense position within the manifest (0-based).
    pub manifest_index: usize,
    /// Index into [`Manifest::classes`].
    pub class_index: usize,
    /// Path to the image file as recorded at scan time.
    pub path: PathBuf,
    /// Width every consumer will see after resize.
    pub width: u32,
    /// Height every consumer will see after resize.
    pub height: u32,
}

/// Deterministic listing of a labeled image dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    resize: (u32, u32),
    classes: Vec<String>,
    records: Vec<ImageRecord>,
    warnings: Vec<String>,
}

impl Manifest {
    /// Assemble a manifest from already-validated parts. Used by the
    /// synthetic generator and by tests; `scan_dataset` is the normal entry
    /// point. Records must be sorted by (class, path) with dense indices.
    pub fn from_parts(
        resize: (u32, u32),
        classes: Vec<String>,
        records: Vec<ImageRecord>,
    ) -> Result<Self> {
        if resize.0 == 0 || resize.1 == 0 {
            return Err(Error::InvalidParam("resize dimensions must be nonzero".into()));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(
                "class names must be strictly ascending".into(),
            ));
        }
        for (i, r) in records.iter().enumerate() {
            if r.manifest_index != i {
                return Err(Error::InvalidParam(format!(
                    "record {i} carries manifest_index {}",
                    r.manifest_index
                )));
            }
            if r.class_index >= classes.len() {
                return Err(Error::InvalidParam(format!(
                    "record {i} references class {} of {}",
                    r.class_index,
                    classes.len()
                )));
            }
        }
        Ok(Manifest { resize, classes, records, warnings: Vec::new() })
    }

    /// Resize target `(width, height)` applied by [`load_image`].
    pub fn resize(&self) -> (u32, u32) {
        self.resize
    }

    /// Class names in index order.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scan-time warnings (skipped files). Not persisted.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Per-class record counts, indexed by class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for r in &self.records {
            counts[r.class_index] += 1;
        }
        counts
    }

    /// Class label for a record.
    pub fn label(&self, record: &ImageRecord) -> ClassLabel {
        ClassLabel {
            index: record.class_index,
            name: self.classes[record.class_index].clone(),
        }
    }

    /// Labels of all records in manifest order.
    pub fn label_indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.class_index).collect()
    }

    /// Canonical serialization: a header line followed by one tab-separated
    /// record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#coopsight-manifest\tv{}\tresize={}x{}",
            MANIFEST_VERSION, self.resize.0, self.resize.1
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.manifest_index,
                self.classes[r.class_index],
                r.path.display(),
                r.width,
                r.height
            );
        }
        out
    }

    /// SHA-256 of the canonical serialization, as lowercase hex. Binds
    /// feature caches to the exact manifest they were extracted from.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Write the canonical serialization to `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Parse a manifest previously written by [`Manifest::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty file"))?
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split('\t');
        if parts.next() != Some("#coopsight-manifest") {
            return Err(Error::format(path, "missing manifest header"));
        }
        match parts.next() {
            Some(v) if v == format!("v{MANIFEST_VERSION}") => {}
            other => {
                return Err(Error::format(
                    path,
                    format!("unsupported manifest version {other:?}"),
                ))
            }
        }
        let resize = parts
            .next()
            .and_then(|f| f.strip_prefix("resize="))
            .and_then(|dims| {
                let (w, h) = dims.split_once('x')?;
                Some((w.parse().ok()?, h.parse().ok()?))
            })
            .ok_or_else(|| Error::format(path, "missing or malformed resize field"))?;

        let mut class_of: BTreeMap<String, Vec<(usize, PathBuf, u32, u32)>> = BTreeMap::new();
        let mut n_records = 0usize;
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::format(
                    path,
                    format!("record line {} has {} fields, expected 5", lineno + 2, fields.len()),
                ));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| Error::format(path, format!("bad index on line {}", lineno + 2)))?;
            if index != n_records {
                return Err(Error::format(
                    path,
                    format!("record indices must be dense; saw {index} at position {n_records}"),
                ));
            }
            let w: u32 = fields[3]
                .parse()
                .map_err(|_| Error::format(path, format!("bad width on line {}", lineno + 2)))?;
            let h: u32 = fields[4]
                .parse()
                .map_err(|_| Error::format(path, format!("bad height on line {}", lineno + 2)))?;
            class_of
                .entry(fields[1].to_string())
                .or_default()
                .push((index, PathBuf::from(fields[2]), w, h));
            n_records += 1;
        }

        let classes: Vec<String> = class_of.keys().cloned().collect();
        let mut records = vec![None; n_records];
        for (class_index, files) in class_of.values().enumerate() {
            for &(index, ref p, w, h) in files {
                records[index] = Some(ImageRecord {
                    manifest_index: index,
                    class_index,
                    path: p.clone(),
                    width: w,
                    height: h,
                });
            }
        }
        let records: Vec<ImageRecord> = records
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::format(path, "duplicate record indices"))?;
        Ok(Manifest { resize, classes, records, warnings: Vec::new() })
    }
}

/// A disjoint train/test partition of manifest indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Scan one or more dataset roots into a manifest.
///
/// Every immediate subdirectory of each root is a class; files that the
/// image decoder cannot identify are skipped and reported in
/// [`Manifest::warnings`]. A class directory with no decodable images and a
/// root with no class directories are both fatal.
pub fn scan_dataset(roots: &[PathBuf], resize: (u32, u32)) -> Result<Manifest> {
    if resize.0 == 0 || resize.1 == 0 {
        return Err(Error::InvalidParam("resize dimensions must be nonzero".into()));
    }
    if roots.is_empty() {
        return Err(Error::InvalidParam("at least one dataset root is required".into()));
    }
    let mut warnings = Vec::new();
    // class name -> sorted list of (file name bytes, full path)
    let mut by_class: BTreeMap<String, Vec<(Vec<u8>, PathBuf)>> = BTreeMap::new();
    for root in roots {
        let mut class_dirs: Vec<PathBuf> = Vec::new();
        let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            let path = entry.path();
            if path.is_dir() {
                class_dirs.push(path);
            }
        }
        if class_dirs.is_empty() {
            return Err(Error::EmptyDataset { root: root.clone() });
        }
        for dir in class_dirs {
            let class = match dir.file_name().and_then(|n| n.to_str()) {
                Some(name) => name.to_string(),
                None => {
                    warnings.push(format!("skipped class directory with non-UTF-8 name: {}", dir.display()));
                    continue;
                }
            };
            let files = by_class.entry(class).or_default();
            let n_before = files.len();
            let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| Error::io(&dir, e))?;
                let path = entry.path();
                if !path.is_file() {
                    continue;
                }
                let name = match path.file_name().and_then(|n| n.to_str()) {
                    Some(n) if !n.starts_with('.') => n.to_string(),
                    Some(_) => continue, // dotfile
                    None => {
                        warnings.push(format!("skipped non-UTF-8 file name: {}", path.display()));
                        continue;
                    }
                };
                // Header-level decode check: cheap, catches missing/foreign files.
                if let Err(err) = image::image_dimensions(&path) {
                    warnings.push(format!("skipped undecodable file {}: {err}", path.display()));
                    continue;
                }
                files.push((name.into_bytes(), path));
            }
            if files.len() == n_before && n_before == 0 {
                return Err(Error::EmptyClass { path: dir });
            }
        }
    }
    // Classes may legitimately be empty only if every root contributed the
    // directory yet no root had images — caught above per directory.
    let classes: Vec<String> = by_class.keys().cloned().collect();
    let mut records = Vec::new();
    for (class_index, files) in by_class.values_mut().enumerate() {
        files.sort();
        for (_, path) in files.iter() {
            records.push(ImageRecord {
                manifest_index: records.len(),
                class_index,
                path: path.clone(),
                width: resize.0,
                height: resize.1,
            });
        }
    }
    Ok(Manifest { resize, classes, records, warnings })
}

/// Resize with corner-aligned bilinear interpolation.
///
/// Output pixel (0,0) samples input (0,0) exactly and likewise for the
/// opposite corner, so resizing a gradient preserves its endpoints. When an
/// output dimension is 1, the input center is sampled instead.
pub fn resize_bilinear(src: &RasterRgb, width: u32, height: u32) -> Result<RasterRgb> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam("resize dimensions must be nonzero".into()));
    }
    if (src.width(), src.height()) == (width, height) {
        return Ok(src.clone());
    }
    let coord = |i: u32, out: u32, input: u32| -> f64 {
        if out > 1 {
            i as f64 * (input as f64 - 1.0) / (out as f64 - 1.0)
        } else {
            (input as f64 - 1.0) / 2.0
        }
    };
    let mut data = Vec::with_capacity(3 * width as usize * height as usize);
    for y in 0..height {
        let sy = coord(y, height, src.height());
        let y0 = sy.floor() as u32;
        let y1 = (y0 + 1).min(src.height() - 1);
        let fy = sy - y0 as f64;
        for x in 0..width {
            let sx = coord(x, width, src.width());
            let x0 = sx.floor() as u32;
            let x1 = (x0 + 1).min(src.width() - 1);
            let fx = sx - x0 as f64;
            let p00 = src.get(x0, y0);
            let p10 = src.get(x1, y0);
            let p01 = src.get(x0, y1);
            let p11 = src.get(x1, y1);
            for c in 0..3 {
                let at = |p: (u8, u8, u8)| -> f64 {
                    match c {
                        0 => p.0 as f64,
                        1 => p.1 as f64,
                        _ => p.2 as f64,
                    }
                };
                let top = at(p00) * (1.0 - fx) + at(p10) * fx;
                let bottom = at(p01) * (1.0 - fx) + at(p11) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterRgb::new(width, height, data)
}

/// Decode the image at `path` and resize it to `resize`.
pub fn load_image(path: &Path, resize: (u32, u32)) -> Result<RasterRgb> {
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    let raster = RasterRgb::new(w, h, rgb.into_raw())?;
    resize_bilinear(&raster, resize.0, resize.1)
}

/// Stratified train/test split of manifest indices.
///
/// Each class contributes `round(count · test_fraction)` records to the
/// test side (never all of them, never zero), drawn by a seeded shuffle of
/// that class's records. Both sides are returned in ascending manifest
/// order. The split depends only on `(manifest, test_fraction, seed)`.
pub fn split_train_test(manifest: &Manifest, test_fraction: f64, seed: u64) -> Result<DataSplit> {
    let labels: Vec<u32> = manifest.records().iter().map(|r| r.class_index as u32).collect();
    split_indices_by_label(&labels, test_fraction, seed).map_err(|e| match e {
        // Re-raise stratification failures with the class name for context.
        Error::InvalidParam(msg) if msg.starts_with("class ") => {
            let named = manifest
                .classes()
                .iter()
                .enumerate()
                .fold(msg, |m, (i, name)| m.replace(&format!("class {i} "), &format!("class {name} ")));
            Error::InvalidParam(named)
        }
        other => other,
    })
}

/// Stratified split over arbitrary labeled rows: index `i` in `labels` is
/// row `i`. This is the same partition [`split_train_test`] produces when
/// the labels come from a manifest in record order, so cache-driven
/// pipelines and manifest-driven commands agree on which rows are held out.
pub fn split_indices_by_label(labels: &[u32], test_fraction: f64, seed: u64) -> Result<DataSplit> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "test_fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    let Some(&max_label) = labels.iter().max() else {
        return Err(Error::InvalidParam("no rows to split".into()));
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class_index in 0..=max_label as usize {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l as usize == class_index)
            .map(|(i, _)| i)
            .collect();
        let count = members.len();
        if count == 0 {
            continue;
        }
        let n_test = (count as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test >= count {
            return Err(Error::InvalidParam(format!(
                "class {class_index} has {count} records; test_fraction {test_fraction} cannot stratify it"
            )));
        }
        rng::shuffle(&mut members, seed, &format!("split-{class_index}"));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DataSplit { train, test })
}

/// Stratified k-fold partition. Fold `i`'s `test` holds every index whose
/// class-local shuffled position is congruent to `i` mod `k`, so per-class
/// fold sizes differ by at most one.
pub fn kfold(manifest: &Manifest, k: usize, seed: u64) -> Result<Vec<DataSplit>> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("k must be at least 2, got {k}")));
    }
    let counts = manifest.class_counts();
    if let Some(&smallest) = counts.iter().min() {
        if smallest < k {
            return Err(Error::InvalidParam(format!(
                "k = {k} exceeds smallest class count {smallest}"
            )));
        }
    } else {
        return Err(Error::InvalidParam("manifest has no classes".into()));
    }
    let mut fold_tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class_index in 0..counts.len() {
        let mut members: Vec<usize> = manifest
            .records()
            .iter()
            .filter(|r| r.class_index == class_index)
            .map(|r| r.manifest_index)
            .collect();
        rng::shuffle(&mut members, seed, &format!("fold-{class_index}"));
        for (pos, idx) in members.into_iter().enumerate() {
            fold_tests[pos % k].push(idx);
        }
    }
    let all: Vec<usize> = (0..manifest.len()).collect();
    Ok(fold_tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = all.iter().copied().filter(|i| test.binary_search(i).is_err()).collect();
            DataSplit { train, test }
        })
        .collect())
}
