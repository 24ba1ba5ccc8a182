//! Feature-matrix assembly and the on-disk feature cache.
//!
//! A [`FeatureMatrix`] holds one f32 row per manifest record, with columns
//! laid out as contiguous named group spans. Extraction parallelizes over
//! images but collects rows in manifest order, so the result is identical
//! regardless of thread count. The cache file format is a small binary
//! container: magic, version, JSON header, then the raw little-endian f32
//! payload — reloading reproduces the matrix bit for bit.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colorspace::decompose;
use crate::dataset::{load_image, Manifest};
use crate::error::{Error, Result};
use crate::features::{extract_group, FeatureGroup, FeatureParams};

/// Identifies a feature-cache file.
pub const CACHE_MAGIC: [u8; 8] = *b"CSFTCACH";
/// Bumped whenever the container layout or header schema changes.
pub const CACHE_VERSION: u32 = 1;

/// Hex SHA-256 of the canonical JSON encoding of the extraction parameters.
/// Stored in every cache so downstream stages can refuse a stale cache.
pub fn params_fingerprint(params: &FeatureParams) -> String {
    let json = serde_json::to_string(params).expect("params serialize to JSON");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One named group's contiguous column range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpan {
    pub group: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered, contiguous column layout of a feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSchema {
    spans: Vec<GroupSpan>,
}

impl GroupSchema {
    /// Build a schema from `(name, width)` pairs in the given order.
    pub fn from_widths(widths: &[(String, usize)]) -> Result<Self> {
        let mut spans = Vec::with_capacity(widths.len());
        let mut offset = 0;
        for (group, len) in widths {
            if *len == 0 {
                return Err(Error::InvalidParam(format!("group {group} has zero width")));
            }
            if spans.iter().any(|s: &GroupSpan| s.group == *group) {
                return Err(Error::InvalidParam(format!("duplicate group {group}")));
            }
            spans.push(GroupSpan { group: group.clone(), offset, len: *len });
            offset += len;
        }
        if spans.is_empty() {
            return Err(Error::InvalidParam("schema needs at least one group".into()));
        }
        Ok(GroupSchema { spans })
    }

    pub fn spans(&self) -> &[GroupSpan] {
        &self.spans
    }

    /// Total column count.
    pub fn width(&self) -> usize {
        self.spans.last().map(|s| s.offset + s.len).unwrap_or(0)
    }

    pub fn span(&self, group: &str) -> Option<&GroupSpan> {
        self.spans.iter().find(|s| s.group == group)
    }

    pub fn group_names(&self) -> Vec<String> {
        self.spans.iter().map(|s| s.group.clone()).collect()
    }

    /// Check contiguity: spans must tile `0..width` with no gaps/overlaps.
    fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for span in &self.spans {
            if span.offset != expected || span.len == 0 {
                return Err(Error::Mismatch(format!(
                    "schema span {} at offset {} (len {}) breaks contiguity",
                    span.group, span.offset, span.len
                )));
            }
            expected += span.len;
        }
        Ok(())
    }
}

/// Serialized header of a cache file.
#[derive(Serialize, Deserialize)]
struct CacheHeader {
    n_rows: usize,
    n_cols: usize,
    labels: Vec<u32>,
    class_names: Vec<String>,
    schema: GroupSchema,
    manifest_fingerprint: String,
    params_fingerprint: String,
}

/// Dense row-major feature matrix with named column groups and row labels.
///
/// Values are stored as f32 (the cache and model format); every statistic
/// upstream is computed in f64 and narrowed once on assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: GroupSchema,
    n_rows: usize,
    values: Vec<f32>,
    labels: Vec<u32>,
    class_names: Vec<String>,
    manifest_fingerprint: String,
    params_fingerprint: String,
}

impl FeatureMatrix {
    /// Assemble a matrix from raw parts, validating shape and labels.
    pub fn from_parts(
        schema: GroupSchema,
        values: Vec<f32>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        manifest_fingerprint: String,
        params_fingerprint: String,
    ) -> Result<FeatureMatrix> {
        let width = schema.width();
        if width == 0 || values.len() % width != 0 {
            return Err(Error::Mismatch(format!(
                "{} values do not tile rows of width {width}",
                values.len()
            )));
        }
        let n_rows = values.len() / width;
        if labels.len() != n_rows {
            return Err(Error::Mismatch(format!(
                "{} labels for {n_rows} rows",
                labels.len()
            )));
        }
        if class_names.is_empty() || labels.iter().any(|&l| l as usize >= class_names.len()) {
            return Err(Error::Mismatch("labels exceed the class list".into()));
        }
        Ok(FeatureMatrix {
            schema,
            n_rows,
            values,
            labels,
            class_names,
            manifest_fingerprint,
            params_fingerprint,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.width()
    }

    pub fn schema(&self) -> &GroupSchema {
        &self.schema
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn manifest_fingerprint(&self) -> &str {
        &self.manifest_fingerprint
    }

    pub fn params_fingerprint(&self) -> &str {
        &self.params_fingerprint
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    /// Raw row-major payload, exactly as serialized.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Rows widened to f64 for numeric stages.
    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().map(|&v| v as f64).collect())
            .collect()
    }

    /// True when the cache was extracted from this manifest with these
    /// parameters.
    pub fn matches(&self, manifest: &Manifest, params: &FeatureParams) -> bool {
        self.manifest_fingerprint == manifest.fingerprint()
            && self.params_fingerprint == params_fingerprint(params)
    }

    /// New matrix without the named group's columns.
    pub fn drop_group(&self, group: &str) -> Result<FeatureMatrix> {
        let keep: Vec<String> = self
            .schema
            .spans()
            .iter()
            .filter(|s| s.group != group)
            .map(|s| s.group.clone())
            .collect();
        if keep.len() == self.schema.spans().len() {
            return Err(Error::UnknownGroup(group.to_string()));
        }
        if keep.is_empty() {
            return Err(Error::InvalidParam(format!(
                "dropping {group} would leave an empty matrix"
            )));
        }
        self.restrict_groups(&keep)
    }

    /// New matrix containing only the named groups, in schema order.
    /// Every requested group must exist.
    pub fn restrict_groups(&self, groups: &[String]) -> Result<FeatureMatrix> {
        for g in groups {
            if self.schema.span(g).is_none() {
                return Err(Error::UnknownGroup(g.clone()));
            }
        }
        let spans: Vec<&GroupSpan> = self
            .schema
            .spans()
            .iter()
            .filter(|s| groups.contains(&s.group))
            .collect();
        let widths: Vec<(String, usize)> =
            spans.iter().map(|s| (s.group.clone(), s.len)).collect();
        let schema = GroupSchema::from_widths(&widths)?;
        let mut values = Vec::with_capacity(self.n_rows * schema.width());
        for i in 0..self.n_rows {
            let row = self.row(i);
            for span in &spans {
                values.extend_from_slice(&row[span.offset..span.offset + span.len]);
            }
        }
        Ok(FeatureMatrix {
            schema,
            n_rows: self.n_rows,
            values,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            manifest_fingerprint: self.manifest_fingerprint.clone(),
            params_fingerprint: self.params_fingerprint.clone(),
        })
    }

    /// New matrix keeping only the given rows, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        let w = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * w);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::Mismatch(format!(
                    "row {i} out of bounds for {} rows",
                    self.n_rows
                )));
            }
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(FeatureMatrix {
            schema: self.schema.clone(),
            n_rows: indices.len(),
            values,
            labels,
            class_names: self.class_names.clone(),
            manifest_fingerprint: self.manifest_fingerprint.clone(),
            params_fingerprint: self.params_fingerprint.clone(),
        })
    }

    /// Serialize to the binary cache container.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CacheHeader {
            n_rows: self.n_rows,
            n_cols: self.n_cols(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            schema: self.schema.clone(),
            manifest_fingerprint: self.manifest_fingerprint.clone(),
            params_fingerprint: self.params_fingerprint.clone(),
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut buf = Vec::with_capacity(16 + header_json.len() + self.values.len() * 4);
        buf.extend_from_slice(&CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header_json);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reload a cache container, verifying magic, version, header
    /// consistency, and payload size.
    pub fn load(path: &Path) -> Result<FeatureMatrix> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 16 || bytes[0..8] != CACHE_MAGIC {
            return Err(Error::format(path, "not a feature cache (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported cache version {version}"),
            ));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let payload_start = 16 + header_len;
        if bytes.len() < payload_start {
            return Err(Error::format(path, "truncated header"));
        }
        let header: CacheHeader = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        header.schema.validate().map_err(|e| Error::format(path, e.to_string()))?;
        if header.schema.width() != header.n_cols {
            return Err(Error::format(path, "schema width disagrees with n_cols"));
        }
        if header.labels.len() != header.n_rows {
            return Err(Error::format(path, "label count disagrees with n_rows"));
        }
        if let Some(&bad) = header
            .labels
            .iter()
            .find(|&&l| l as usize >= header.class_names.len())
        {
            return Err(Error::format(path, format!("label {bad} has no class name")));
        }
        let expected = header.n_rows * header.n_cols * 4;
        let payload = &bytes[payload_start..];
        if payload.len() != expected {
            return Err(Error::format(
                path,
                format!("payload is {} bytes, expected {expected}", payload.len()),
            ));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureMatrix {
            schema: header.schema,
            n_rows: header.n_rows,
            values,
            labels: header.labels,
            class_names: header.class_names,
            manifest_fingerprint: header.manifest_fingerprint,
            params_fingerprint: header.params_fingerprint,
        })
    }
}

/// Sort groups into canonical order and drop duplicates.
pub fn canonical_groups(groups: &[FeatureGroup]) -> Vec<FeatureGroup> {
    let mut sorted = groups.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
}

/// Extract the feature matrix for every record of a manifest.
///
/// Images are loaded, resized to the manifest's dimensions, decomposed into
/// channel planes once, and run through each group's extractor. Work is
/// distributed across the rayon pool; rows land in manifest order so the
/// output is byte-identical at any `--jobs` setting.
pub fn extract_matrix(
    manifest: &Manifest,
    groups: &[FeatureGroup],
    params: &FeatureParams,
) -> Result<FeatureMatrix> {
    params.validate()?;
    if manifest.is_empty() {
        return Err(Error::Mismatch("manifest has no records".into()));
    }
    let groups = canonical_groups(groups);
    if groups.is_empty() {
        return Err(Error::InvalidParam("no feature groups requested".into()));
    }
    let dims = manifest.resize();
    let widths: Vec<(String, usize)> = groups
        .iter()
        .map(|g| (g.name(), g.width(params, dims)))
        .collect();
    let schema = GroupSchema::from_widths(&widths)?;

    let rows: Vec<Vec<f32>> = manifest
        .records()
        .par_iter()
        .map(|record| -> Result<Vec<f32>> {
            let raster = load_image(&record.path, dims)?;
            let channels = decompose(&raster);
            let mut row = Vec::with_capacity(schema.width());
            for group in &groups {
                let fv = extract_group(&channels, *group, params).map_err(|e| {
                    Error::Numeric(format!("{}: {e}", record.path.display()))
                })?;
                row.extend(fv.values.iter().map(|&v| v as f32));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(manifest.len() * schema.width());
    for row in &rows {
        values.extend_from_slice(row);
    }
    Ok(FeatureMatrix {
        schema,
        n_rows: manifest.len(),
        values,
        labels: manifest
            .records()
            .iter()
            .map(|r| r.class_index as u32)
            .collect(),
        class_names: manifest.classes().to_vec(),
        manifest_fingerprint: manifest.fingerprint(),
        params_fingerprint: params_fingerprint(params),
    })
}
