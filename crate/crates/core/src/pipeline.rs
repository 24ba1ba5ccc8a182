//! End-to-end modeling pipeline: scale → project → select → classify.
//!
//! The fitted preprocessing stages (scaler, projection, selector) travel in
//! one versioned artifact container; the classifier travels in its own
//! model container and the artifacts merely reference it. This mirrors the
//! command surface: `select` writes artifacts, `train` writes a model,
//! `evaluate` applies both, and `pipeline` composes them in-process.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{
    ClassifierKind, ForestConfig, ForestModel, MlpConfig, MlpModel, Model, SvmConfig, SvmModel,
    TreeConfig, TreeModel,
};
use crate::dataset::{split_indices_by_label, DataSplit};
use crate::error::{Error, Result};
use crate::eval::{classification_report, confusion, ClassReport, ConfusionMatrix};
use crate::featstore::FeatureMatrix;
use crate::preprocess::{PcaModel, ScalerParams};
use crate::rng::derive_seed;
use crate::select::{select_features, SelectorKind, SelectorReport};

pub const ARTIFACT_MAGIC: [u8; 8] = *b"CSPLARTF";
pub const ARTIFACT_VERSION: u32 = 1;

/// Which classifier a pipeline trains, including the perceptron size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelPreset {
    /// 256-128 hidden layers — the final classifier.
    MlpFinal,
    /// 128-64 hidden layers, patience 5 — the cheap screening classifier.
    MlpScreen,
    Tree,
    Forest,
    Svm,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 5] = [
        ModelPreset::MlpFinal,
        ModelPreset::MlpScreen,
        ModelPreset::Tree,
        ModelPreset::Forest,
        ModelPreset::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::MlpFinal => "mlp-final",
            ModelPreset::MlpScreen => "mlp-screen",
            ModelPreset::Tree => "tree",
            ModelPreset::Forest => "forest",
            ModelPreset::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Result<ModelPreset> {
        match s.to_ascii_lowercase().as_str() {
            "mlp-final" | "mlp" => Ok(ModelPreset::MlpFinal),
            "mlp-screen" => Ok(ModelPreset::MlpScreen),
            "tree" | "dt" => Ok(ModelPreset::Tree),
            "forest" | "rf" => Ok(ModelPreset::Forest),
            "svm" => Ok(ModelPreset::Svm),
            other => Err(Error::InvalidParam(format!(
                "unknown model preset {other:?} (expected mlp-final, mlp-screen, tree, forest, or svm)"
            ))),
        }
    }

    pub fn kind(self) -> ClassifierKind {
        match self {
            ModelPreset::MlpFinal | ModelPreset::MlpScreen => ClassifierKind::Mlp,
            ModelPreset::Tree => ClassifierKind::Tree,
            ModelPreset::Forest => ClassifierKind::Forest,
            ModelPreset::Svm => ClassifierKind::Svm,
        }
    }
}

/// Modeling decisions for one pipeline run. Dataset location, resize, and
/// extractor parameters live with the caller; this covers everything from
/// the assembled feature matrix onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Master seed; every random decision downstream derives from it, and
    /// it travels in the artifact snapshot so later stages (train,
    /// evaluate) reconstruct the identical split.
    pub seed: u64,
    /// Feature groups to model on; empty means every group in the matrix.
    #[serde(default)]
    pub groups: Vec<String>,
    /// Held-out fraction per class.
    pub split_fraction: f64,
    /// Principal components to keep (clamped to the fittable maximum).
    pub pca_k: usize,
    pub selector: SelectorKind,
    /// Columns the selector keeps (clamped to the projected width).
    pub select_k: usize,
    pub preset: ModelPreset,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 44,
            groups: vec!["LAB-CM".into(), "HSV-LBP".into(), "LAB-LBP".into()],
            split_fraction: 0.2,
            pca_k: 66,
            selector: SelectorKind::Forest,
            select_k: 66,
            preset: ModelPreset::MlpFinal,
        }
    }
}

/// Fitted preprocessing: everything needed to map raw feature rows into
/// the model's input space, plus provenance and an optional pointer to the
/// trained model file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineArtifacts {
    pub manifest_fingerprint: String,
    pub params_fingerprint: String,
    pub config: PipelineConfig,
    pub class_names: Vec<String>,
    pub scaler: ScalerParams,
    pub pca: PcaModel,
    pub selector: SelectorReport,
    /// File name of the trained model, once one exists.
    pub model_ref: Option<String>,
}

/// Structured half of the artifact container; the scaler and projection
/// float blocks travel in the little-endian payload that follows.
#[derive(Serialize, Deserialize)]
struct ArtifactHeader {
    manifest_fingerprint: String,
    params_fingerprint: String,
    config: PipelineConfig,
    class_names: Vec<String>,
    selector: SelectorReport,
    scaler_width: usize,
    pca_components: usize,
    pca_width: usize,
    model_ref: Option<String>,
    /// Lengths of the scaler and projection float blocks, in payload order.
    float_lens: [usize; 2],
}

impl PipelineArtifacts {
    /// Raw feature row → scaled → projected → selected columns.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let scaled = self.scaler.transform_row(row)?;
        let projected = self.pca.project_row(&scaled)?;
        if projected.len() != self.selector.importances.len() {
            return Err(Error::Mismatch(format!(
                "selector was fitted on {} columns, projection yields {}",
                self.selector.importances.len(),
                projected.len()
            )));
        }
        Ok(self.selector.apply_row(&projected))
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Predict class indices for raw feature rows with a trained model.
    pub fn predict(&self, model: &Model, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.iter()
            .map(|r| model.predict_row(&self.transform_row(r)?))
            .collect()
    }

    /// Serialize to the versioned artifact container.
    pub fn save(&self, path: &Path) -> Result<()> {
        let scaler_floats = self.scaler.pack();
        let pca_floats = self.pca.pack();
        let header = ArtifactHeader {
            manifest_fingerprint: self.manifest_fingerprint.clone(),
            params_fingerprint: self.params_fingerprint.clone(),
            config: self.config.clone(),
            class_names: self.class_names.clone(),
            selector: self.selector.clone(),
            scaler_width: self.scaler.width(),
            pca_components: self.pca.n_components(),
            pca_width: self.pca.input_width(),
            model_ref: self.model_ref.clone(),
            float_lens: [scaler_floats.len(), pca_floats.len()],
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let n_floats = scaler_floats.len() + pca_floats.len();
        let mut buf = Vec::with_capacity(16 + header_json.len() + n_floats * 8);
        buf.extend_from_slice(&ARTIFACT_MAGIC);
        buf.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header_json);
        for block in [&scaler_floats, &pca_floats] {
            for v in block {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reload an artifact container, verifying magic, version, and block
    /// sizes.
    pub fn load(path: &Path) -> Result<PipelineArtifacts> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 16 || bytes[0..8] != ARTIFACT_MAGIC {
            return Err(Error::format(path, "not a pipeline artifact (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != ARTIFACT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported artifact version {version}"),
            ));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let payload_start = 16 + header_len;
        if bytes.len() < payload_start {
            return Err(Error::format(path, "truncated header"));
        }
        let header: ArtifactHeader = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        let payload = &bytes[payload_start..];
        let n_floats: usize = header.float_lens.iter().sum();
        if payload.len() != n_floats * 8 {
            return Err(Error::format(
                path,
                format!("payload is {} bytes, expected {}", payload.len(), n_floats * 8),
            ));
        }
        let floats: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (scaler_block, pca_block) = floats.split_at(header.float_lens[0]);
        let scaler = ScalerParams::unpack(header.scaler_width, scaler_block)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let pca = PcaModel::unpack(header.pca_components, header.pca_width, pca_block)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(PipelineArtifacts {
            manifest_fingerprint: header.manifest_fingerprint,
            params_fingerprint: header.params_fingerprint,
            config: header.config,
            class_names: header.class_names,
            scaler,
            pca,
            selector: header.selector,
            model_ref: header.model_ref,
        })
    }
}

/// A fully fitted and evaluated pipeline.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub artifacts: PipelineArtifacts,
    pub model: Model,
    pub split: DataSplit,
    pub confusion: ConfusionMatrix,
    pub report: ClassReport,
}

fn rows_f64_subset(matrix: &FeatureMatrix, rows: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|&i| matrix.row(i).iter().map(|&v| v as f64).collect())
        .collect()
}

fn labels_subset(matrix: &FeatureMatrix, rows: &[usize]) -> Vec<u32> {
    rows.iter().map(|&i| matrix.labels()[i]).collect()
}

/// Fit scaler, projection, and selector on the training rows of `split`.
/// Test rows are never touched — the leakage guard tests pin this down by
/// mutating them and asserting identical artifacts.
pub fn fit_artifacts(
    matrix: &FeatureMatrix,
    split: &DataSplit,
    config: &PipelineConfig,
) -> Result<PipelineArtifacts> {
    if split.train.len() < 2 {
        return Err(Error::Mismatch("need at least two training rows".into()));
    }
    let n_classes = matrix.class_names().len();
    let x_train = rows_f64_subset(matrix, &split.train);
    let y_train = labels_subset(matrix, &split.train);

    let scaler = ScalerParams::fit(&x_train)?;
    let scaled = scaler.transform(&x_train)?;
    let pca_k = config
        .pca_k
        .min(PcaModel::max_components(scaled.len(), scaler.width()));
    let pca = PcaModel::fit(&scaled, pca_k)?;
    let projected = pca.project(&scaled)?;
    let selector = select_features(
        &projected,
        &y_train,
        n_classes,
        config.selector,
        config.select_k,
        derive_seed(config.seed, "select"),
    )?;
    Ok(PipelineArtifacts {
        manifest_fingerprint: matrix.manifest_fingerprint().to_string(),
        params_fingerprint: matrix.params_fingerprint().to_string(),
        config: config.clone(),
        class_names: matrix.class_names().to_vec(),
        scaler,
        pca,
        selector,
        model_ref: None,
    })
}

/// Train the preset classifier on the artifact-transformed training rows.
/// The training seed derives from the seed in the artifact snapshot, so
/// training is reproducible from the artifacts alone.
pub fn train_model(
    matrix: &FeatureMatrix,
    split: &DataSplit,
    artifacts: &PipelineArtifacts,
    preset: ModelPreset,
) -> Result<Model> {
    let x_train = artifacts.transform(&rows_f64_subset(matrix, &split.train))?;
    let y_train = labels_subset(matrix, &split.train);
    let n_classes = artifacts.class_names.len();
    let model_seed = derive_seed(artifacts.config.seed, "train");
    Ok(match preset {
        ModelPreset::MlpFinal => {
            Model::Mlp(MlpModel::fit(&x_train, &y_train, n_classes, MlpConfig::default(), model_seed)?)
        }
        ModelPreset::MlpScreen => Model::Mlp(MlpModel::fit(
            &x_train,
            &y_train,
            n_classes,
            MlpConfig::screening(),
            model_seed,
        )?),
        ModelPreset::Tree => {
            Model::Tree(TreeModel::fit(&x_train, &y_train, n_classes, TreeConfig::default())?)
        }
        ModelPreset::Forest => Model::Forest(ForestModel::fit(
            &x_train,
            &y_train,
            n_classes,
            ForestConfig::default(),
            model_seed,
        )?),
        ModelPreset::Svm => Model::Svm(SvmModel::fit(
            &x_train,
            &y_train,
            n_classes,
            SvmConfig::default(),
            model_seed,
        )?),
    })
}

/// Evaluate artifacts + model on the given matrix rows.
pub fn evaluate_rows(
    matrix: &FeatureMatrix,
    rows: &[usize],
    artifacts: &PipelineArtifacts,
    model: &Model,
) -> Result<(ConfusionMatrix, ClassReport)> {
    let x = rows_f64_subset(matrix, rows);
    let y_true = labels_subset(matrix, rows);
    let y_pred = artifacts.predict(model, &x)?;
    let cm = confusion(&y_true, &y_pred, artifacts.class_names.len())?;
    let report = classification_report(&cm);
    Ok((cm, report))
}

/// Split, fit, train, and evaluate in one pass: the `pipeline` command's
/// core, and by construction the exact composition of the `select`,
/// `train`, and `evaluate` stages with the same seed.
pub fn run_pipeline(matrix: &FeatureMatrix, config: &PipelineConfig) -> Result<PipelineRun> {
    let working;
    let matrix = if config.groups.is_empty() {
        matrix
    } else {
        working = matrix.restrict_groups(&config.groups)?;
        &working
    };
    let split = split_indices_by_label(matrix.labels(), config.split_fraction, config.seed)?;
    let artifacts = fit_artifacts(matrix, &split, config)?;
    let model = train_model(matrix, &split, &artifacts, config.preset)?;
    let (cm, report) = evaluate_rows(matrix, &split.test, &artifacts, &model)?;
    Ok(PipelineRun { artifacts, model, split, confusion: cm, report })
}
