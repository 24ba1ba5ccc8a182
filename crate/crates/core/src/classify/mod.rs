//! Lightweight classifiers: multilayer perceptron, decision tree, voting
//! forest, and RBF support-vector machine.
//!
//! All models fit on f64 rows, are deterministic given a master seed, and
//! serialize to a versioned container (structured header + little-endian
//! float payload) so a fitted pipeline can be stored and replayed bit for
//! bit.

pub mod forest;
pub mod mlp;
pub mod svm;
pub mod tree;

pub use forest::{ForestConfig, ForestModel};
pub use mlp::{EpochStats, MlpConfig, MlpModel, MlpNetwork, MlpPack};
pub use svm::{SvmConfig, SvmModel, SvmPack};
pub use tree::{TreeConfig, TreeModel};

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 8] = *b"CSMODELF";
pub const MODEL_VERSION: u32 = 1;

/// Which classifier family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    Mlp,
    Tree,
    Forest,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Mlp,
        ClassifierKind::Tree,
        ClassifierKind::Forest,
        ClassifierKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Forest => "forest",
            ClassifierKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Result<ClassifierKind> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ClassifierKind::Mlp),
            "tree" | "dt" => Ok(ClassifierKind::Tree),
            "forest" | "rf" => Ok(ClassifierKind::Forest),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(crate::error::Error::InvalidParam(format!(
                "unknown classifier {other:?} (expected mlp, tree, forest, or svm)"
            ))),
        }
    }
}

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Mlp(MlpModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Svm(SvmModel),
}

impl Model {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::Mlp(_) => ClassifierKind::Mlp,
            Model::Tree(_) => ClassifierKind::Tree,
            Model::Forest(_) => ClassifierKind::Forest,
            Model::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<u32> {
        match self {
            Model::Mlp(m) => m.predict_row(row),
            Model::Tree(m) => m.predict_row(row),
            Model::Forest(m) => m.predict_row(row),
            Model::Svm(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        match self {
            Model::Mlp(m) => m.predict(rows),
            Model::Tree(m) => m.predict(rows),
            Model::Forest(m) => m.predict(rows),
            Model::Svm(m) => m.predict(rows),
        }
    }

    /// Separate the model into a structured header and the dense float
    /// blocks; tree ensembles are pure structure and pack no floats.
    pub fn pack(&self) -> (ModelPack, Vec<f64>) {
        match self {
            Model::Mlp(m) => {
                let (pack, floats) = m.pack();
                (ModelPack::Mlp(pack), floats)
            }
            Model::Tree(m) => (ModelPack::Tree(m.clone()), Vec::new()),
            Model::Forest(m) => (ModelPack::Forest(m.clone()), Vec::new()),
            Model::Svm(m) => {
                let (pack, floats) = m.pack();
                (ModelPack::Svm(pack), floats)
            }
        }
    }

    /// Rebuild from [`pack`](Self::pack) output.
    pub fn unpack(pack: ModelPack, floats: &[f64]) -> Result<Model> {
        match pack {
            ModelPack::Mlp(p) => Ok(Model::Mlp(MlpModel::unpack(p, floats)?)),
            ModelPack::Tree(m) => Ok(Model::Tree(m)),
            ModelPack::Forest(m) => Ok(Model::Forest(m)),
            ModelPack::Svm(p) => Ok(Model::Svm(SvmModel::unpack(p, floats)?)),
        }
    }

    /// Serialize to the versioned model container: magic, version, a
    /// structured JSON header, then the dense parameters as little-endian
    /// f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let (pack, floats) = self.pack();
        let header_json = serde_json::to_vec(&pack).expect("model header serializes");
        let mut buf = Vec::with_capacity(16 + header_json.len() + floats.len() * 8);
        buf.extend_from_slice(&MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header_json);
        for v in &floats {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reload a model container, verifying magic and version.
    pub fn load(path: &Path) -> Result<Model> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 16 || bytes[0..8] != MODEL_MAGIC {
            return Err(Error::format(path, "not a model file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::format(path, format!("unsupported model version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let payload_start = 16 + header_len;
        if bytes.len() < payload_start {
            return Err(Error::format(path, "truncated header"));
        }
        let pack: ModelPack = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        let payload = &bytes[payload_start..];
        if payload.len() % 8 != 0 {
            return Err(Error::format(path, "float payload is not 8-byte aligned"));
        }
        let floats: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Model::unpack(pack, &floats).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Structured (float-free) half of a packed [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelPack {
    Mlp(MlpPack),
    Tree(TreeModel),
    Forest(ForestModel),
    Svm(SvmPack),
}
