//! Layered configuration: built-in defaults, then the optional TOML config
//! file, then environment overrides (`COOPSIGHT_OUT_DIR`, `COOPSIGHT_JOBS`),
//! then command-line flags. Later layers win, so a flag always beats the
//! file and the environment.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use coopsight::classify::MlpConfig;
use coopsight::eval::ScreenConfig;
use coopsight::features::{FeatureGroup, FeatureParams};
use coopsight::pipeline::{ModelPreset, PipelineConfig};
use coopsight::select::SelectorKind;
use coopsight::{Error, Result};

/// Default feature groups: the retained global set.
pub fn default_groups() -> Vec<String> {
    vec!["LAB-CM".into(), "HSV-LBP".into(), "LAB-LBP".into()]
}

// ---- The config file --------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub features: FeaturesSection,
    pub split: SplitSection,
    pub reduce: ReduceSection,
    pub select: SelectSection,
    pub model: ModelSection,
    pub screen: ScreenSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// `[width, height]` applied at load time.
    pub resize: Option<[u32; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// `SPACE-NAME` group names.
    pub groups: Option<Vec<String>>,
    /// Extractor knobs; omitted fields keep their defaults.
    pub params: Option<FeatureParams>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceSection {
    pub pca_k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSection {
    /// One of `kbest`, `lasso`, `forest`, `gbdt`.
    pub method: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// One of `mlp-final`, `mlp-screen`, `tree`, `forest`, `svm`.
    pub preset: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenSection {
    pub split_fraction: Option<f64>,
    pub pca_cap: Option<usize>,
}

impl FileConfig {
    /// Parse a TOML config file. Unreadable files are data errors;
    /// syntactically or structurally invalid ones are usage errors.
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidParam(format!("config {}: {e}", path.display())))
    }
}

// ---- Flag overrides ---------------------------------------------------------

/// Values taken from command-line flags; `None` means the flag was absent.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub resize: Option<(u32, u32)>,
    pub groups: Option<Vec<String>>,
    pub split_fraction: Option<f64>,
    pub pca_k: Option<usize>,
    pub selector: Option<SelectorKind>,
    pub select_k: Option<usize>,
    pub preset: Option<ModelPreset>,
    pub screen_pca_cap: Option<usize>,
}

/// Parse a `WxH` flag value such as `128x128`.
pub fn parse_resize(s: &str) -> Result<(u32, u32)> {
    let parsed = s.split_once(['x', 'X']).and_then(|(w, h)| {
        Some((w.trim().parse::<u32>().ok()?, h.trim().parse::<u32>().ok()?))
    });
    match parsed {
        Some((w, h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(Error::InvalidParam(format!(
            "resize must look like 128x128, got {s:?}"
        ))),
    }
}

// ---- Resolved settings ------------------------------------------------------

/// Everything a command needs, fully resolved.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub resize: (u32, u32),
    pub groups: Vec<String>,
    pub params: FeatureParams,
    pub split_fraction: f64,
    pub pca_k: usize,
    pub selector: SelectorKind,
    pub select_k: usize,
    pub preset: ModelPreset,
    pub screen_split_fraction: f64,
    pub screen_pca_cap: usize,
}

impl Settings {
    /// Resolve from an optional config file plus flags, reading the
    /// environment for `COOPSIGHT_OUT_DIR` and `COOPSIGHT_JOBS`.
    pub fn resolve(config_path: Option<&Path>, flags: &Overrides) -> Result<Settings> {
        let env_out_dir = std::env::var_os("COOPSIGHT_OUT_DIR").map(PathBuf::from);
        let env_jobs = match std::env::var("COOPSIGHT_JOBS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                Error::InvalidParam(format!("COOPSIGHT_JOBS must be an integer, got {v:?}"))
            })?),
            Err(_) => None,
        };
        let file = match config_path {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Settings::merge(file, env_out_dir, env_jobs, flags)
    }

    /// Pure merge of the four layers, separated out for tests.
    pub fn merge(
        file: FileConfig,
        env_out_dir: Option<PathBuf>,
        env_jobs: Option<usize>,
        flags: &Overrides,
    ) -> Result<Settings> {
        let selector = match (&flags.selector, &file.select.method) {
            (Some(s), _) => *s,
            (None, Some(name)) => SelectorKind::parse(name)?,
            (None, None) => SelectorKind::Forest,
        };
        let preset = match (&flags.preset, &file.model.preset) {
            (Some(p), _) => *p,
            (None, Some(name)) => ModelPreset::parse(name)?,
            (None, None) => ModelPreset::MlpFinal,
        };
        Ok(Settings {
            seed: flags.seed.or(file.seed).unwrap_or(44),
            jobs: flags.jobs.or(env_jobs).or(file.jobs).unwrap_or(0),
            out_dir: flags
                .out_dir
                .clone()
                .or(env_out_dir)
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            resize: flags
                .resize
                .or(file.dataset.resize.map(|[w, h]| (w, h)))
                .unwrap_or((128, 128)),
            groups: flags
                .groups
                .clone()
                .or(file.features.groups)
                .unwrap_or_else(default_groups),
            params: file.features.params.unwrap_or_default(),
            split_fraction: flags.split_fraction.or(file.split.fraction).unwrap_or(0.2),
            pca_k: flags.pca_k.or(file.reduce.pca_k).unwrap_or(66),
            selector,
            select_k: flags.select_k.or(file.select.k).unwrap_or(66),
            preset,
            screen_split_fraction: file.screen.split_fraction.unwrap_or(0.2),
            screen_pca_cap: flags.screen_pca_cap.or(file.screen.pca_cap).unwrap_or(300),
        })
    }

    /// The modeling config snapshot that flows into artifacts.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            groups: self.groups.clone(),
            split_fraction: self.split_fraction,
            pca_k: self.pca_k,
            selector: self.selector,
            select_k: self.select_k,
            preset: self.preset,
        }
    }

    pub fn screen_config(&self) -> ScreenConfig {
        ScreenConfig {
            split_fraction: self.screen_split_fraction,
            pca_cap: self.screen_pca_cap,
            mlp: MlpConfig::screening(),
        }
    }

    /// Parse the configured group names into typed groups.
    pub fn feature_groups(&self) -> Result<Vec<FeatureGroup>> {
        self.groups.iter().map(|g| FeatureGroup::parse(g)).collect()
    }
}
