//! Command-line front end for the feature-engineering pipeline.
//!
//! The binary is a thin shell over this library so integration tests can
//! drive parsing and dispatch in-process. Every flag mirrors a config-file
//! key; flags beat environment variables, which beat the file, which beats
//! built-in defaults. Exit codes: 0 success, 1 usage or invalid parameters,
//! 2 unreadable or inconsistent data, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod font;
pub mod plots;
pub mod synth;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use coopsight::pipeline::ModelPreset;
use coopsight::select::SelectorKind;
use coopsight::Error;

use crate::config::{parse_resize, Overrides, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "coopsight",
    version,
    about = "Multi-color-space feature engineering and lightweight classifiers \
             for labeled image folders"
)]
pub struct Cli {
    /// Master seed; every randomized stage derives its own stream from it.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads, 0 for one per core. Env: COOPSIGHT_JOBS.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// TOML config file; command-line flags win over file values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory that default input/output paths resolve against.
    /// Env: COOPSIGHT_OUT_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Modeling knobs shared by every command that fits the pipeline.
#[derive(Args, Debug, Default)]
pub struct ModelingArgs {
    /// Comma-separated feature groups, e.g. LAB-CM,HSV-LBP,LAB-LBP.
    #[arg(long, value_delimiter = ',', value_name = "GROUPS")]
    pub groups: Option<Vec<String>>,

    /// Held-out fraction per class.
    #[arg(long, value_name = "F")]
    pub split_fraction: Option<f64>,

    /// Principal components kept after scaling.
    #[arg(long, value_name = "K")]
    pub pca_k: Option<usize>,

    /// Feature selector: kbest, lasso, forest, or gbdt.
    #[arg(long, value_name = "NAME")]
    pub selector: Option<String>,

    /// Columns the selector keeps.
    #[arg(long, value_name = "K")]
    pub select_k: Option<usize>,

    /// Classifier preset: mlp-final, mlp-screen, tree, forest, or svm.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
}

impl ModelingArgs {
    fn fold(&self, flags: &mut Overrides) -> coopsight::Result<()> {
        if let Some(groups) = &self.groups {
            flags.groups = Some(groups.clone());
        }
        if let Some(fraction) = self.split_fraction {
            flags.split_fraction = Some(fraction);
        }
        if let Some(k) = self.pca_k {
            flags.pca_k = Some(k);
        }
        if let Some(name) = &self.selector {
            flags.selector = Some(SelectorKind::parse(name)?);
        }
        if let Some(k) = self.select_k {
            flags.select_k = Some(k);
        }
        if let Some(name) = &self.preset {
            flags.preset = Some(ModelPreset::parse(name)?);
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a small procedural four-class image dataset.
    Synth {
        /// Output directory (default: <out-dir>/synth).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Images rendered per class.
        #[arg(long, default_value_t = 25, value_name = "N")]
        n_per_class: usize,
    },
    /// Scan class-per-subdirectory image roots into a manifest.
    Ingest {
        /// Dataset root(s); each immediate subdirectory is one class.
        #[arg(long = "root", value_name = "DIR", required = true)]
        roots: Vec<PathBuf>,
        /// Working resolution as WxH.
        #[arg(long, value_name = "WxH")]
        resize: Option<String>,
        /// Manifest path (default: <out-dir>/manifest.txt).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Extract the configured feature groups into a binary cache.
    Extract {
        /// Manifest from `ingest` (default: <out-dir>/manifest.txt).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Comma-separated feature groups to extract.
        #[arg(long, value_delimiter = ',', value_name = "GROUPS")]
        groups: Option<Vec<String>>,
        /// Cache path (default: <out-dir>/cache.bin).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score every extractor x color-space cell with a screening classifier.
    Screen {
        /// Manifest from `ingest` (default: <out-dir>/manifest.txt).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Component cap for the screening projection.
        #[arg(long, value_name = "K")]
        pca_cap: Option<usize>,
        /// Grid CSV path (default: <out-dir>/screen.csv).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Refit with each feature group knocked out and tabulate the drops.
    Ablate {
        /// Feature cache from `extract` (default: <out-dir>/cache.bin).
        #[arg(long, value_name = "FILE")]
        cache: Option<PathBuf>,
        #[command(flatten)]
        modeling: ModelingArgs,
        /// Ablation CSV path (default: <out-dir>/ablation.csv).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Fit scaler, projection, and selector; write the artifact container.
    Select {
        /// Feature cache from `extract` (default: <out-dir>/cache.bin).
        #[arg(long, value_name = "FILE")]
        cache: Option<PathBuf>,
        #[command(flatten)]
        modeling: ModelingArgs,
        /// Artifact path (default: <out-dir>/artifacts.bin).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Train a classifier on artifact-transformed features.
    Train {
        /// Feature cache from `extract` (default: <out-dir>/cache.bin).
        #[arg(long, value_name = "FILE")]
        cache: Option<PathBuf>,
        /// Artifacts from `select` (default: <out-dir>/artifacts.bin).
        #[arg(long, value_name = "FILE")]
        artifacts: Option<PathBuf>,
        /// Train this preset instead of the one recorded in the artifacts.
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
    },
    /// Evaluate a trained model on the held-out split.
    Evaluate {
        /// Feature cache from `extract` (default: <out-dir>/cache.bin).
        #[arg(long, value_name = "FILE")]
        cache: Option<PathBuf>,
        /// Artifacts from `select` (default: <out-dir>/artifacts.bin).
        #[arg(long, value_name = "FILE")]
        artifacts: Option<PathBuf>,
        /// Model from `train` (default: <out-dir>/model.bin).
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Run ingest, extract, select, train, and evaluate in one go.
    Pipeline {
        /// Dataset root(s); each immediate subdirectory is one class.
        #[arg(long = "root", value_name = "DIR", required = true)]
        roots: Vec<PathBuf>,
        /// Working resolution as WxH.
        #[arg(long, value_name = "WxH")]
        resize: Option<String>,
        #[command(flatten)]
        modeling: ModelingArgs,
    },
    /// Time each pipeline stage and record wall clock and peak memory.
    Benchmark {
        /// Manifest from `ingest` (default: <out-dir>/manifest.txt).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        modeling: ModelingArgs,
        /// Benchmark CSV path (default: <out-dir>/benchmark.csv).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// Fold command-specific flags into the override set so `Settings::resolve`
/// sees one uniform precedence chain.
fn fold_flags(command: &Command, flags: &mut Overrides) -> coopsight::Result<()> {
    match command {
        Command::Ingest { resize, .. } => {
            if let Some(spec) = resize {
                flags.resize = Some(parse_resize(spec)?);
            }
        }
        Command::Extract { groups, .. } => {
            if let Some(groups) = groups {
                flags.groups = Some(groups.clone());
            }
        }
        Command::Screen { pca_cap, .. } => {
            if let Some(cap) = pca_cap {
                flags.screen_pca_cap = Some(*cap);
            }
        }
        Command::Ablate { modeling, .. }
        | Command::Select { modeling, .. }
        | Command::Benchmark { modeling, .. } => modeling.fold(flags)?,
        Command::Pipeline { resize, modeling, .. } => {
            if let Some(spec) = resize {
                flags.resize = Some(parse_resize(spec)?);
            }
            modeling.fold(flags)?;
        }
        Command::Synth { .. } | Command::Train { .. } | Command::Evaluate { .. } => {}
    }
    Ok(())
}

/// Size the global worker pool. With 0 the default (one thread per core)
/// stands. Only the first call in a process can build the pool; later calls
/// find it already built, which is fine because outputs do not depend on
/// the worker count.
fn init_rayon(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

pub fn dispatch(cli: Cli) -> coopsight::Result<()> {
    let mut flags = Overrides {
        seed: cli.seed,
        jobs: cli.jobs,
        out_dir: cli.out_dir,
        ..Overrides::default()
    };
    fold_flags(&cli.command, &mut flags)?;
    let settings = Settings::resolve(cli.config.as_deref(), &flags)?;
    init_rayon(settings.jobs);

    let dir = settings.out_dir.clone();
    match cli.command {
        Command::Synth { out, n_per_class } => {
            let out = out.unwrap_or_else(|| dir.join("synth"));
            commands::cmd_synth(&settings, &out, n_per_class)
        }
        Command::Ingest { roots, out, .. } => {
            let out = out.unwrap_or_else(|| dir.join(commands::MANIFEST_FILE));
            commands::cmd_ingest(&settings, &roots, &out)
        }
        Command::Extract { manifest, out, .. } => {
            let manifest = manifest.unwrap_or_else(|| dir.join(commands::MANIFEST_FILE));
            let out = out.unwrap_or_else(|| dir.join(commands::CACHE_FILE));
            commands::cmd_extract(&settings, &manifest, &out)
        }
        Command::Screen { manifest, out, .. } => {
            let manifest = manifest.unwrap_or_else(|| dir.join(commands::MANIFEST_FILE));
            let out = out.unwrap_or_else(|| dir.join(commands::SCREEN_FILE));
            commands::cmd_screen(&settings, &manifest, &out)
        }
        Command::Ablate { cache, out, .. } => {
            let cache = cache.unwrap_or_else(|| dir.join(commands::CACHE_FILE));
            let out = out.unwrap_or_else(|| dir.join(commands::ABLATION_FILE));
            commands::cmd_ablate(&settings, &cache, &out)
        }
        Command::Select { cache, out, .. } => {
            let cache = cache.unwrap_or_else(|| dir.join(commands::CACHE_FILE));
            let out = out.unwrap_or_else(|| dir.join(commands::ARTIFACTS_FILE));
            commands::cmd_select(&settings, &cache, &out)
        }
        Command::Train { cache, artifacts, preset } => {
            let cache = cache.unwrap_or_else(|| dir.join(commands::CACHE_FILE));
            let artifacts = artifacts.unwrap_or_else(|| dir.join(commands::ARTIFACTS_FILE));
            let preset = preset.as_deref().map(ModelPreset::parse).transpose()?;
            commands::cmd_train(&cache, &artifacts, preset, &dir)
        }
        Command::Evaluate { cache, artifacts, model } => {
            let cache = cache.unwrap_or_else(|| dir.join(commands::CACHE_FILE));
            let artifacts = artifacts.unwrap_or_else(|| dir.join(commands::ARTIFACTS_FILE));
            let model = model.unwrap_or_else(|| dir.join(commands::MODEL_FILE));
            commands::cmd_evaluate(&cache, &artifacts, &model, &dir)
        }
        Command::Pipeline { roots, .. } => commands::cmd_pipeline(&settings, &roots, &dir),
        Command::Benchmark { manifest, out, .. } => {
            let manifest = manifest.unwrap_or_else(|| dir.join(commands::MANIFEST_FILE));
            let out = out.unwrap_or_else(|| dir.join(commands::BENCHMARK_FILE));
            commands::cmd_benchmark(&settings, &manifest, &out)
        }
    }
}

/// Map library errors onto the documented exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParam(_) | Error::UnknownGroup(_) => 1,
        Error::Io { .. }
        | Error::Decode { .. }
        | Error::EmptyDataset { .. }
        | Error::EmptyClass { .. }
        | Error::Mismatch(_)
        | Error::Format { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

/// Parse and run from an explicit argument list; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version surface as non-errors printing to
            // stdout; genuine usage mistakes print to stderr and exit 1.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
