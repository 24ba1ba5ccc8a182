//! Command implementations. The `pipeline` command is literally the other
//! commands called in sequence with the same settings, which is what makes
//! its outputs byte-identical to running the stages by hand.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use coopsight::classify::Model;
use coopsight::dataset::{scan_dataset, split_indices_by_label, Manifest};
use coopsight::eval::{ablate_groups, default_screen_grid, screen_grid};
use coopsight::featstore::{extract_matrix, FeatureMatrix};
use coopsight::pipeline::{
    evaluate_rows, fit_artifacts, train_model, ModelPreset, PipelineArtifacts,
};
use coopsight::{Error, Result};

use crate::config::Settings;
use crate::csvio::{self, StageStat};
use crate::plots;
use crate::synth;

// Default file names, shared by the staged commands and `pipeline`.
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CACHE_FILE: &str = "cache.bin";
pub const ARTIFACTS_FILE: &str = "artifacts.bin";
pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const CURVES_FILE: &str = "training_curves.png";
pub const REPORT_FILE: &str = "report.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const CONFUSION_PNG: &str = "confusion.png";
pub const SCREEN_FILE: &str = "screen.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
/// Append-only run log. The only place a timestamp is ever written, so
/// every other output stays byte-identical across reruns.
pub const SIDECAR_LOG: &str = "coopsight.log";

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

/// Append a timestamped line to the sidecar log next to `target`.
/// Best-effort by design: the log is advisory, and failing a successful
/// command over it would be worse than missing a line.
fn sidecar_note(target: &Path, command: &str) {
    let dir = if target.is_dir() { target } else { target.parent().unwrap_or(Path::new(".")) };
    let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(SIDECAR_LOG))
        .and_then(|mut f| writeln!(f, "{secs}\t{command}"));
}

/// Reject artifact/cache pairs that were not produced from the same
/// manifest and extraction parameters.
fn check_binding(matrix: &FeatureMatrix, artifacts: &PipelineArtifacts) -> Result<()> {
    if matrix.manifest_fingerprint() != artifacts.manifest_fingerprint
        || matrix.params_fingerprint() != artifacts.params_fingerprint
    {
        return Err(Error::Mismatch(
            "artifacts were fitted on a different cache (fingerprints differ)".into(),
        ));
    }
    if matrix.class_names() != artifacts.class_names.as_slice() {
        return Err(Error::Mismatch("artifacts and cache disagree on class names".into()));
    }
    Ok(())
}

/// Restrict to the artifact snapshot's groups and rebuild its split.
fn working_view(
    matrix: &FeatureMatrix,
    artifacts: &PipelineArtifacts,
) -> Result<(FeatureMatrix, coopsight::dataset::DataSplit)> {
    let config = &artifacts.config;
    let working = if config.groups.is_empty() {
        matrix.clone()
    } else {
        matrix.restrict_groups(&config.groups)?
    };
    let split = split_indices_by_label(working.labels(), config.split_fraction, config.seed)?;
    Ok((working, split))
}

pub fn cmd_synth(settings: &Settings, out: &Path, n_per_class: usize) -> Result<()> {
    let n = synth::generate(out, n_per_class, settings.seed)?;
    println!(
        "synth: wrote {n} images ({} per class) under {}",
        n_per_class,
        out.display()
    );
    sidecar_note(out, "synth");
    Ok(())
}

pub fn cmd_ingest(settings: &Settings, roots: &[std::path::PathBuf], out: &Path) -> Result<()> {
    let manifest = scan_dataset(roots, settings.resize)?;
    for warning in manifest.warnings() {
        eprintln!("warning: {warning}");
    }
    ensure_parent(out)?;
    manifest.save(out)?;
    let counts = manifest.class_counts();
    let summary: Vec<String> = manifest
        .classes()
        .iter()
        .zip(&counts)
        .map(|(name, n)| format!("{name}={n}"))
        .collect();
    println!(
        "ingest: {} records, {} classes ({}) -> {}",
        manifest.len(),
        manifest.classes().len(),
        summary.join(", "),
        out.display()
    );
    sidecar_note(out, "ingest");
    Ok(())
}

pub fn cmd_extract(settings: &Settings, manifest_path: &Path, out: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let groups = settings.feature_groups()?;
    let matrix = extract_matrix(&manifest, &groups, &settings.params)?;
    ensure_parent(out)?;
    matrix.save(out)?;
    println!(
        "extract: {} rows x {} columns across {} groups -> {}",
        matrix.n_rows(),
        matrix.n_cols(),
        matrix.schema().spans().len(),
        out.display()
    );
    sidecar_note(out, "extract");
    Ok(())
}

pub fn cmd_screen(settings: &Settings, manifest_path: &Path, out: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let cells = default_screen_grid();
    let results = screen_grid(
        &manifest,
        &cells,
        &settings.params,
        &settings.screen_config(),
        settings.seed,
    )?;
    ensure_parent(out)?;
    csvio::write_screen(out, &results)?;
    let best = results
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1))
        .expect("grid is nonempty");
    println!(
        "screen: {} cells -> {} (best f1 {:.4}: {} on {})",
        results.len(),
        out.display(),
        best.f1,
        best.setting,
        best.space
    );
    sidecar_note(out, "screen");
    Ok(())
}

pub fn cmd_ablate(settings: &Settings, cache: &Path, out: &Path) -> Result<()> {
    let matrix = FeatureMatrix::load(cache)?;
    let config = settings.pipeline_config();
    // Knock out each configured group; with no group restriction, every
    // group in the cache takes a turn.
    let knockouts = if config.groups.is_empty() {
        matrix.schema().group_names()
    } else {
        config.groups.clone()
    };
    let rows = ablate_groups(&matrix, &knockouts, &config)?;
    ensure_parent(out)?;
    csvio::write_ablation(out, &rows)?;
    println!(
        "ablate: baseline accuracy {:.4}, {} knockouts -> {}",
        rows[0].accuracy,
        rows.len() - 1,
        out.display()
    );
    sidecar_note(out, "ablate");
    Ok(())
}

pub fn cmd_select(settings: &Settings, cache: &Path, out: &Path) -> Result<()> {
    let matrix = FeatureMatrix::load(cache)?;
    let config = settings.pipeline_config();
    let working = if config.groups.is_empty() {
        matrix
    } else {
        matrix.restrict_groups(&config.groups)?
    };
    let split = split_indices_by_label(working.labels(), config.split_fraction, config.seed)?;
    let artifacts = fit_artifacts(&working, &split, &config)?;
    ensure_parent(out)?;
    artifacts.save(out)?;
    println!(
        "select: {} of {} projected columns kept by {} -> {}",
        artifacts.selector.selected.len(),
        artifacts.selector.importances.len(),
        artifacts.selector.method.name(),
        out.display()
    );
    sidecar_note(out, "select");
    Ok(())
}

pub fn cmd_train(
    cache: &Path,
    artifacts_path: &Path,
    preset_override: Option<ModelPreset>,
    out_dir: &Path,
) -> Result<()> {
    let matrix = FeatureMatrix::load(cache)?;
    let mut artifacts = PipelineArtifacts::load(artifacts_path)?;
    check_binding(&matrix, &artifacts)?;
    let (working, split) = working_view(&matrix, &artifacts)?;
    let preset = preset_override.unwrap_or(artifacts.config.preset);
    let model = train_model(&working, &split, &artifacts, preset)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let model_path = out_dir.join(MODEL_FILE);
    model.save(&model_path)?;
    if let Model::Mlp(mlp) = &model {
        csvio::write_history(&out_dir.join(HISTORY_FILE), &mlp.history)?;
        plots::training_curves(&mlp.history, &out_dir.join(CURVES_FILE))?;
        println!(
            "train: {} for {} epochs (best val loss {}) -> {}",
            preset.name(),
            mlp.epochs_run,
            mlp.best_val_loss.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
            model_path.display()
        );
    } else {
        println!("train: {} -> {}", preset.name(), model_path.display());
    }
    // Link the artifact snapshot to its model so downstream consumers can
    // find the pair; this also makes the staged commands end in exactly
    // the artifact bytes `pipeline` writes.
    artifacts.model_ref = Some(MODEL_FILE.to_string());
    artifacts.save(artifacts_path)?;
    sidecar_note(out_dir, "train");
    Ok(())
}

pub fn cmd_evaluate(
    cache: &Path,
    artifacts_path: &Path,
    model_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    let matrix = FeatureMatrix::load(cache)?;
    let artifacts = PipelineArtifacts::load(artifacts_path)?;
    check_binding(&matrix, &artifacts)?;
    let model = Model::load(model_path)?;
    let (working, split) = working_view(&matrix, &artifacts)?;
    let (cm, report) = evaluate_rows(&working, &split.test, &artifacts, &model)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    csvio::write_report(&out_dir.join(REPORT_FILE), &report, working.class_names())?;
    csvio::write_confusion(&out_dir.join(CONFUSION_CSV), &cm, working.class_names())?;
    plots::confusion_heatmap(&cm, working.class_names(), &out_dir.join(CONFUSION_PNG))?;
    println!(
        "evaluate: accuracy {:.4}, weighted f1 {:.4} on {} held-out rows -> {}",
        report.accuracy,
        report.weighted_f1,
        split.test.len(),
        out_dir.display()
    );
    sidecar_note(out_dir, "evaluate");
    Ok(())
}

/// The end-to-end command: each stage is the staged command itself, so the
/// files this writes are byte-for-byte what the staged sequence writes.
pub fn cmd_pipeline(settings: &Settings, roots: &[std::path::PathBuf], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let cache_path = out_dir.join(CACHE_FILE);
    let artifacts_path = out_dir.join(ARTIFACTS_FILE);
    cmd_ingest(settings, roots, &manifest_path)?;
    cmd_extract(settings, &manifest_path, &cache_path)?;
    cmd_select(settings, &cache_path, &artifacts_path)?;
    cmd_train(&cache_path, &artifacts_path, None, out_dir)?;
    cmd_evaluate(&cache_path, &artifacts_path, &out_dir.join(MODEL_FILE), out_dir)
}

/// Linux reports the process's peak resident set in /proc; elsewhere (or
/// if the file is unreadable) this reports 0.
fn vm_hwm_kb() -> u64 {
    fs::read_to_string("/proc/self/status")
        .ok()
        .and_then(|status| {
            status.lines().find_map(|line| {
                line.strip_prefix("VmHWM:")
                    .and_then(|rest| rest.split_whitespace().next())
                    .and_then(|kb| kb.parse().ok())
            })
        })
        .unwrap_or(0)
}

pub fn cmd_benchmark(settings: &Settings, manifest_path: &Path, out: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let config = settings.pipeline_config();
    let groups = settings.feature_groups()?;
    let mut stats: Vec<StageStat> = Vec::new();
    let timed = |stage: &str, stats: &mut Vec<StageStat>, wall: std::time::Duration| {
        stats.push(StageStat {
            stage: stage.to_string(),
            wall_ms: wall.as_millis(),
            peak_rss_kb: vm_hwm_kb(),
        });
    };

    let start = Instant::now();
    let t = Instant::now();
    let matrix = extract_matrix(&manifest, &groups, &settings.params)?;
    timed("extract", &mut stats, t.elapsed());

    let t = Instant::now();
    let split = split_indices_by_label(matrix.labels(), config.split_fraction, config.seed)?;
    let artifacts = fit_artifacts(&matrix, &split, &config)?;
    timed("select", &mut stats, t.elapsed());

    let t = Instant::now();
    let model = train_model(&matrix, &split, &artifacts, config.preset)?;
    timed("train", &mut stats, t.elapsed());

    let t = Instant::now();
    let (_, report) = evaluate_rows(&matrix, &split.test, &artifacts, &model)?;
    timed("evaluate", &mut stats, t.elapsed());
    timed("total", &mut stats, start.elapsed());

    ensure_parent(out)?;
    csvio::write_benchmark(out, &stats)?;
    for s in &stats {
        println!("benchmark: {:<9} {:>8} ms  peak rss {:>8} kB", s.stage, s.wall_ms, s.peak_rss_kb);
    }
    println!("benchmark: accuracy {:.4} -> {}", report.accuracy, out.display());
    sidecar_note(out, "benchmark");
    Ok(())
}
