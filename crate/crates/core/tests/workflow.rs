//! Library-level workflow test: images on disk through scan, extraction,
//! artifact fitting, training, and evaluation, using only the public API,
//! with every container surviving a save/load round trip intact.

use std::fs;
use std::path::{Path, PathBuf};

use coopsight::dataset::{scan_dataset, split_indices_by_label, Manifest};
use coopsight::features::{FeatureGroup, FeatureParams};
use coopsight::featstore::{extract_matrix, FeatureMatrix};
use coopsight::pipeline::{
    evaluate_rows, fit_artifacts, run_pipeline, train_model, ModelPreset, PipelineArtifacts,
    PipelineConfig,
};
use coopsight::classify::Model;
use coopsight::rng::seeded_rng;
use coopsight::select::SelectorKind;
use rand::Rng;

/// Two visually distinct classes: dark speckle and bright speckle, eight
/// images each, 24×24. Enough signal that even a small tree separates them.
fn write_dataset(root: &Path) -> usize {
    let mut count = 0;
    for (class, base) in [("dim", 40u8), ("bright", 190u8)] {
        let dir = root.join(class);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..8 {
            let mut rng = seeded_rng(7, &format!("workflow-{class}-{i}"));
            let img = image::RgbImage::from_fn(24, 24, |_, _| {
                let jitter: i16 = rng.random_range(-30..=30);
                let v = (base as i16 + jitter).clamp(0, 255) as u8;
                image::Rgb([v, v.saturating_add(10), v.saturating_sub(10)])
            });
            img.save(dir.join(format!("{i:02}.png"))).unwrap();
            count += 1;
        }
    }
    count
}

#[test]
fn end_to_end_workflow_with_container_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let n_images = write_dataset(dir.path());

    // Scan. The manifest must survive its text format unchanged.
    let manifest = scan_dataset(&[dir.path().to_path_buf()], (24, 24)).unwrap();
    assert_eq!(manifest.records().len(), n_images);
    let manifest_path = dir.path().join("manifest.txt");
    manifest.save(&manifest_path).unwrap();
    let reloaded = Manifest::load(&manifest_path).unwrap();
    assert_eq!(manifest, reloaded);
    assert_eq!(manifest.fingerprint(), reloaded.fingerprint());

    // Extract three cheap groups across all three color spaces.
    let groups: Vec<FeatureGroup> = ["RGB-CH", "HSV-CM", "LAB-GLCM"]
        .iter()
        .map(|g| FeatureGroup::parse(g).unwrap())
        .collect();
    let matrix = extract_matrix(&manifest, &groups, &FeatureParams::default()).unwrap();
    assert_eq!(matrix.n_rows(), n_images);
    let cache_path = dir.path().join("cache.bin");
    matrix.save(&cache_path).unwrap();
    assert_eq!(matrix, FeatureMatrix::load(&cache_path).unwrap());

    // Fit preprocessing and train a tree on the train split only.
    let config = PipelineConfig {
        seed: 11,
        groups: vec![],
        split_fraction: 0.25,
        pca_k: 8,
        selector: SelectorKind::KBest,
        select_k: 6,
        preset: ModelPreset::Tree,
    };
    let split = split_indices_by_label(matrix.labels(), config.split_fraction, config.seed).unwrap();
    let artifacts = fit_artifacts(&matrix, &split, &config).unwrap();
    let artifacts_path = dir.path().join("artifacts.bin");
    artifacts.save(&artifacts_path).unwrap();
    assert_eq!(artifacts, PipelineArtifacts::load(&artifacts_path).unwrap());

    let model = train_model(&matrix, &split, &artifacts, config.preset).unwrap();
    let model_path = dir.path().join("model.bin");
    model.save(&model_path).unwrap();
    let model_reloaded = Model::load(&model_path).unwrap();
    assert_eq!(model, model_reloaded);

    // The reloaded model must score identically to the in-memory one, and
    // two classes this far apart should separate perfectly.
    let (confusion, report) = evaluate_rows(&matrix, &split.test, &artifacts, &model).unwrap();
    let (confusion2, _) = evaluate_rows(&matrix, &split.test, &artifacts, &model_reloaded).unwrap();
    assert_eq!(confusion, confusion2);
    assert_eq!(confusion.total() as usize, split.test.len());
    assert_eq!(confusion.accuracy(), 1.0, "dim vs bright should separate cleanly");
    assert_eq!(report.accuracy, confusion.accuracy());

    // The one-call entry point reproduces the staged result exactly when
    // given the same config, and is itself deterministic call over call.
    let run_a = run_pipeline(&matrix, &config).unwrap();
    let run_b = run_pipeline(&matrix, &config).unwrap();
    assert_eq!(run_a.split, run_b.split);
    assert_eq!(run_a.confusion, run_b.confusion);
    assert_eq!(run_a.split.test, split.test);
    assert_eq!(run_a.confusion, confusion);
}

#[test]
fn scan_rejects_unreadable_roots() {
    let missing = PathBuf::from("/nonexistent/dataset/root");
    assert!(scan_dataset(&[missing], (24, 24)).is_err());
}
