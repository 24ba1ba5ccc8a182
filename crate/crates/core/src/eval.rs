//! Evaluation: confusion matrix, classification report, the leave-one-out
//! group ablation driver, and the feature × color-space screening grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{MlpConfig, MlpModel};
use crate::dataset::{split_indices_by_label, Manifest};
use crate::error::{Error, Result};
use crate::features::{Extractor, FeatureGroup, FeatureParams, Space};
use crate::featstore::{canonical_groups, extract_matrix, FeatureMatrix};
use crate::pipeline::{evaluate_rows, fit_artifacts, train_model, PipelineConfig};
use crate::preprocess::{PcaModel, ScalerParams};
use crate::rng::derive_seed;

/// C×C prediction counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

/// Tally predictions against truth.
pub fn confusion(true_labels: &[u32], predicted: &[u32], n_classes: usize) -> Result<ConfusionMatrix> {
    if true_labels.is_empty() || true_labels.len() != predicted.len() {
        return Err(Error::Mismatch(format!(
            "{} true labels vs {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::InvalidParam("confusion matrix needs at least one class".into()));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t as usize >= n_classes || p as usize >= n_classes {
            return Err(Error::Mismatch(format!(
                "label pair ({t}, {p}) exceeds {n_classes} classes"
            )));
        }
        counts[t as usize * n_classes + p as usize] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Count of true class `t` predicted as `p`.
    pub fn count(&self, t: usize, p: usize) -> u64 {
        self.counts[t * self.n_classes + p]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Build directly from row-major counts (for hand-specified tables).
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<ConfusionMatrix> {
        if n_classes == 0 || counts.len() != n_classes * n_classes {
            return Err(Error::Mismatch(format!(
                "{} counts do not form a {n_classes}×{n_classes} matrix",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Per-true-class totals (supports).
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n_classes)
            .map(|t| (0..self.n_classes).map(|p| self.count(t, p)).sum())
            .collect()
    }

    /// Per-predicted-class totals.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes)
            .map(|p| (0..self.n_classes).map(|t| self.count(t, p)).sum())
            .collect()
    }

    /// Trace over total — exactly the fraction of correct predictions.
    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.n_classes).map(|c| self.count(c, c)).sum();
        correct as f64 / self.total() as f64
    }
}

/// One class's row of the classification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class and averaged metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

/// Precision = diagonal over column sum, recall = diagonal over row sum
/// (both 0 when the denominator is 0), F1 their harmonic mean. Macro
/// averages are unweighted; weighted averages use class support.
pub fn classification_report(cm: &ConfusionMatrix) -> ClassReport {
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let total = cm.total();
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| {
            let diag = cm.count(c, c) as f64;
            let precision = if cols[c] > 0 { diag / cols[c] as f64 } else { 0.0 };
            let recall = if rows[c] > 0 { diag / rows[c] as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1, support: rows[c] }
        })
        .collect();
    let n = per_class.len() as f64;
    let weight = |m: &ClassMetrics| m.support as f64 / total as f64;
    ClassReport {
        accuracy: cm.accuracy(),
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / n,
        weighted_precision: per_class.iter().map(|m| m.precision * weight(m)).sum(),
        weighted_recall: per_class.iter().map(|m| m.recall * weight(m)).sum(),
        weighted_f1: per_class.iter().map(|m| m.f1 * weight(m)).sum(),
        per_class,
    }
}

// ---- Leave-one-out group ablation -----------------------------------------

/// One ablation table row. `drop` is baseline accuracy minus this row's
/// accuracy, so a NEGATIVE drop means removing the group helped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Group knocked out for this row; `"none"` marks the baseline.
    pub removed_group: String,
    pub accuracy: f64,
    pub drop: f64,
}

/// Assemble the table: the baseline row carries drop exactly 0.
fn ablation_rows(baseline: f64, per_group: Vec<(String, f64)>) -> Vec<AblationRow> {
    let mut rows = vec![AblationRow { removed_group: "none".into(), accuracy: baseline, drop: 0.0 }];
    rows.extend(per_group.into_iter().map(|(removed_group, accuracy)| AblationRow {
        removed_group,
        accuracy,
        drop: baseline - accuracy,
    }));
    rows
}

/// Leave-one-out ablation: fit the full pipeline on all groups for the
/// baseline, then once per listed group with that group removed. Every run
/// shares one stratified split and seed, so rows are comparable and the
/// baseline equals an independent train+evaluate run with the same config.
pub fn ablate_groups(
    matrix: &FeatureMatrix,
    groups: &[String],
    config: &PipelineConfig,
) -> Result<Vec<AblationRow>> {
    let working;
    let matrix = if config.groups.is_empty() {
        matrix
    } else {
        working = matrix.restrict_groups(&config.groups)?;
        &working
    };
    let schema_names = matrix.schema().group_names();
    if schema_names.len() < 2 {
        return Err(Error::InvalidParam(
            "ablation needs at least two feature groups to compare".into(),
        ));
    }
    if let Some(unknown) = groups.iter().find(|g| !schema_names.contains(g)) {
        return Err(Error::UnknownGroup(format!(
            "cannot ablate {unknown:?}: not in the feature matrix"
        )));
    }
    let fit_config = PipelineConfig { groups: Vec::new(), ..config.clone() };
    let split = split_indices_by_label(matrix.labels(), config.split_fraction, config.seed)?;

    let accuracy_of = |m: &FeatureMatrix| -> Result<f64> {
        let artifacts = fit_artifacts(m, &split, &fit_config)?;
        let model = train_model(m, &split, &artifacts, fit_config.preset)?;
        let (cm, _) = evaluate_rows(m, &split.test, &artifacts, &model)?;
        Ok(cm.accuracy())
    };
    let baseline = accuracy_of(matrix)?;
    // Each knockout is an independent job; results land in input order.
    let per_group: Vec<(String, f64)> = groups
        .par_iter()
        .map(|name| Ok((name.clone(), accuracy_of(&matrix.drop_group(name)?)?)))
        .collect::<Result<_>>()?;
    Ok(ablation_rows(baseline, per_group))
}

// ---- Feature × color-space screening grid ----------------------------------

/// A named bundle of extractors screened together, e.g. `"LBP+FT+WT"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSetting {
    pub name: String,
    pub extractors: Vec<Extractor>,
}

impl ScreenSetting {
    /// Bundle extractors under their joined canonical names.
    pub fn new(extractors: Vec<Extractor>) -> Self {
        let name = extractors.iter().map(|e| e.name()).collect::<Vec<_>>().join("+");
        ScreenSetting { name, extractors }
    }
}

/// Which color space a screening cell draws channels from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceChoice {
    Single(Space),
    /// Concatenate the RGB, HSV, and LAB variants of every extractor.
    All,
}

impl SpaceChoice {
    pub const ALL: [SpaceChoice; 4] = [
        SpaceChoice::Single(Space::Rgb),
        SpaceChoice::Single(Space::Hsv),
        SpaceChoice::Single(Space::Lab),
        SpaceChoice::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceChoice::Single(s) => s.name(),
            SpaceChoice::All => "ALL",
        }
    }

    pub fn parse(s: &str) -> Result<SpaceChoice> {
        if s.eq_ignore_ascii_case("all") {
            Ok(SpaceChoice::All)
        } else {
            Ok(SpaceChoice::Single(Space::parse(s)?))
        }
    }

    pub fn spaces(self) -> Vec<Space> {
        match self {
            SpaceChoice::Single(s) => vec![s],
            SpaceChoice::All => Space::ALL.to_vec(),
        }
    }
}

/// One screening cell's metrics. Precision/recall/F1 are support-weighted,
/// the same convention as the classification report's summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenCell {
    pub setting: String,
    pub space: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Knobs for the screening pass: a fixed single split and a cheap
/// perceptron, trading rigor for grid throughput.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub split_fraction: f64,
    /// Component cap; the effective count is min(cap, width, train rows − 1).
    pub pca_cap: usize,
    pub mlp: MlpConfig,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig { split_fraction: 0.2, pca_cap: 300, mlp: MlpConfig::screening() }
    }
}

/// The default screening settings: every extractor alone, then the
/// combination rows (color suites, texture suites, and the edge trio).
pub fn default_screen_settings() -> Vec<ScreenSetting> {
    let mut settings: Vec<ScreenSetting> =
        Extractor::ALL.iter().map(|&e| ScreenSetting::new(vec![e])).collect();
    settings.push(ScreenSetting::new(vec![Extractor::Ch, Extractor::Lch]));
    settings.push(ScreenSetting::new(vec![
        Extractor::Ch,
        Extractor::Cm2,
        Extractor::Lch,
        Extractor::Ccm,
    ]));
    settings.push(ScreenSetting::new(vec![Extractor::Lbp, Extractor::Fft]));
    settings.push(ScreenSetting::new(vec![Extractor::Lbp, Extractor::Wavelet]));
    settings.push(ScreenSetting::new(vec![Extractor::Fft, Extractor::Wavelet]));
    settings.push(ScreenSetting::new(vec![Extractor::Lbp, Extractor::Fft, Extractor::Wavelet]));
    settings.push(ScreenSetting::new(vec![
        Extractor::Sobel,
        Extractor::Prewitt,
        Extractor::Canny,
    ]));
    settings
}

/// The full default grid: every setting crossed with RGB, HSV, LAB, ALL.
pub fn default_screen_grid() -> Vec<(ScreenSetting, SpaceChoice)> {
    let mut cells = Vec::new();
    for setting in default_screen_settings() {
        for space in SpaceChoice::ALL {
            cells.push((setting.clone(), space));
        }
    }
    cells
}

fn cell_groups(setting: &ScreenSetting, space: SpaceChoice) -> Vec<FeatureGroup> {
    let mut groups = Vec::new();
    for s in space.spaces() {
        for &e in &setting.extractors {
            groups.push(FeatureGroup::new(s, e));
        }
    }
    canonical_groups(&groups)
}

/// Run the screening grid: extract the union of required groups once, then
/// evaluate each cell as scale → project → screening perceptron on one
/// shared stratified split. Cells are independent jobs; output order
/// follows input order regardless of worker count.
pub fn screen_grid(
    manifest: &Manifest,
    cells: &[(ScreenSetting, SpaceChoice)],
    params: &FeatureParams,
    config: &ScreenConfig,
    seed: u64,
) -> Result<Vec<ScreenCell>> {
    if cells.is_empty() {
        return Err(Error::InvalidParam("screening grid has no cells".into()));
    }
    let union: Vec<FeatureGroup> = canonical_groups(
        &cells
            .iter()
            .flat_map(|(setting, space)| cell_groups(setting, *space))
            .collect::<Vec<_>>(),
    );
    let matrix = extract_matrix(manifest, &union, params)?;
    let split = split_indices_by_label(matrix.labels(), config.split_fraction, seed)?;
    let n_classes = matrix.class_names().len();

    cells
        .par_iter()
        .map(|(setting, space)| {
            let names: Vec<String> =
                cell_groups(setting, *space).iter().map(|g| g.name()).collect();
            let sub = matrix.restrict_groups(&names)?;
            let x_train: Vec<Vec<f64>> = split
                .train
                .iter()
                .map(|&i| sub.row(i).iter().map(|&v| v as f64).collect())
                .collect();
            let y_train: Vec<u32> = split.train.iter().map(|&i| sub.labels()[i]).collect();
            let scaler = ScalerParams::fit(&x_train)?;
            let scaled = scaler.transform(&x_train)?;
            let k = config
                .pca_cap
                .min(PcaModel::max_components(scaled.len(), scaler.width()));
            let pca = PcaModel::fit(&scaled, k)?;
            let projected = pca.project(&scaled)?;
            let cell_seed =
                derive_seed(seed, &format!("screen-{}-{}", setting.name, space.name()));
            let model = MlpModel::fit(&projected, &y_train, n_classes, config.mlp.clone(), cell_seed)?;

            let x_test: Vec<Vec<f64>> = split
                .test
                .iter()
                .map(|&i| sub.row(i).iter().map(|&v| v as f64).collect())
                .collect();
            let y_test: Vec<u32> = split.test.iter().map(|&i| sub.labels()[i]).collect();
            let z_test = pca.project(&scaler.transform(&x_test)?)?;
            let y_pred = model.predict(&z_test)?;
            let report = classification_report(&confusion(&y_test, &y_pred, n_classes)?);
            Ok(ScreenCell {
                setting: setting.name.clone(),
                space: space.name().to_string(),
                accuracy: report.accuracy,
                precision: report.weighted_precision,
                recall: report.weighted_recall,
                f1: report.weighted_f1,
            })
        })
        .collect()
}
