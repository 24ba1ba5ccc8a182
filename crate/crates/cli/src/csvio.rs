//! CSV emitters for every tabular report the commands produce.
//!
//! All floats are written with six decimal places so reruns are
//! byte-identical and diffs stay readable. Schemas are documented in the
//! README; optional values (e.g. validation loss when no validation slice
//! existed) are written as empty fields.

use std::path::Path;

use coopsight::classify::EpochStats;
use coopsight::eval::{AblationRow, ClassReport, ConfusionMatrix, ScreenCell};
use coopsight::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn row(w: &mut csv::Writer<std::fs::File>, path: &Path, fields: &[&str]) -> Result<()> {
    w.write_record(fields).map_err(|e| Error::format(path, e.to_string()))
}

/// `setting,space,accuracy,precision,recall,f1` — one row per grid cell.
pub fn write_screen(path: &Path, cells: &[ScreenCell]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, &["setting", "space", "accuracy", "precision", "recall", "f1"])?;
    for c in cells {
        row(
            &mut w,
            path,
            &[&c.setting, &c.space, &f6(c.accuracy), &f6(c.precision), &f6(c.recall), &f6(c.f1)],
        )?;
    }
    finish(w, path)
}

/// `removed_group,accuracy,drop` — first row is the `none` baseline.
pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, &["removed_group", "accuracy", "drop"])?;
    for r in rows {
        row(&mut w, path, &[&r.removed_group, &f6(r.accuracy), &f6(r.drop)])?;
    }
    finish(w, path)
}

/// `epoch,train_loss,val_loss,val_accuracy` — one row per epoch run.
pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, &["epoch", "train_loss", "val_loss", "val_accuracy"])?;
    for h in history {
        let val_loss = h.val_loss.map(f6).unwrap_or_default();
        let val_acc = h.val_accuracy.map(f6).unwrap_or_default();
        row(&mut w, path, &[&h.epoch.to_string(), &f6(h.train_loss), &val_loss, &val_acc])?;
    }
    finish(w, path)
}

/// `label,precision,recall,f1,support`: one row per class, then `macro`
/// and `weighted` average rows, then an `accuracy` row carrying the
/// accuracy in the f1 column and the total in the support column.
pub fn write_report(path: &Path, report: &ClassReport, class_names: &[String]) -> Result<()> {
    if class_names.len() != report.per_class.len() {
        return Err(Error::Mismatch(format!(
            "{} class names for {} report rows",
            class_names.len(),
            report.per_class.len()
        )));
    }
    let mut w = writer(path)?;
    row(&mut w, path, &["label", "precision", "recall", "f1", "support"])?;
    let total: u64 = report.per_class.iter().map(|m| m.support).sum();
    for (name, m) in class_names.iter().zip(&report.per_class) {
        row(
            &mut w,
            path,
            &[name, &f6(m.precision), &f6(m.recall), &f6(m.f1), &m.support.to_string()],
        )?;
    }
    row(
        &mut w,
        path,
        &[
            "macro",
            &f6(report.macro_precision),
            &f6(report.macro_recall),
            &f6(report.macro_f1),
            &total.to_string(),
        ],
    )?;
    row(
        &mut w,
        path,
        &[
            "weighted",
            &f6(report.weighted_precision),
            &f6(report.weighted_recall),
            &f6(report.weighted_f1),
            &total.to_string(),
        ],
    )?;
    row(&mut w, path, &["accuracy", "", "", &f6(report.accuracy), &total.to_string()])?;
    finish(w, path)
}

/// Square count table: header `class,<predicted names...>`, one row per
/// true class.
pub fn write_confusion(path: &Path, cm: &ConfusionMatrix, class_names: &[String]) -> Result<()> {
    if class_names.len() != cm.n_classes() {
        return Err(Error::Mismatch(format!(
            "{} class names for a {}-class confusion matrix",
            class_names.len(),
            cm.n_classes()
        )));
    }
    let mut w = writer(path)?;
    let mut header = vec!["class".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::format(path, e.to_string()))?;
    for (t, name) in class_names.iter().enumerate() {
        let mut fields = vec![name.clone()];
        fields.extend((0..cm.n_classes()).map(|p| cm.count(t, p).to_string()));
        w.write_record(&fields).map_err(|e| Error::format(path, e.to_string()))?;
    }
    finish(w, path)
}

/// One timed pipeline stage. `peak_rss_kb` is the process high-water mark
/// at the end of the stage (cumulative by nature), 0 where unavailable.
pub struct StageStat {
    pub stage: String,
    pub wall_ms: u128,
    pub peak_rss_kb: u64,
}

/// `stage,wall_ms,peak_rss_kb` — one row per stage in execution order.
pub fn write_benchmark(path: &Path, stats: &[StageStat]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, &["stage", "wall_ms", "peak_rss_kb"])?;
    for s in stats {
        row(&mut w, path, &[&s.stage, &s.wall_ms.to_string(), &s.peak_rss_kb.to_string()])?;
    }
    finish(w, path)
}
