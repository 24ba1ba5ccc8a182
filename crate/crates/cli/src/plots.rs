//! Self-contained PNG plots: a confusion-matrix heatmap and training
//! curves. Everything is rendered with the embedded bitmap font so output
//! bytes depend only on the plotted data, never on installed fonts or
//! library versions.

use std::path::Path;

use image::{Rgb, RgbImage};

use coopsight::classify::EpochStats;
use coopsight::eval::ConfusionMatrix;
use coopsight::{Error, Result};

use crate::font::{draw_text, text_width, GLYPH_H};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([20, 20, 20]);
const GRID: Rgb<u8> = Rgb([190, 190, 190]);
const TRAIN_LOSS: Rgb<u8> = Rgb([31, 119, 180]);
const VAL_LOSS: Rgb<u8> = Rgb([255, 127, 14]);
const VAL_ACC: Rgb<u8> = Rgb([44, 160, 44]);

fn fill_rect(img: &mut RgbImage, x0: u32, y0: u32, w: u32, h: u32, color: Rgb<u8>) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put_pixel(x, y, color);
        }
    }
}

fn draw_hline(img: &mut RgbImage, x0: u32, x1: u32, y: u32, color: Rgb<u8>) {
    if y < img.height() {
        for x in x0..=x1.min(img.width().saturating_sub(1)) {
            img.put_pixel(x, y, color);
        }
    }
}

fn draw_vline(img: &mut RgbImage, x: u32, y0: u32, y1: u32, color: Rgb<u8>) {
    if x < img.width() {
        for y in y0..=y1.min(img.height().saturating_sub(1)) {
            img.put_pixel(x, y, color);
        }
    }
}

/// Bresenham segment; endpoints may lie outside the canvas.
fn draw_line(img: &mut RgbImage, x0: i32, y0: i32, x1: i32, y1: i32, color: Rgb<u8>) {
    let (mut x, mut y) = (x0, y0);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn draw_marker(img: &mut RgbImage, x: i32, y: i32, color: Rgb<u8>) {
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (px, py) = (x + dx, y + dy);
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, color);
            }
        }
    }
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::format(path, format!("could not write plot: {e}")))
}

fn truncate(name: &str, max: usize) -> String {
    if name.chars().count() <= max {
        name.to_string()
    } else {
        name.chars().take(max).collect()
    }
}

/// Heatmap of a confusion matrix: rows are true classes, columns
/// predictions, cell shade proportional to count, count printed per cell.
pub fn confusion_heatmap(cm: &ConfusionMatrix, class_names: &[String], path: &Path) -> Result<()> {
    if class_names.len() != cm.n_classes() {
        return Err(Error::Mismatch(format!(
            "{} class names for a {}-class confusion matrix",
            class_names.len(),
            cm.n_classes()
        )));
    }
    let n = cm.n_classes() as u32;
    let cell: u32 = 64;
    let labels: Vec<String> = class_names.iter().map(|s| truncate(s, 10)).collect();
    let left = labels.iter().map(|l| text_width(l, 1)).max().unwrap_or(0) + 16;
    let top = 40;
    let width = left + n * cell + 16;
    let height = top + n * cell + 16;
    let mut img = RgbImage::from_pixel(width, height, BG);

    draw_text(&mut img, 8, 6, "CONFUSION MATRIX (ROWS TRUE / COLS PREDICTED)", 1, INK);
    let max = cm.counts().iter().copied().max().unwrap_or(0).max(1) as f64;

    for t in 0..n {
        // Row label, right-aligned against the grid.
        let label = &labels[t as usize];
        let lw = text_width(label, 1);
        draw_text(
            &mut img,
            (left - 8 - lw) as i32,
            (top + t * cell + cell / 2 - GLYPH_H / 2) as i32,
            label,
            1,
            INK,
        );
        for p in 0..n {
            let count = cm.count(t as usize, p as usize);
            let frac = count as f64 / max;
            // White → deep blue ramp.
            let lerp = |a: f64, b: f64| (a + (b - a) * frac).round() as u8;
            let shade = Rgb([lerp(255.0, 33.0), lerp(255.0, 80.0), lerp(255.0, 162.0)]);
            let (x0, y0) = (left + p * cell, top + t * cell);
            fill_rect(&mut img, x0, y0, cell, cell, shade);
            let text = count.to_string();
            let ink = if frac > 0.5 { BG } else { INK };
            draw_text(
                &mut img,
                (x0 + cell / 2) as i32 - (text_width(&text, 2) / 2) as i32,
                (y0 + cell / 2) as i32 - GLYPH_H as i32,
                &text,
                2,
                ink,
            );
        }
    }
    // Column labels under the title, one per predicted class.
    for p in 0..n {
        let label = &labels[p as usize];
        draw_text(
            &mut img,
            (left + p * cell + 4) as i32,
            (top - GLYPH_H - 6) as i32,
            label,
            1,
            INK,
        );
    }
    // Grid lines on top of the shading.
    for i in 0..=n {
        draw_hline(&mut img, left, left + n * cell, top + i * cell, GRID);
        draw_vline(&mut img, left + i * cell, top, top + n * cell, GRID);
    }
    save(&img, path)
}

/// One panel of the training-curves figure.
struct Panel {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn project(&self, epoch_frac: f64, value: f64) -> (i32, i32) {
        let x = self.x0 as f64 + epoch_frac * self.w as f64;
        let t = ((value - self.y_min) / (self.y_max - self.y_min)).clamp(0.0, 1.0);
        let y = self.y0 as f64 + (1.0 - t) * self.h as f64;
        (x.round() as i32, y.round() as i32)
    }

    fn frame(&self, img: &mut RgbImage, n_epochs: usize) {
        draw_hline(img, self.x0, self.x0 + self.w, self.y0 + self.h, INK);
        draw_vline(img, self.x0, self.y0, self.y0 + self.h, INK);
        // Four horizontal guide lines with value labels.
        for i in 0..=4u32 {
            let value = self.y_min + (self.y_max - self.y_min) * (i as f64 / 4.0);
            let (_, y) = self.project(0.0, value);
            if i > 0 {
                draw_hline(img, self.x0, self.x0 + self.w, y as u32, GRID);
            }
            let label = format!("{value:.2}");
            draw_text(
                img,
                self.x0 as i32 - 6 - text_width(&label, 1) as i32,
                y - GLYPH_H as i32 / 2,
                &label,
                1,
                INK,
            );
        }
        // Up to eight x ticks at integer epochs.
        let step = (n_epochs.max(1)).div_ceil(8).max(1);
        for e in (1..=n_epochs).filter(|e| e % step == 0 || *e == 1) {
            let frac = if n_epochs > 1 { (e - 1) as f64 / (n_epochs - 1) as f64 } else { 0.5 };
            let (x, _) = self.project(frac, self.y_min);
            draw_vline(img, x as u32, self.y0 + self.h, self.y0 + self.h + 3, INK);
            let label = e.to_string();
            draw_text(
                img,
                x - (text_width(&label, 1) / 2) as i32,
                (self.y0 + self.h + 6) as i32,
                &label,
                1,
                INK,
            );
        }
    }

    fn series(&self, img: &mut RgbImage, points: &[(usize, f64)], n_epochs: usize, color: Rgb<u8>) {
        let project = |&(e, v): &(usize, f64)| {
            let frac = if n_epochs > 1 { (e - 1) as f64 / (n_epochs - 1) as f64 } else { 0.5 };
            self.project(frac, v)
        };
        for pair in points.windows(2) {
            let (x0, y0) = project(&pair[0]);
            let (x1, y1) = project(&pair[1]);
            draw_line(img, x0, y0, x1, y1, color);
        }
        for p in points {
            let (x, y) = project(p);
            draw_marker(img, x, y, color);
        }
    }
}

fn legend(img: &mut RgbImage, x: u32, y: u32, entries: &[(&str, Rgb<u8>)]) {
    let mut cursor = x;
    for (label, color) in entries {
        fill_rect(img, cursor, y, 8, 8, *color);
        draw_text(img, (cursor + 12) as i32, y as i32, label, 1, INK);
        cursor += 12 + text_width(label, 1) + 18;
    }
}

/// Two stacked panels: per-epoch loss (training, and validation when a
/// validation slice existed) and validation accuracy.
pub fn training_curves(history: &[EpochStats], path: &Path) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Mismatch("training history is empty".into()));
    }
    let n = history.len();
    let train_loss: Vec<(usize, f64)> = history.iter().map(|h| (h.epoch, h.train_loss)).collect();
    let val_loss: Vec<(usize, f64)> =
        history.iter().filter_map(|h| h.val_loss.map(|v| (h.epoch, v))).collect();
    let val_acc: Vec<(usize, f64)> =
        history.iter().filter_map(|h| h.val_accuracy.map(|v| (h.epoch, v))).collect();

    let mut img = RgbImage::from_pixel(860, 620, BG);
    draw_text(&mut img, 8, 6, "TRAINING CURVES", 1, INK);

    let loss_max = train_loss
        .iter()
        .chain(&val_loss)
        .map(|&(_, v)| v)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let loss_panel = Panel { x0: 70, y0: 40, w: 760, h: 220, y_min: 0.0, y_max: loss_max * 1.05 };
    loss_panel.frame(&mut img, n);
    loss_panel.series(&mut img, &train_loss, n, TRAIN_LOSS);
    legend(&mut img, 70, 24, &[("TRAIN LOSS", TRAIN_LOSS), ("VAL LOSS", VAL_LOSS)]);
    if !val_loss.is_empty() {
        loss_panel.series(&mut img, &val_loss, n, VAL_LOSS);
    }

    let acc_panel = Panel { x0: 70, y0: 330, w: 760, h: 220, y_min: 0.0, y_max: 1.0 };
    acc_panel.frame(&mut img, n);
    legend(&mut img, 70, 314, &[("VAL ACCURACY", VAL_ACC)]);
    if val_acc.is_empty() {
        draw_text(&mut img, 330, 430, "NO VALIDATION SLICE", 2, GRID);
    } else {
        acc_panel.series(&mut img, &val_acc, n, VAL_ACC);
    }
    draw_text(&mut img, 410, 600, "EPOCH", 1, INK);
    save(&img, path)
}
