//! Color-family extractors: histograms, moments, and co-occurrence.
//!
//! All take the three planes of one color space. Global and local
//! histograms operate on the normalized `[0,1]` planes; moments are
//! computed on whatever scale the caller passes (raw CIELAB values for the
//! LAB space, normalized values otherwise).

use crate::colorspace::Plane;
use crate::error::{Error, Result};

use super::cooccur::{cooccurrence_matrix, haralick_stats};

/// Histogram bin of a `[0,1]` value among `bins` equal-width bins; the top
/// edge belongs to the last bin.
fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as usize
}

/// Population mean and standard deviation. Constant slices short-circuit to
/// `(value, 0)` so accumulated rounding can never manufacture variance.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-channel global color histogram: `bins` equal-width bins over `[0,1]`
/// per channel, each channel normalized to sum 1. Output is channel-major.
pub fn color_histogram(planes: &[&Plane; 3], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidParam("histogram bins must be positive".into()));
    }
    let mut out = Vec::with_capacity(3 * bins);
    for plane in planes {
        let mut hist = vec![0.0f64; bins];
        for &v in plane.values() {
            hist[bin_of(v, bins)] += 1.0;
        }
        let n = plane.values().len() as f64;
        out.extend(hist.into_iter().map(|c| c / n));
    }
    Ok(out)
}

/// First-order color moments: `[mean, std]` per channel (population std),
/// channel-major. Six values.
pub fn color_moments1(planes: &[&Plane; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(6);
    for plane in planes {
        let (mean, std) = mean_std(plane.values());
        out.push(mean);
        out.push(std);
    }
    out
}

/// Four color moments per channel: `[mean, std, skewness, excess kurtosis]`,
/// channel-major. Twelve values. A zero-variance channel reports skewness
/// and excess kurtosis of 0 by convention.
pub fn color_moments2(planes: &[&Plane; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(12);
    for plane in planes {
        let values = plane.values();
        let n = values.len() as f64;
        let (mean, std) = mean_std(values);
        let (skew, kurt) = if std > 0.0 {
            let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            (m3 / std.powi(3), m4 / std.powi(4) - 3.0)
        } else {
            (0.0, 0.0)
        };
        out.extend([mean, std, skew, kurt]);
    }
    out
}

/// Local color histogram: split each plane into a `grid × grid` mesh of
/// cells (the last row/column of cells absorbs any remainder) and emit a
/// `bins`-bin histogram per cell, each normalized to sum 1 over its own
/// pixels. Output is channel-major, cells row-major within a channel.
pub fn local_color_histogram(planes: &[&Plane; 3], grid: usize, bins: usize) -> Result<Vec<f64>> {
    if grid == 0 || bins == 0 {
        return Err(Error::InvalidParam("grid and bins must be positive".into()));
    }
    let (w, h) = (planes[0].width() as usize, planes[0].height() as usize);
    if w < grid || h < grid {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} is smaller than the {grid}x{grid} cell grid"
        )));
    }
    let (cell_w, cell_h) = (w / grid, h / grid);
    let mut out = Vec::with_capacity(3 * grid * grid * bins);
    for plane in planes {
        for gy in 0..grid {
            let y0 = gy * cell_h;
            let y1 = if gy + 1 == grid { h } else { y0 + cell_h };
            for gx in 0..grid {
                let x0 = gx * cell_w;
                let x1 = if gx + 1 == grid { w } else { x0 + cell_w };
                let mut hist = vec![0.0f64; bins];
                let mut count = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        hist[bin_of(plane.get(x as u32, y as u32), bins)] += 1.0;
                        count += 1.0;
                    }
                }
                out.extend(hist.into_iter().map(|c| c / count));
            }
        }
    }
    Ok(out)
}

/// Per-channel co-occurrence statistics: for every channel and offset,
/// build the symmetric normalized co-occurrence matrix at `levels`
/// quantization levels and emit its five Haralick statistics. Output is
/// channel-major, then offset-major:
/// `3 channels × |offsets| × [contrast, correlation, energy, homogeneity, entropy]`.
pub fn color_cooccurrence(
    planes: &[&Plane; 3],
    levels: usize,
    offsets: &[(i32, i32)],
) -> Result<Vec<f64>> {
    if offsets.is_empty() {
        return Err(Error::InvalidParam("offset list must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(3 * offsets.len() * 5);
    for plane in planes {
        for &offset in offsets {
            let matrix = cooccurrence_matrix(plane, levels, offset)?;
            out.extend(haralick_stats(&matrix, levels));
        }
    }
    Ok(out)
}
