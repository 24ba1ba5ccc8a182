//! Quantized co-occurrence matrices and Haralick statistics.
//!
//! Shared by the per-channel color co-occurrence extractor (CCM) and the
//! single-plane gray-level variant (GLCM). A co-occurrence matrix for
//! offset `(dx, dy)` counts ordered level pairs `(p(x,y), p(x+dx, y+dy))`
//! together with their transposes (symmetric accumulation), normalized to
//! sum 1.

use crate::colorspace::Plane;
use crate::error::{Error, Result};

/// Quantize a `[0,1]` plane into `levels` equal-width levels.
/// Values at the top edge fall into the last level.
pub fn quantize_plane(plane: &Plane, levels: usize) -> Vec<u8> {
    debug_assert!(levels >= 2 && levels <= 256);
    plane
        .values()
        .iter()
        .map(|&v| {
            let bin = (v * levels as f64).floor() as i64;
            bin.clamp(0, levels as i64 - 1) as u8
        })
        .collect()
}

/// Symmetric, normalized co-occurrence matrix of quantized `plane` for one
/// pixel offset. Returns a `levels × levels` row-major matrix summing to 1.
pub fn cooccurrence_matrix(
    plane: &Plane,
    levels: usize,
    offset: (i32, i32),
) -> Result<Vec<f64>> {
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let (dx, dy) = (offset.0 as i64, offset.1 as i64);
    if dx == 0 && dy == 0 {
        return Err(Error::InvalidParam("co-occurrence offset must be nonzero".into()));
    }
    let q = quantize_plane(plane, levels);
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for y in 0..h {
        let ny = y + dy;
        if ny < 0 || ny >= h {
            continue;
        }
        for x in 0..w {
            let nx = x + dx;
            if nx < 0 || nx >= w {
                continue;
            }
            let a = q[(y * w + x) as usize] as usize;
            let b = q[(ny * w + nx) as usize] as usize;
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    if total == 0 {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} admits no pixel pairs for offset ({dx},{dy})"
        )));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// The five Haralick statistics of a normalized co-occurrence matrix, in
/// the order `[contrast, correlation, energy, homogeneity, entropy]`.
///
/// Correlation uses the marginal means/standard deviations and is defined
/// as 0 when either marginal is constant. Entropy is natural-log based and
/// skips empty cells.
pub fn haralick_stats(matrix: &[f64], levels: usize) -> [f64; 5] {
    debug_assert_eq!(matrix.len(), levels * levels);
    let p = |i: usize, j: usize| matrix[i * levels + j];

    let mut row_marginal = vec![0.0; levels];
    let mut col_marginal = vec![0.0; levels];
    for i in 0..levels {
        for j in 0..levels {
            row_marginal[i] += p(i, j);
            col_marginal[j] += p(i, j);
        }
    }
    let mean = |m: &[f64]| -> f64 { m.iter().enumerate().map(|(i, &v)| i as f64 * v).sum() };
    let mu_i = mean(&row_marginal);
    let mu_j = mean(&col_marginal);
    let var = |m: &[f64], mu: f64| -> f64 {
        m.iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 - mu).powi(2) * v)
            .sum()
    };
    let sigma_i = var(&row_marginal, mu_i).sqrt();
    let sigma_j = var(&col_marginal, mu_j).sqrt();

    let mut contrast = 0.0;
    let mut correlation = 0.0;
    let mut energy = 0.0;
    let mut homogeneity = 0.0;
    let mut entropy = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = p(i, j);
            let d = i as f64 - j as f64;
            contrast += v * d * d;
            energy += v * v;
            homogeneity += v / (1.0 + d * d);
            if v > 0.0 {
                entropy -= v * v.ln();
                correlation += (i as f64 - mu_i) * (j as f64 - mu_j) * v;
            }
        }
    }
    correlation = if sigma_i > 1e-12 && sigma_j > 1e-12 {
        correlation / (sigma_i * sigma_j)
    } else {
        0.0
    };
    [contrast, correlation, energy, homogeneity, entropy]
}
