//! Texture-family extractors operating on a single luminance plane.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::colorspace::Plane;
use crate::error::{Error, Result};

use super::cooccur::{cooccurrence_matrix, haralick_stats};

/// Bilinear sample at fractional coordinates. Coordinates within 1e-8 of an
/// integer are snapped first so that axis-aligned sample points (whose
/// trigonometry carries float fuzz) read pixels exactly.
fn sample_bilinear(plane: &Plane, x: f64, y: f64) -> f64 {
    let snap = |v: f64| if (v - v.round()).abs() < 1e-8 { v.round() } else { v };
    let (x, y) = (snap(x), snap(y));
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let x0 = (x.floor() as i64).clamp(0, w - 1);
    let y0 = (y.floor() as i64).clamp(0, h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (x - x0 as f64).clamp(0.0, 1.0);
    let fy = (y - y0 as f64).clamp(0.0, 1.0);
    let at = |xx: i64, yy: i64| plane.get(xx as u32, yy as u32);
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Number of circular 0↔1 transitions in a `points`-bit code.
fn transitions(code: u32, points: usize) -> u32 {
    let mut t = 0;
    for k in 0..points {
        let a = (code >> k) & 1;
        let b = (code >> ((k + 1) % points)) & 1;
        t += (a ^ b) as u32;
    }
    t
}

/// Map each `points`-bit pattern to its histogram bin: uniform patterns
/// (at most two transitions) get their own bin in ascending code order;
/// everything else shares the final catch-all bin.
fn uniform_bin_table(points: usize) -> (Vec<usize>, usize) {
    let n_codes = 1usize << points;
    let uniform: Vec<u32> = (0..n_codes as u32)
        .filter(|&c| transitions(c, points) <= 2)
        .collect();
    let n_bins = uniform.len() + 1;
    let mut table = vec![uniform.len(); n_codes];
    for (bin, &code) in uniform.iter().enumerate() {
        table[code as usize] = bin;
    }
    (table, n_bins)
}

/// Uniform local binary pattern histogram.
///
/// For every interior pixel, `points` neighbors are sampled bilinearly on a
/// circle of `radius`; bit `k` is set when neighbor `k` is ≥ the center
/// value. Patterns with at most two circular transitions ("uniform") each
/// map to their own bin; all others share a catch-all, giving
/// `points·(points−1) + 3` bins. The histogram is normalized to sum 1.
///
/// Because the ≥ comparison happens after interpolation, the descriptor is
/// exactly invariant under increasing *affine* remaps of intensity (which
/// commute with interpolation) and under arbitrary strictly increasing
/// remaps at the non-interpolated axis-aligned samples.
pub fn lbp_histogram(plane: &Plane, points: usize, radius: f64) -> Result<Vec<f64>> {
    if !(4..=16).contains(&points) {
        return Err(Error::InvalidParam(format!("lbp points must lie in 4..=16, got {points}")));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParam("lbp radius must be positive".into()));
    }
    let reach = radius.ceil() as u32;
    let (w, h) = (plane.width(), plane.height());
    if w <= 2 * reach || h <= 2 * reach {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} has no interior pixels at radius {radius}"
        )));
    }
    let (table, n_bins) = uniform_bin_table(points);
    let mut hist = vec![0.0f64; n_bins];
    let mut count = 0.0f64;
    for y in reach..h - reach {
        for x in reach..w - reach {
            let center = plane.get(x, y);
            let mut code = 0u32;
            for k in 0..points {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
                let sx = x as f64 + radius * theta.cos();
                let sy = y as f64 + radius * theta.sin();
                if sample_bilinear(plane, sx, sy) >= center {
                    code |= 1 << k;
                }
            }
            hist[table[code as usize]] += 1.0;
            count += 1.0;
        }
    }
    for v in &mut hist {
        *v /= count;
    }
    Ok(hist)
}

/// Histogram bin that the all-ones (constant-neighborhood) pattern maps to.
#[cfg(test)]
fn all_ones_bin(points: usize) -> usize {
    let (table, _) = uniform_bin_table(points);
    table[(1usize << points) - 1]
}

/// Gray-level co-occurrence statistics of a single plane: for each offset,
/// the five Haralick statistics of the symmetric normalized matrix at
/// `levels` quantization levels. Offset-major output, `5·|offsets|` wide.
pub fn glcm_features(plane: &Plane, levels: usize, offsets: &[(i32, i32)]) -> Result<Vec<f64>> {
    if offsets.is_empty() {
        return Err(Error::InvalidParam("offset list must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(offsets.len() * 5);
    for &offset in offsets {
        let matrix = cooccurrence_matrix(plane, levels, offset)?;
        out.extend(haralick_stats(&matrix, levels));
    }
    Ok(out)
}

/// Histogram of oriented gradients.
///
/// Centered differences (with edge replication) feed magnitude-weighted
/// unsigned orientation histograms per `cell × cell` pixel cell, with
/// linear interpolation between the two nearest of `orientations` bins
/// (bin centers at `i·π/orientations`). Cells are grouped into
/// `block × block` blocks at stride one cell, each block L2-normalized with
/// ε = 1e-6 under the square root. Trailing pixels that do not fill a cell
/// are ignored. Output is blocks row-major, cells row-major within a block.
pub fn hog_descriptor(
    plane: &Plane,
    cell: usize,
    orientations: usize,
    block: usize,
) -> Result<Vec<f64>> {
    if cell == 0 || orientations == 0 || block == 0 {
        return Err(Error::InvalidParam("hog parameters must be positive".into()));
    }
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let cx = w / cell;
    let cy = h / cell;
    if cx < block || cy < block {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} yields a {cx}x{cy} cell grid, smaller than the {block}x{block} block"
        )));
    }
    let at = |x: i64, y: i64| -> f64 {
        plane.get(
            x.clamp(0, w as i64 - 1) as u32,
            y.clamp(0, h as i64 - 1) as u32,
        )
    };
    let mut cells = vec![vec![0.0f64; orientations]; cx * cy];
    let bin_width = std::f64::consts::PI / orientations as f64;
    for y in 0..cy * cell {
        for x in 0..cx * cell {
            let gx = at(x as i64 + 1, y as i64) - at(x as i64 - 1, y as i64);
            let gy = at(x as i64, y as i64 + 1) - at(x as i64, y as i64 - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            if theta >= std::f64::consts::PI {
                theta = 0.0;
            }
            let pos = theta / bin_width;
            let lower = pos.floor() as usize % orientations;
            let upper = (lower + 1) % orientations;
            let frac = pos - pos.floor();
            let hist = &mut cells[(y / cell) * cx + x / cell];
            hist[lower] += mag * (1.0 - frac);
            hist[upper] += mag * frac;
        }
    }
    let mut out = Vec::with_capacity((cx - block + 1) * (cy - block + 1) * block * block * orientations);
    for by in 0..=cy - block {
        for bx in 0..=cx - block {
            let start = out.len();
            for dy in 0..block {
                for dx in 0..block {
                    out.extend_from_slice(&cells[(by + dy) * cx + bx + dx]);
                }
            }
            let norm = (out[start..].iter().map(|v| v * v).sum::<f64>() + 1e-6).sqrt();
            for v in &mut out[start..] {
                *v /= norm;
            }
        }
    }
    Ok(out)
}

/// Gabor filter-bank response statistics.
///
/// For every (frequency, orientation) pair a complex Gabor kernel with
/// σ = 0.56/frequency (truncated at 3σ) is correlated with the plane under
/// edge replication; the real part is mean-subtracted so constant regions
/// produce zero response. Output is frequency-major, orientation-minor:
/// `[mean, std]` of the response magnitude per filter.
pub fn gabor_features(plane: &Plane, freqs: &[f64], n_orients: usize) -> Result<Vec<f64>> {
    if freqs.is_empty() || n_orients == 0 {
        return Err(Error::InvalidParam("gabor filter bank must be nonempty".into()));
    }
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let mut out = Vec::with_capacity(freqs.len() * n_orients * 2);
    for &freq in freqs {
        if freq <= 0.0 || freq > 0.5 {
            return Err(Error::InvalidParam(format!(
                "gabor frequency must lie in (0, 0.5], got {freq}"
            )));
        }
        let sigma = 0.56 / freq;
        let r = (3.0 * sigma).ceil() as i64;
        for orient in 0..n_orients {
            let theta = orient as f64 * std::f64::consts::PI / n_orients as f64;
            let (ct, st) = (theta.cos(), theta.sin());
            let side = (2 * r + 1) as usize;
            let mut k_re = vec![0.0f64; side * side];
            let mut k_im = vec![0.0f64; side * side];
            for ky in -r..=r {
                for kx in -r..=r {
                    let envelope = (-((kx * kx + ky * ky) as f64) / (2.0 * sigma * sigma)).exp();
                    let phase =
                        2.0 * std::f64::consts::PI * freq * (kx as f64 * ct + ky as f64 * st);
                    let idx = ((ky + r) * (2 * r + 1) + kx + r) as usize;
                    k_re[idx] = envelope * phase.cos();
                    k_im[idx] = envelope * phase.sin();
                }
            }
            let dc = k_re.iter().sum::<f64>() / k_re.len() as f64;
            for v in &mut k_re {
                *v -= dc;
            }

            let mut sum = 0.0f64;
            let mut sum_sq = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    let mut re = 0.0f64;
                    let mut im = 0.0f64;
                    for ky in -r..=r {
                        let sy = (y + ky).clamp(0, h - 1) as u32;
                        for kx in -r..=r {
                            let sx = (x + kx).clamp(0, w - 1) as u32;
                            let v = plane.get(sx, sy);
                            let idx = ((ky + r) * (2 * r + 1) + kx + r) as usize;
                            re += k_re[idx] * v;
                            im += k_im[idx] * v;
                        }
                    }
                    let mag = (re * re + im * im).sqrt();
                    sum += mag;
                    sum_sq += mag * mag;
                }
            }
            let n = (w * h) as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            out.push(mean);
            out.push(var.sqrt());
        }
    }
    Ok(out)
}

/// Unnormalized 2D DFT of the mean-removed plane, row-major complex output.
///
/// Exposed so identity checks (Parseval) can reach the raw spectrum the
/// feature statistics are computed from.
pub fn dft2(plane: &Plane) -> Vec<Complex<f64>> {
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let mean = plane.values().iter().sum::<f64>() / (w * h) as f64;
    let mut data: Vec<Complex<f64>> = plane
        .values()
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    data
}

/// Normalized radial frequency of spectrum cell `(u, v)`, in `[0, 1]`.
fn radial_frequency(u: usize, v: usize, w: usize, h: usize) -> f64 {
    let su = if u <= w / 2 { u as f64 } else { u as f64 - w as f64 };
    let sv = if v <= h / 2 { v as f64 } else { v as f64 - h as f64 };
    let nu = 2.0 * su / w as f64;
    let nv = 2.0 * sv / h as f64;
    (nu * nu + nv * nv).sqrt() / std::f64::consts::SQRT_2
}

/// Fourier spectrum statistics: `radial_bins` radially averaged
/// log-magnitude annuli plus global `[mean, std, spectral centroid]` over
/// the DC-removed spectrum. Log-magnitude is `ln(1+|F|)`; the centroid
/// weights normalized radial frequency by raw magnitude.
pub fn fft_features(plane: &Plane, radial_bins: usize) -> Result<Vec<f64>> {
    if radial_bins == 0 {
        return Err(Error::InvalidParam("radial_bins must be positive".into()));
    }
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let spectrum = dft2(plane);
    let mut annulus_sum = vec![0.0f64; radial_bins];
    let mut annulus_count = vec![0u64; radial_bins];
    let mut log_sum = 0.0f64;
    let mut log_sum_sq = 0.0f64;
    let mut mag_sum = 0.0f64;
    let mut centroid_sum = 0.0f64;
    let mut n_cells = 0u64;
    for v in 0..h {
        for u in 0..w {
            if u == 0 && v == 0 {
                continue; // DC removed
            }
            let mag = spectrum[v * w + u].norm();
            let log_mag = (1.0 + mag).ln();
            let r = radial_frequency(u, v, w, h);
            let bin = ((r * radial_bins as f64).floor() as usize).min(radial_bins - 1);
            annulus_sum[bin] += log_mag;
            annulus_count[bin] += 1;
            log_sum += log_mag;
            log_sum_sq += log_mag * log_mag;
            mag_sum += mag;
            centroid_sum += r * mag;
            n_cells += 1;
        }
    }
    let mut out = Vec::with_capacity(radial_bins + 3);
    for (sum, count) in annulus_sum.iter().zip(&annulus_count) {
        out.push(if *count > 0 { sum / *count as f64 } else { 0.0 });
    }
    let n = n_cells as f64;
    let mean = log_sum / n;
    let var = (log_sum_sq / n - mean * mean).max(0.0);
    out.push(mean);
    out.push(var.sqrt());
    out.push(if mag_sum > 1e-12 { centroid_sum / mag_sum } else { 0.0 });
    Ok(out)
}

/// One subband of a Haar decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// Multi-level 2D Haar decomposition: per level the detail subbands
/// `[LH, HL, HH]` (horizontal, vertical, diagonal detail), plus the final
/// approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarPyramid {
    pub detail: Vec<[Subband; 3]>,
    pub approx: Subband,
}

/// Orthonormal 2D Haar decomposition. Odd input dimensions are trimmed by
/// one row/column before each level; on fully even inputs the transform is
/// energy-preserving and exactly invertible (see [`haar_reconstruct`]).
pub fn haar_decompose(plane: &Plane, levels: usize) -> Result<HaarPyramid> {
    if levels == 0 {
        return Err(Error::InvalidParam("wavelet levels must be positive".into()));
    }
    let mut current = Subband {
        width: plane.width() as usize,
        height: plane.height() as usize,
        data: plane.values().to_vec(),
    };
    let mut detail = Vec::with_capacity(levels);
    for level in 0..levels {
        let we = current.width - current.width % 2;
        let he = current.height - current.height % 2;
        if we < 2 || he < 2 {
            return Err(Error::InvalidParam(format!(
                "plane too small for {levels} wavelet levels (level {level} input {}x{})",
                current.width, current.height
            )));
        }
        let (hw, hh) = (we / 2, he / 2);
        let mut ll = vec![0.0f64; hw * hh];
        let mut lh = vec![0.0f64; hw * hh];
        let mut hl = vec![0.0f64; hw * hh];
        let mut hh_band = vec![0.0f64; hw * hh];
        for by in 0..hh {
            for bx in 0..hw {
                let a = current.data[2 * by * current.width + 2 * bx];
                let b = current.data[2 * by * current.width + 2 * bx + 1];
                let c = current.data[(2 * by + 1) * current.width + 2 * bx];
                let d = current.data[(2 * by + 1) * current.width + 2 * bx + 1];
                ll[by * hw + bx] = (a + b + c + d) / 2.0;
                lh[by * hw + bx] = (a - b + c - d) / 2.0;
                hl[by * hw + bx] = (a + b - c - d) / 2.0;
                hh_band[by * hw + bx] = (a - b - c + d) / 2.0;
            }
        }
        detail.push([
            Subband { width: hw, height: hh, data: lh },
            Subband { width: hw, height: hh, data: hl },
            Subband { width: hw, height: hh, data: hh_band },
        ]);
        current = Subband { width: hw, height: hh, data: ll };
    }
    Ok(HaarPyramid { detail, approx: current })
}

/// Invert [`haar_decompose`]. Returns the (trim-adjusted) image row-major
/// with its dimensions.
pub fn haar_reconstruct(pyramid: &HaarPyramid) -> (Vec<f64>, usize, usize) {
    let mut current = pyramid.approx.clone();
    for level in pyramid.detail.iter().rev() {
        let [lh, hl, hh] = level;
        let (hw, hh_dim) = (current.width, current.height);
        let (w, h) = (hw * 2, hh_dim * 2);
        let mut data = vec![0.0f64; w * h];
        for by in 0..hh_dim {
            for bx in 0..hw {
                let s = current.data[by * hw + bx];
                let dh = lh.data[by * hw + bx];
                let dv = hl.data[by * hw + bx];
                let dd = hh.data[by * hw + bx];
                data[2 * by * w + 2 * bx] = (s + dh + dv + dd) / 2.0;
                data[2 * by * w + 2 * bx + 1] = (s - dh + dv - dd) / 2.0;
                data[(2 * by + 1) * w + 2 * bx] = (s + dh - dv - dd) / 2.0;
                data[(2 * by + 1) * w + 2 * bx + 1] = (s - dh - dv + dd) / 2.0;
            }
        }
        current = Subband { width: w, height: h, data };
    }
    (current.data, current.width, current.height)
}

/// Haar wavelet subband statistics: `[energy, mean |coeff|, std]` per
/// subband, level-major over `[LH, HL, HH]` with the final approximation
/// last — `3·(3·levels + 1)` values. Energy is the sum of squared
/// coefficients.
pub fn wavelet_features(plane: &Plane, levels: usize) -> Result<Vec<f64>> {
    let pyramid = haar_decompose(plane, levels)?;
    let stats = |band: &Subband| -> [f64; 3] {
        let n = band.data.len() as f64;
        let energy = band.data.iter().map(|v| v * v).sum::<f64>();
        let mean_abs = band.data.iter().map(|v| v.abs()).sum::<f64>() / n;
        let mean = band.data.iter().sum::<f64>() / n;
        let var = band.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        [energy, mean_abs, var.sqrt()]
    };
    let mut out = Vec::with_capacity(3 * (3 * levels + 1));
    for level in &pyramid.detail {
        for band in level {
            out.extend(stats(band));
        }
    }
    out.extend(stats(&pyramid.approx));
    Ok(out)
}
