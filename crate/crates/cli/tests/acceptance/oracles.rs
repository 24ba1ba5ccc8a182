//! Slow, literal reference implementations backing the acceptance gates.
//!
//! Every function here transcribes the textbook definition as directly as
//! possible — naive O(n²) DFTs, full 2D convolution loops, per-bin histogram
//! rescans — and deliberately avoids the structure of the production kernels
//! in `coopsight::features`. When a gate fails, the disagreement indicts the
//! fast path, not the reference.

use coopsight::colorspace::Plane;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;
const SQRT2: f64 = std::f64::consts::SQRT_2;

// ---- Color conversion -------------------------------------------------------

/// CIELAB via the CIE ε/κ formulation (ε = 216/24389, κ = 24389/27) with the
/// published sRGB→XYZ D65 matrix; the white point is the matrix applied to
/// pure white. Algebraically equal to the δ = 6/29 formulation but a
/// different float path, so agreement is meaningful.
pub fn lab_reference(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    fn linear(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    let (rl, gl, bl) = (linear(r), linear(g), linear(b));
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    let xn = 0.4124564 + 0.3575761 + 0.1804375;
    let yn = 0.2126729 + 0.7151522 + 0.0721750;
    let zn = 0.0193339 + 0.1191920 + 0.9503041;
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let f = |t: f64| if t > EPS { t.cbrt() } else { (KAPPA * t + 16.0) / 116.0 };
    let (fx, fy, fz) = (f(x / xn), f(y / yn), f(z / zn));
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

// ---- Shared raster helpers --------------------------------------------------

fn dims(plane: &Plane) -> (usize, usize) {
    (plane.width() as usize, plane.height() as usize)
}

/// Edge-replicated read at possibly out-of-range integer coordinates.
fn at_clamped(plane: &Plane, x: i64, y: i64) -> f64 {
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    plane.get(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32)
}

/// Row-major grid-cell pixel ranges `(x0, x1, y0, y1)`; the final row and
/// column of cells absorb any remainder.
fn grid_cells(w: usize, h: usize, grid: usize) -> Vec<(usize, usize, usize, usize)> {
    let (cw, ch) = (w / grid, h / grid);
    let mut cells = Vec::new();
    for gy in 0..grid {
        for gx in 0..grid {
            cells.push((
                gx * cw,
                if gx + 1 == grid { w } else { (gx + 1) * cw },
                gy * ch,
                if gy + 1 == grid { h } else { (gy + 1) * ch },
            ));
        }
    }
    cells
}

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Full 3×3 correlation with edge replication, accumulated tap by tap.
fn correlate3_naive(plane: &Plane, kernel: &[[f64; 3]; 3]) -> Vec<f64> {
    let (w, h) = dims(plane);
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    acc += k * at_clamped(plane, x + kx as i64 - 1, y + ky as i64 - 1);
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Non-separable 2D Gaussian blur with edge replication; kernel truncated at
/// radius ⌈3σ⌉ with weights the product of two normalized 1D kernels.
/// Because clamping applies per axis, this equals a separable pass exactly
/// (up to summation order).
fn gaussian_blur_2d(plane: &Plane, sigma: f64) -> Vec<f64> {
    let (w, h) = dims(plane);
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k1 = Vec::new();
    for i in -radius..=radius {
        k1.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = k1.iter().sum();
    for k in &mut k1 {
        *k /= norm;
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for (j, &ky) in k1.iter().enumerate() {
                for (i, &kx) in k1.iter().enumerate() {
                    acc += ky
                        * kx
                        * at_clamped(plane, x + i as i64 - radius, y + j as i64 - radius);
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
const PREWITT_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]];
const PREWITT_Y: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];

// ---- Color family -----------------------------------------------------------

/// Count values landing in bin `b` of `bins` equal-width bins over [0,1] by
/// explicit edge comparison; the top edge belongs to the last bin.
fn bin_count(values: impl Iterator<Item = f64>, b: usize, bins: usize) -> f64 {
    let lo = b as f64 / bins as f64;
    let hi = (b + 1) as f64 / bins as f64;
    values.filter(|&v| v >= lo && (v < hi || b + 1 == bins)).count() as f64
}

pub fn color_histogram(planes: &[&Plane; 3], bins: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for plane in planes {
        let n = plane.values().len() as f64;
        for b in 0..bins {
            out.push(bin_count(plane.values().iter().copied(), b, bins) / n);
        }
    }
    out
}

pub fn color_moments1(planes: &[&Plane; 3]) -> Vec<f64> {
    let mut out = Vec::new();
    for plane in planes {
        let (mean, std) = population_mean_std(plane.values());
        out.push(mean);
        out.push(std);
    }
    out
}

pub fn color_moments2(planes: &[&Plane; 3]) -> Vec<f64> {
    let mut out = Vec::new();
    for plane in planes {
        let values = plane.values();
        let n = values.len() as f64;
        let (mean, std) = population_mean_std(values);
        let central = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
        let (skew, kurt) = if std > 0.0 {
            (central(3) / std.powi(3), central(4) / std.powi(4) - 3.0)
        } else {
            (0.0, 0.0)
        };
        out.extend([mean, std, skew, kurt]);
    }
    out
}

pub fn local_color_histogram(planes: &[&Plane; 3], grid: usize, bins: usize) -> Vec<f64> {
    let (w, h) = dims(planes[0]);
    let mut out = Vec::new();
    for plane in planes {
        for (x0, x1, y0, y1) in grid_cells(w, h, grid) {
            let count = ((x1 - x0) * (y1 - y0)) as f64;
            for b in 0..bins {
                let cell = (y0..y1)
                    .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                    .map(|(x, y)| plane.get(x as u32, y as u32));
                out.push(bin_count(cell, b, bins) / count);
            }
        }
    }
    out
}

/// Symmetric normalized co-occurrence statistics for one offset:
/// `[contrast, correlation, energy, homogeneity, entropy]`. Correlation is
/// 0 when either marginal deviation is ≤ 1e-12; entropy is natural-log.
fn cooccurrence_stats(plane: &Plane, levels: usize, offset: (i32, i32)) -> [f64; 5] {
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let quantized: Vec<usize> = plane
        .values()
        .iter()
        .map(|&v| ((v * levels as f64).floor() as i64).clamp(0, levels as i64 - 1) as usize)
        .collect();
    let mut counts = vec![0.0f64; levels * levels];
    let mut total = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (nx, ny) = (x + offset.0 as i64, y + offset.1 as i64);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let a = quantized[(y * w + x) as usize];
            let b = quantized[(ny * w + nx) as usize];
            counts[a * levels + b] += 1.0;
            counts[b * levels + a] += 1.0;
            total += 2.0;
        }
    }
    let p: Vec<f64> = counts.iter().map(|c| c / total).collect();

    let marginal = |along_rows: bool| -> Vec<f64> {
        (0..levels)
            .map(|i| {
                (0..levels)
                    .map(|j| if along_rows { p[i * levels + j] } else { p[j * levels + i] })
                    .sum()
            })
            .collect()
    };
    let weighted_mean =
        |m: &[f64]| m.iter().enumerate().map(|(i, &v)| i as f64 * v).sum::<f64>();
    let row = marginal(true);
    let col = marginal(false);
    let (mu_i, mu_j) = (weighted_mean(&row), weighted_mean(&col));
    let deviation = |m: &[f64], mu: f64| {
        m.iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 - mu) * (i as f64 - mu) * v)
            .sum::<f64>()
            .sqrt()
    };
    let (sigma_i, sigma_j) = (deviation(&row, mu_i), deviation(&col, mu_j));

    let mut stats = [0.0f64; 5];
    for i in 0..levels {
        for j in 0..levels {
            let v = p[i * levels + j];
            let d = i as f64 - j as f64;
            stats[0] += v * d * d;
            stats[2] += v * v;
            stats[3] += v / (1.0 + d * d);
            if v > 0.0 {
                stats[4] -= v * v.ln();
                stats[1] += (i as f64 - mu_i) * (j as f64 - mu_j) * v;
            }
        }
    }
    stats[1] = if sigma_i > 1e-12 && sigma_j > 1e-12 { stats[1] / (sigma_i * sigma_j) } else { 0.0 };
    stats
}

/// Channel-major, offset-minor co-occurrence statistics of three planes.
pub fn color_cooccurrence(planes: &[&Plane; 3], levels: usize, offsets: &[(i32, i32)]) -> Vec<f64> {
    let mut out = Vec::new();
    for plane in planes {
        for &offset in offsets {
            out.extend(cooccurrence_stats(plane, levels, offset));
        }
    }
    out
}

/// Offset-major co-occurrence statistics of one plane.
pub fn glcm_features(plane: &Plane, levels: usize, offsets: &[(i32, i32)]) -> Vec<f64> {
    let mut out = Vec::new();
    for &offset in offsets {
        out.extend(cooccurrence_stats(plane, levels, offset));
    }
    out
}

// ---- Texture family ---------------------------------------------------------

/// Bilinear read at fractional coordinates with the same conventions as the
/// production sampler: coordinates within 1e-8 of an integer snap first, and
/// corner indices clamp to the plane.
fn bilinear(plane: &Plane, x: f64, y: f64) -> f64 {
    let snap = |v: f64| if (v - v.round()).abs() < 1e-8 { v.round() } else { v };
    let (x, y) = (snap(x), snap(y));
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let x0 = (x.floor() as i64).clamp(0, w - 1);
    let y0 = (y.floor() as i64).clamp(0, h - 1);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let fx = (x - x0 as f64).clamp(0.0, 1.0);
    let fy = (y - y0 as f64).clamp(0.0, 1.0);
    let v00 = plane.get(x0 as u32, y0 as u32);
    let v10 = plane.get(x1 as u32, y0 as u32);
    let v01 = plane.get(x0 as u32, y1 as u32);
    let v11 = plane.get(x1 as u32, y1 as u32);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}

pub fn lbp_histogram(plane: &Plane, points: usize, radius: f64) -> Vec<f64> {
    // Uniform-pattern numbering: codes with at most two circular 0↔1
    // transitions get their own bins in ascending code order; the rest share
    // a final catch-all bin.
    let n_codes = 1usize << points;
    let transitions = |code: usize| {
        (0..points)
            .filter(|&k| ((code >> k) & 1) != ((code >> ((k + 1) % points)) & 1))
            .count()
    };
    let mut bin = vec![usize::MAX; n_codes];
    let mut next = 0usize;
    for (code, slot) in bin.iter_mut().enumerate() {
        if transitions(code) <= 2 {
            *slot = next;
            next += 1;
        }
    }
    let catch_all = next;
    for slot in &mut bin {
        if *slot == usize::MAX {
            *slot = catch_all;
        }
    }

    let reach = radius.ceil() as u32;
    let (w, h) = (plane.width(), plane.height());
    let mut hist = vec![0.0f64; catch_all + 1];
    let mut count = 0.0f64;
    for y in reach..h - reach {
        for x in reach..w - reach {
            let center = plane.get(x, y);
            let mut code = 0usize;
            for k in 0..points {
                let theta = TAU * k as f64 / points as f64;
                let sample =
                    bilinear(plane, x as f64 + radius * theta.cos(), y as f64 + radius * theta.sin());
                if sample >= center {
                    code |= 1 << k;
                }
            }
            hist[bin[code]] += 1.0;
            count += 1.0;
        }
    }
    for v in &mut hist {
        *v /= count;
    }
    hist
}

pub fn hog_descriptor(plane: &Plane, cell: usize, orientations: usize, block: usize) -> Vec<f64> {
    let (w, h) = dims(plane);
    let (cx, cy) = (w / cell, h / cell);
    let bin_width = PI / orientations as f64;

    // Per-cell magnitude-weighted orientation histograms, iterating cell by
    // cell (pixels beyond the last full cell are ignored).
    let mut cells = vec![vec![0.0f64; orientations]; cx * cy];
    for cyi in 0..cy {
        for cxi in 0..cx {
            let hist = &mut cells[cyi * cx + cxi];
            for y in cyi * cell..(cyi + 1) * cell {
                for x in cxi * cell..(cxi + 1) * cell {
                    let gx = at_clamped(plane, x as i64 + 1, y as i64)
                        - at_clamped(plane, x as i64 - 1, y as i64);
                    let gy = at_clamped(plane, x as i64, y as i64 + 1)
                        - at_clamped(plane, x as i64, y as i64 - 1);
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let mut theta = gy.atan2(gx);
                    if theta < 0.0 {
                        theta += PI;
                    }
                    if theta >= PI {
                        theta = 0.0;
                    }
                    let pos = theta / bin_width;
                    let lower = pos.floor() as usize % orientations;
                    let frac = pos - pos.floor();
                    hist[lower] += mag * (1.0 - frac);
                    hist[(lower + 1) % orientations] += mag * frac;
                }
            }
        }
    }

    // Blocks at stride one cell, row-major; cells row-major within a block;
    // each block L2-normalized with ε = 1e-6 under the root.
    let mut out = Vec::new();
    for by in 0..=cy - block {
        for bx in 0..=cx - block {
            let mut blockvec = Vec::with_capacity(block * block * orientations);
            for dy in 0..block {
                for dx in 0..block {
                    blockvec.extend_from_slice(&cells[(by + dy) * cx + bx + dx]);
                }
            }
            let norm = (blockvec.iter().map(|v| v * v).sum::<f64>() + 1e-6).sqrt();
            out.extend(blockvec.into_iter().map(|v| v / norm));
        }
    }
    out
}

pub fn gabor_features(plane: &Plane, freqs: &[f64], n_orients: usize) -> Vec<f64> {
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let mut out = Vec::new();
    for &freq in freqs {
        let sigma = 0.56 / freq;
        let r = (3.0 * sigma).ceil() as i64;
        for orient in 0..n_orients {
            let theta = orient as f64 * PI / n_orients as f64;
            let (ct, st) = (theta.cos(), theta.sin());

            // Complex kernel: Gaussian envelope times a plane wave, with the
            // real part mean-subtracted over the kernel footprint.
            let side = (2 * r + 1) as usize;
            let mut k_re = vec![0.0f64; side * side];
            let mut k_im = vec![0.0f64; side * side];
            for ky in -r..=r {
                for kx in -r..=r {
                    let envelope =
                        (-((kx * kx + ky * ky) as f64) / (2.0 * sigma * sigma)).exp();
                    let phase = TAU * freq * (kx as f64 * ct + ky as f64 * st);
                    let idx = ((ky + r) * (2 * r + 1) + (kx + r)) as usize;
                    k_re[idx] = envelope * phase.cos();
                    k_im[idx] = envelope * phase.sin();
                }
            }
            let dc = k_re.iter().sum::<f64>() / k_re.len() as f64;
            for v in &mut k_re {
                *v -= dc;
            }

            let mut mags = Vec::with_capacity((w * h) as usize);
            for y in 0..h {
                for x in 0..w {
                    let (mut re, mut im) = (0.0f64, 0.0f64);
                    for ky in -r..=r {
                        for kx in -r..=r {
                            let v = at_clamped(plane, x + kx, y + ky);
                            let idx = ((ky + r) * (2 * r + 1) + (kx + r)) as usize;
                            re += k_re[idx] * v;
                            im += k_im[idx] * v;
                        }
                    }
                    mags.push((re * re + im * im).sqrt());
                }
            }
            let (mean, std) = population_mean_std(&mags);
            out.push(mean);
            out.push(std);
        }
    }
    out
}

/// Naive O(n²) forward DFT of the mean-removed plane, returning (re, im).
fn dft2_naive(plane: &Plane) -> Vec<(f64, f64)> {
    let (w, h) = dims(plane);
    let mean = plane.values().iter().sum::<f64>() / (w * h) as f64;
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for y in 0..h {
                for x in 0..w {
                    let angle = -TAU
                        * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                    let value = plane.values()[y * w + x] - mean;
                    re += value * angle.cos();
                    im += value * angle.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

pub fn fft_features(plane: &Plane, radial_bins: usize) -> Vec<f64> {
    let (w, h) = dims(plane);
    let spectrum = dft2_naive(plane);
    let radial = |u: usize, v: usize| -> f64 {
        let su = if u <= w / 2 { u as f64 } else { u as f64 - w as f64 };
        let sv = if v <= h / 2 { v as f64 } else { v as f64 - h as f64 };
        let nu = 2.0 * su / w as f64;
        let nv = 2.0 * sv / h as f64;
        (nu * nu + nv * nv).sqrt() / SQRT2
    };

    let mut annulus_sum = vec![0.0f64; radial_bins];
    let mut annulus_count = vec![0u64; radial_bins];
    let mut logs = Vec::new();
    let mut mag_sum = 0.0f64;
    let mut centroid_sum = 0.0f64;
    for v in 0..h {
        for u in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let (re, im) = spectrum[v * w + u];
            let mag = (re * re + im * im).sqrt();
            let log_mag = (1.0 + mag).ln();
            let r = radial(u, v);
            let bin = ((r * radial_bins as f64).floor() as usize).min(radial_bins - 1);
            annulus_sum[bin] += log_mag;
            annulus_count[bin] += 1;
            logs.push(log_mag);
            mag_sum += mag;
            centroid_sum += r * mag;
        }
    }
    let mut out: Vec<f64> = annulus_sum
        .iter()
        .zip(&annulus_count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let (mean, std) = population_mean_std(&logs);
    out.push(mean);
    out.push(std);
    out.push(if mag_sum > 1e-12 { centroid_sum / mag_sum } else { 0.0 });
    out
}

pub fn wavelet_features(plane: &Plane, levels: usize) -> Vec<f64> {
    // Recursive 2×2 Haar: each block (a b / c d) maps to sum/horizontal/
    // vertical/diagonal combinations over 2; odd trailing rows/columns are
    // trimmed before each level.
    let mut current = (plane.values().to_vec(), dims(plane).0, dims(plane).1);
    let mut bands: Vec<Vec<f64>> = Vec::new();
    for _ in 0..levels {
        let (data, w, h) = &current;
        let (we, he) = (w - w % 2, h - h % 2);
        let (hw, hh) = (we / 2, he / 2);
        let mut parts = vec![vec![0.0f64; hw * hh]; 4]; // ll, lh, hl, hh
        for by in 0..hh {
            for bx in 0..hw {
                let a = data[2 * by * w + 2 * bx];
                let b = data[2 * by * w + 2 * bx + 1];
                let c = data[(2 * by + 1) * w + 2 * bx];
                let d = data[(2 * by + 1) * w + 2 * bx + 1];
                parts[0][by * hw + bx] = (a + b + c + d) / 2.0;
                parts[1][by * hw + bx] = (a - b + c - d) / 2.0;
                parts[2][by * hw + bx] = (a + b - c - d) / 2.0;
                parts[3][by * hw + bx] = (a - b - c + d) / 2.0;
            }
        }
        bands.push(parts[1].clone());
        bands.push(parts[2].clone());
        bands.push(parts[3].clone());
        current = (parts[0].clone(), hw, hh);
    }
    bands.push(current.0);

    let mut out = Vec::new();
    for band in &bands {
        let energy = band.iter().map(|v| v * v).sum::<f64>();
        let mean_abs = band.iter().map(|v| v.abs()).sum::<f64>() / band.len() as f64;
        let (_, std) = population_mean_std(band);
        out.extend([energy, mean_abs, std]);
    }
    out
}

// ---- Shape family -----------------------------------------------------------

fn gradient_features(
    plane: &Plane,
    kx: &[[f64; 3]; 3],
    ky: &[[f64; 3]; 3],
    max_response: f64,
    grid: usize,
) -> Vec<f64> {
    let (w, h) = dims(plane);
    let gx = correlate3_naive(plane, kx);
    let gy = correlate3_naive(plane, ky);
    let mag: Vec<f64> =
        gx.iter().zip(&gy).map(|(&a, &b)| (a * a + b * b).sqrt()).collect();

    let mut out = Vec::new();
    for (x0, x1, y0, y1) in grid_cells(w, h, grid) {
        let cell: Vec<f64> = (y0..y1)
            .flat_map(|y| (x0..x1).map(move |x| (x, y)))
            .map(|(x, y)| mag[y * w + x])
            .collect();
        let (mean, std) = population_mean_std(&cell);
        out.push(mean);
        out.push(std);
    }
    let (gmean, gstd) = population_mean_std(&mag);
    out.push(gmean);
    out.push(gstd);

    let mut hist = vec![0.0f64; 16];
    let mut nonzero = 0.0f64;
    for &m in &mag {
        if m > 0.0 {
            let bin = ((m / max_response * 16.0).floor() as i64).clamp(0, 15) as usize;
            hist[bin] += 1.0;
            nonzero += 1.0;
        }
    }
    if nonzero > 0.0 {
        for v in &mut hist {
            *v /= nonzero;
        }
    }
    out.extend(hist);
    out
}

pub fn sobel_features(plane: &Plane, grid: usize) -> Vec<f64> {
    gradient_features(plane, &SOBEL_X, &SOBEL_Y, 4.0 * SQRT2, grid)
}

pub fn prewitt_features(plane: &Plane, grid: usize) -> Vec<f64> {
    gradient_features(plane, &PREWITT_X, &PREWITT_Y, 3.0 * SQRT2, grid)
}

pub fn canny_features(plane: &Plane, sigma: f64, low: f64, high: f64, grid: usize) -> Vec<f64> {
    let (w, h) = dims(plane);
    let smoothed = Plane::new(plane.width(), plane.height(), gaussian_blur_2d(plane, sigma))
        .expect("smoothed plane");
    let gx = correlate3_naive(&smoothed, &SOBEL_X);
    let gy = correlate3_naive(&smoothed, &SOBEL_Y);
    let mag: Vec<f64> =
        gx.iter().zip(&gy).map(|(&a, &b)| (a * a + b * b).sqrt()).collect();
    let mag_at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // Non-maximum suppression along the gradient direction quantized to four
    // sectors; out-of-bounds neighbors count as zero.
    let mut kept = vec![false; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            if mag[i] == 0.0 {
                continue;
            }
            let mut theta = gy[i].atan2(gx[i]);
            if theta < 0.0 {
                theta += PI;
            }
            let (dx, dy) = match ((theta / (PI / 4.0)).round() as usize) % 4 {
                0 => (1i64, 0i64),
                1 => (1, 1),
                2 => (0, 1),
                _ => (1, -1),
            };
            kept[i] = mag[i] >= mag_at(x + dx, y + dy) && mag[i] >= mag_at(x - dx, y - dy);
        }
    }
    let max_kept = mag
        .iter()
        .zip(&kept)
        .filter(|&(_, &k)| k)
        .map(|(&m, _)| m)
        .fold(0.0f64, f64::max);

    // Hysteresis as a fixpoint: strong survivors seed, weak survivors join
    // while 8-adjacent to the edge set. Iterating to closure is equivalent
    // to any flood-fill order.
    let mut edge = vec![false; w * h];
    if max_kept > 0.0 {
        let (t_high, t_low) = (high * max_kept, low * max_kept);
        for i in 0..mag.len() {
            edge[i] = kept[i] && mag[i] >= t_high;
        }
        loop {
            let mut changed = false;
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let i = y as usize * w + x as usize;
                    if edge[i] || !kept[i] || mag[i] < t_low {
                        continue;
                    }
                    let touches = (-1..=1i64).any(|dy| {
                        (-1..=1i64).any(|dx| {
                            let (nx, ny) = (x + dx, y + dy);
                            nx >= 0
                                && ny >= 0
                                && nx < w as i64
                                && ny < h as i64
                                && edge[ny as usize * w + nx as usize]
                        })
                    });
                    if touches {
                        edge[i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    let mut out = Vec::new();
    for (x0, x1, y0, y1) in grid_cells(w, h, grid) {
        let total = ((x1 - x0) * (y1 - y0)) as f64;
        let edges = (y0..y1)
            .flat_map(|y| (x0..x1).map(move |x| (x, y)))
            .filter(|&(x, y)| edge[y * w + x])
            .count() as f64;
        out.push(edges / total);
    }
    out.push(edge.iter().filter(|&&e| e).count() as f64 / edge.len() as f64);
    out
}

/// Otsu cut over a 256-bin histogram: scan thresholds ascending, keep the
/// first maximizer of the between-class variance, return `(t+1)/256`; `None`
/// when no split produces positive between-class variance.
fn otsu_cut(values: &[f64]) -> Option<f64> {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[((v * 256.0).floor() as i64).clamp(0, 255) as usize] += 1;
    }
    let total = values.len() as f64;
    let total_mean =
        hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum::<f64>() / total;
    let mut best: (f64, Option<usize>) = (0.0, None);
    for t in 0..255usize {
        // Fresh ascending accumulation: bitwise the same partial sums the
        // production incremental scan sees at this t.
        let mut w0 = 0.0f64;
        let mut sum0 = 0.0f64;
        for (i, &c) in hist.iter().enumerate().take(t + 1) {
            w0 += c as f64 / total;
            sum0 += i as f64 * c as f64 / total;
        }
        let w1 = 1.0 - w0;
        if w0 <= 0.0 || w1 <= 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_mean - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, Some(t));
        }
    }
    best.1.map(|t| (t + 1) as f64 / 256.0)
}

/// Moore-neighbor boundary trace: clockwise from East, restart just past the
/// backtrack, stop on Jacob's criterion (leaving the start pixel in the
/// original direction again). Orthogonal steps count 1, diagonal √2;
/// isolated pixels trace to 0.
fn moore_perimeter(mask: &[bool], w: usize, h: usize, start: usize) -> f64 {
    const DIRS: [(i64, i64); 8] =
        [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let fg = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask[y as usize * w + x as usize]
    };
    let start_xy = ((start % w) as i64, (start / w) as i64);
    let mut current = start_xy;
    let mut prev_dir: Option<usize> = None;
    let mut start_dir: Option<usize> = None;
    let mut perimeter = 0.0f64;
    let cap = 4 * mask.iter().filter(|&&m| m).count() + 8;
    for _ in 0..cap {
        let back = prev_dir.map(|d| (d + 4) % 8).unwrap_or(4);
        let mut found = None;
        for step in 1..=8 {
            let dir = (back + step) % 8;
            let (nx, ny) = (current.0 + DIRS[dir].0, current.1 + DIRS[dir].1);
            if fg(nx, ny) {
                found = Some((dir, nx, ny));
                break;
            }
        }
        let Some((dir, nx, ny)) = found else {
            return 0.0;
        };
        if current == start_xy {
            match start_dir {
                None => start_dir = Some(dir),
                Some(d0) if d0 == dir => break,
                _ => {}
            }
        }
        perimeter += if dir % 2 == 0 { 1.0 } else { SQRT2 };
        current = (nx, ny);
        prev_dir = Some(dir);
    }
    perimeter
}

pub fn contour_features(plane: &Plane) -> Vec<f64> {
    let (w, h) = dims(plane);
    let Some(threshold) = otsu_cut(plane.values()) else {
        return vec![0.0; 5];
    };
    let fg: Vec<bool> = plane.values().iter().map(|&v| v >= threshold).collect();

    // 8-connected components via repeated flood fill in scan order; each
    // component's representative is its smallest pixel index.
    let mut component = vec![usize::MAX; w * h];
    let mut starts: Vec<usize> = Vec::new();
    let mut areas: Vec<u64> = Vec::new();
    for i in 0..fg.len() {
        if !fg[i] || component[i] != usize::MAX {
            continue;
        }
        let id = starts.len();
        starts.push(i);
        let mut area = 0u64;
        let mut stack = vec![i];
        component[i] = id;
        while let Some(j) = stack.pop() {
            area += 1;
            let (x, y) = ((j % w) as i64, (j / w) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let k = ny as usize * w + nx as usize;
                    if fg[k] && component[k] == usize::MAX {
                        component[k] = id;
                        stack.push(k);
                    }
                }
            }
        }
        areas.push(area);
    }
    if starts.is_empty() {
        return vec![0.0; 5];
    }

    let fg_fraction = fg.iter().filter(|&&f| f).count() as f64 / fg.len() as f64;
    let mut perimeters = Vec::new();
    let mut circularities = Vec::new();
    for (id, &start) in starts.iter().enumerate() {
        let mask: Vec<bool> = component.iter().map(|&c| c == id).collect();
        let p = moore_perimeter(&mask, w, h, start);
        perimeters.push(p);
        circularities.push(if p > 0.0 { 4.0 * PI * areas[id] as f64 / (p * p) } else { 0.0 });
    }
    let n = starts.len() as f64;
    vec![
        n.ln_1p(),
        fg_fraction,
        perimeters.iter().sum::<f64>() / n,
        perimeters.iter().fold(0.0f64, |a, &b| a.max(b)),
        circularities.iter().sum::<f64>() / n,
    ]
}

pub fn harris_features(plane: &Plane, k: f64, thresh: f64) -> Vec<f64> {
    let (w, h) = dims(plane);
    let ix = correlate3_naive(plane, &SOBEL_X);
    let iy = correlate3_naive(plane, &SOBEL_Y);
    let product_plane = |values: Vec<f64>| -> Vec<f64> {
        let p = Plane::new(plane.width(), plane.height(), values).expect("product plane");
        gaussian_blur_2d(&p, 1.0)
    };
    let a = product_plane(ix.iter().map(|v| v * v).collect());
    let c = product_plane(iy.iter().map(|v| v * v).collect());
    let b = product_plane(ix.iter().zip(&iy).map(|(p, q)| p * q).collect());
    let response: Vec<f64> = (0..w * h)
        .map(|i| a[i] * c[i] - b[i] * b[i] - k * (a[i] + c[i]) * (a[i] + c[i]))
        .collect();
    let r_max = response.iter().fold(f64::MIN, |acc, &v| acc.max(v));
    if r_max <= 0.0 {
        return vec![0.0; 4];
    }
    let cut = thresh * r_max;
    let mut corners = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let r = response[y as usize * w + x as usize];
            if r < cut {
                continue;
            }
            let beaten = (-1..=1i64).any(|dy| {
                (-1..=1i64).any(|dx| {
                    if dx == 0 && dy == 0 {
                        return false;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0
                        && ny >= 0
                        && nx < w as i64
                        && ny < h as i64
                        && response[ny as usize * w + nx as usize] >= r
                })
            });
            if !beaten {
                corners.push(r);
            }
        }
    }
    if corners.is_empty() {
        return vec![0.0; 4];
    }
    let (mean, std) = population_mean_std(&corners);
    let max = corners.iter().fold(0.0f64, |a, &b| a.max(b));
    vec![(corners.len() as f64).ln_1p(), mean, std, max]
}
