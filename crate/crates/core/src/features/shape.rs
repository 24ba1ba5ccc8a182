//! Shape-family extractors operating on a single luminance plane.
//!
//! These descriptors summarize edge, contour, and corner structure. They
//! are part of the screening grid rather than the default feature set, but
//! share the same width/finiteness contracts as every other extractor.

use std::collections::VecDeque;

use crate::colorspace::Plane;
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// 3×3 correlation with edge replication, returning a full-size map.
///
/// Positive and negative taps are accumulated separately and subtracted at
/// the end, so a flat neighborhood cancels exactly instead of leaving
/// rounding residue that would register as a phantom gradient.
fn correlate3(plane: &Plane, kernel: &[[f64; 3]; 3]) -> Vec<f64> {
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let mut out = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut pos = 0.0;
            let mut neg = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                let sy = (y + ky as i64 - 1).clamp(0, h - 1) as u32;
                for (kx, &k) in row.iter().enumerate() {
                    let sx = (x + kx as i64 - 1).clamp(0, w - 1) as u32;
                    if k > 0.0 {
                        pos += k * plane.get(sx, sy);
                    } else if k < 0.0 {
                        neg += -k * plane.get(sx, sy);
                    }
                }
            }
            out[(y * w + x) as usize] = pos - neg;
        }
    }
    out
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
const PREWITT_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]];
const PREWITT_Y: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];

/// Separable Gaussian smoothing with edge replication, radius `⌈3σ⌉`.
fn gaussian_smooth(values: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let (wi, hi) = (w as i64, h as i64);
    let mut horizontal = vec![0.0f64; values.len()];
    for y in 0..hi {
        for x in 0..wi {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let sx = (x + i as i64 - radius).clamp(0, wi - 1);
                acc += k * values[(y * wi + sx) as usize];
            }
            horizontal[(y * wi + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0f64; values.len()];
    for y in 0..hi {
        for x in 0..wi {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let sy = (y + i as i64 - radius).clamp(0, hi - 1);
                acc += k * horizontal[(sy * wi + x) as usize];
            }
            out[(y * wi + x) as usize] = acc;
        }
    }
    out
}

/// Row-major cell pixel ranges of a `grid × grid` mesh; the final row and
/// column of cells absorb any remainder.
fn cell_ranges(w: usize, h: usize, grid: usize) -> Vec<(usize, usize, usize, usize)> {
    let (cw, ch) = (w / grid, h / grid);
    let mut cells = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        let y0 = gy * ch;
        let y1 = if gy + 1 == grid { h } else { y0 + ch };
        for gx in 0..grid {
            let x0 = gx * cw;
            let x1 = if gx + 1 == grid { w } else { x0 + cw };
            cells.push((x0, x1, y0, y1));
        }
    }
    cells
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0.0f64;
    let mut sum = 0.0f64;
    for v in values.clone() {
        n += 1.0;
        sum += v;
    }
    let mean = sum / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Shared gradient-statistics layout for Sobel and Prewitt:
/// per-cell `[mean, std]` (row-major), global `[mean, std]`, then a 16-bin
/// histogram of nonzero magnitudes over `[0, max_response]` normalized over
/// the nonzero count (all-zero planes produce a zero histogram).
fn gradient_features(
    plane: &Plane,
    kx: &[[f64; 3]; 3],
    ky: &[[f64; 3]; 3],
    max_response: f64,
    grid: usize,
) -> Result<Vec<f64>> {
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    if w < grid || h < grid {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} is smaller than the {grid}x{grid} cell grid"
        )));
    }
    let gx = correlate3(plane, kx);
    let gy = correlate3(plane, ky);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| (a * a + b * b).sqrt())
        .collect();

    let mut out = Vec::with_capacity(2 * grid * grid + 2 + 16);
    for (x0, x1, y0, y1) in cell_ranges(w, h, grid) {
        let cell = (y0..y1).flat_map(|y| mag[y * w + x0..y * w + x1].iter().copied());
        let (mean, std) = mean_std(cell.collect::<Vec<_>>().into_iter());
        out.push(mean);
        out.push(std);
    }
    let (gmean, gstd) = mean_std(mag.iter().copied());
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
    Ok(out)
}

/// Sobel gradient statistics. The histogram range tops out at 4√2, the
/// largest magnitude a Sobel pair can produce on a `[0,1]` plane.
pub fn sobel_features(plane: &Plane, grid: usize) -> Result<Vec<f64>> {
    gradient_features(plane, &SOBEL_X, &SOBEL_Y, 4.0 * SQRT2, grid)
}

/// Prewitt gradient statistics. Histogram range `[0, 3√2]`.
pub fn prewitt_features(plane: &Plane, grid: usize) -> Result<Vec<f64>> {
    gradient_features(plane, &PREWITT_X, &PREWITT_Y, 3.0 * SQRT2, grid)
}

/// Canny edge densities: per-cell fraction of edge pixels (row-major)
/// followed by the global fraction.
///
/// The classic chain: Gaussian smoothing at `sigma`, Sobel gradients,
/// non-maximum suppression along the quantized gradient direction, then
/// hysteresis with thresholds `low`/`high` expressed as fractions of the
/// largest surviving magnitude (weak edges are kept only when 8-connected
/// to a strong edge).
pub fn canny_features(
    plane: &Plane,
    sigma: f64,
    low: f64,
    high: f64,
    grid: usize,
) -> Result<Vec<f64>> {
    if !(0.0 < low && low < high && high <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "canny thresholds must satisfy 0 < low < high <= 1, got {low}/{high}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidParam("canny sigma must be positive".into()));
    }
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    if w < grid || h < grid {
        return Err(Error::InvalidParam(format!(
            "plane {w}x{h} is smaller than the {grid}x{grid} cell grid"
        )));
    }
    let smoothed = Plane::new(
        plane.width(),
        plane.height(),
        gaussian_smooth(plane.values(), w, h, sigma),
    )?;
    let gx = correlate3(&smoothed, &SOBEL_X);
    let gy = correlate3(&smoothed, &SOBEL_Y);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| (a * a + b * b).sqrt())
        .collect();

    // Non-maximum suppression along the gradient direction, quantized to
    // four sectors. Out-of-bounds neighbors count as zero magnitude.
    let mut kept = vec![false; mag.len()];
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let m = mag[y as usize * w + x as usize];
            if m == 0.0 {
                continue;
            }
            let mut theta = gy[y as usize * w + x as usize]
                .atan2(gx[y as usize * w + x as usize]);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            let sector = ((theta / (std::f64::consts::PI / 4.0)).round() as usize) % 4;
            let (dx, dy) = match sector {
                0 => (1i64, 0i64),  // gradient ~horizontal
                1 => (1, 1),        // gradient ~down-right
                2 => (0, 1),        // gradient ~vertical
                _ => (1, -1),       // gradient ~up-right
            };
            if m >= at(x + dx, y + dy) && m >= at(x - dx, y - dy) {
                kept[y as usize * w + x as usize] = true;
            }
        }
    }
    let max_kept = mag
        .iter()
        .zip(&kept)
        .filter(|(_, &k)| k)
        .map(|(&m, _)| m)
        .fold(0.0f64, f64::max);

    let mut edge = vec![false; mag.len()];
    if max_kept > 0.0 {
        let t_high = high * max_kept;
        let t_low = low * max_kept;
        let mut queue = VecDeque::new();
        for i in 0..mag.len() {
            if kept[i] && mag[i] >= t_high {
                edge[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !edge[j] && kept[j] && mag[j] >= t_low {
                        edge[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }

    let mut out = Vec::with_capacity(grid * grid + 1);
    for (x0, x1, y0, y1) in cell_ranges(w, h, grid) {
        let total = ((x1 - x0) * (y1 - y0)) as f64;
        let edges = (y0..y1)
            .flat_map(|y| edge[y * w + x0..y * w + x1].iter())
            .filter(|&&e| e)
            .count() as f64;
        out.push(edges / total);
    }
    out.push(edge.iter().filter(|&&e| e).count() as f64 / edge.len() as f64);
    Ok(out)
}

/// Otsu threshold over a 256-bin histogram of `[0,1]` values. Returns the
/// foreground predicate's cut value, or `None` when the histogram is
/// degenerate (no split has positive between-class variance).
fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let mut hist = [0u64; 256];
    for &v in values {
        let bin = ((v * 256.0).floor() as i64).clamp(0, 255) as usize;
        hist[bin] += 1;
    }
    let total = values.len() as f64;
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum::<f64>()
        / total;
    let mut best = (0.0f64, None::<usize>);
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    for t in 0..255 {
        w0 += hist[t] as f64 / total;
        sum0 += t as f64 * hist[t] as f64 / total;
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

/// Moore-neighbor boundary trace of one labeled component, returning the
/// chain-code perimeter (orthogonal steps count 1, diagonal steps √2).
/// Single-pixel components have perimeter 0.
fn trace_perimeter(labels: &[u32], w: usize, h: usize, target: u32, start: usize) -> f64 {
    // Clockwise directions starting East, in image coordinates (y down).
    const DIRS: [(i64, i64); 8] = [
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
    ];
    let is_fg = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && x < w as i64
            && y < h as i64
            && labels[y as usize * w + x as usize] == target
    };
    let (sx, sy) = ((start % w) as i64, (start / w) as i64);
    let mut current = (sx, sy);
    let mut prev_dir: Option<usize> = None;
    let mut start_dir: Option<usize> = None;
    let mut perimeter = 0.0f64;
    // A generous step cap guards against pathological loops; a closed
    // boundary of an n-pixel component never needs more than 4n steps.
    let cap = 4 * labels.iter().filter(|&&l| l == target).count() + 8;
    for _ in 0..cap {
        // Search clockwise starting just past the backtrack direction.
        let back = match prev_dir {
            Some(d) => (d + 4) % 8,
            None => 4, // the scan found the topmost-leftmost pixel: West is background
        };
        let mut next = None;
        for step in 1..=8 {
            let dir = (back + step) % 8;
            let (nx, ny) = (current.0 + DIRS[dir].0, current.1 + DIRS[dir].1);
            if is_fg(nx, ny) {
                next = Some((dir, nx, ny));
                break;
            }
        }
        let Some((dir, nx, ny)) = next else {
            return 0.0; // isolated pixel
        };
        if current == (sx, sy) {
            match start_dir {
                None => start_dir = Some(dir),
                // Jacob's stopping criterion: the boundary is closed once we
                // leave the start pixel in the original direction again.
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

/// Contour statistics of the Otsu-foreground mask:
/// `[log1p(component count), foreground fraction, mean perimeter,
/// max perimeter, mean circularity]`.
///
/// Components are 8-connected; perimeter is the Moore chain-code length and
/// circularity is `4πA/P²` (0 for degenerate perimeters). A plane whose
/// histogram admits no Otsu split (e.g. constant input) reports all zeros.
pub fn contour_features(plane: &Plane) -> Vec<f64> {
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let Some(threshold) = otsu_threshold(plane.values()) else {
        return vec![0.0; 5];
    };
    let fg: Vec<bool> = plane.values().iter().map(|&v| v >= threshold).collect();

    // Label 8-connected components in scan order.
    let mut labels = vec![0u32; fg.len()];
    let mut next_label = 0u32;
    let mut component_start = Vec::new(); // index of topmost-leftmost pixel
    let mut component_area = Vec::new();
    for i in 0..fg.len() {
        if !fg[i] || labels[i] != 0 {
            continue;
        }
        next_label += 1;
        component_start.push(i);
        let mut area = 0u64;
        let mut queue = VecDeque::from([i]);
        labels[i] = next_label;
        while let Some(j) = queue.pop_front() {
            area += 1;
            let (x, y) = ((j % w) as i64, (j / w) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let k = ny as usize * w + nx as usize;
                    if fg[k] && labels[k] == 0 {
                        labels[k] = next_label;
                        queue.push_back(k);
                    }
                }
            }
        }
        component_area.push(area);
    }

    if next_label == 0 {
        return vec![0.0; 5];
    }
    let fg_fraction = fg.iter().filter(|&&f| f).count() as f64 / fg.len() as f64;
    let mut perimeters = Vec::with_capacity(next_label as usize);
    let mut circularities = Vec::with_capacity(next_label as usize);
    for (idx, &start) in component_start.iter().enumerate() {
        let p = trace_perimeter(&labels, w, h, idx as u32 + 1, start);
        perimeters.push(p);
        circularities.push(if p > 0.0 {
            4.0 * std::f64::consts::PI * component_area[idx] as f64 / (p * p)
        } else {
            0.0
        });
    }
    let n = next_label as f64;
    vec![
        (n).ln_1p(),
        fg_fraction,
        perimeters.iter().sum::<f64>() / n,
        perimeters.iter().fold(0.0f64, |a, &b| a.max(b)),
        circularities.iter().sum::<f64>() / n,
    ]
}

/// Harris corner statistics: `[log1p(corner count), mean, std, max]` of the
/// corner response over detected corners.
///
/// The response is `det(M) − k·trace(M)²` of the σ=1 Gaussian-windowed
/// structure tensor built from Sobel gradients. Corners are strict 3×3
/// local maxima with response at least `thresh` times the global maximum;
/// when no positive response exists all features are zero.
pub fn harris_features(plane: &Plane, k: f64, thresh: f64) -> Result<Vec<f64>> {
    if !(0.0 < thresh && thresh <= 1.0) {
        return Err(Error::InvalidParam("harris threshold must lie in (0,1]".into()));
    }
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let ix = correlate3(plane, &SOBEL_X);
    let iy = correlate3(plane, &SOBEL_Y);
    let ixx: Vec<f64> = ix.iter().map(|v| v * v).collect();
    let iyy: Vec<f64> = iy.iter().map(|v| v * v).collect();
    let ixy: Vec<f64> = ix.iter().zip(&iy).map(|(a, b)| a * b).collect();
    let a = gaussian_smooth(&ixx, w, h, 1.0);
    let c = gaussian_smooth(&iyy, w, h, 1.0);
    let b = gaussian_smooth(&ixy, w, h, 1.0);
    let response: Vec<f64> = (0..ix.len())
        .map(|i| a[i] * c[i] - b[i] * b[i] - k * (a[i] + c[i]) * (a[i] + c[i]))
        .collect();
    let r_max = response.iter().fold(f64::MIN, |acc, &v| acc.max(v));
    if r_max <= 0.0 {
        return Ok(vec![0.0; 4]);
    }
    let cut = thresh * r_max;
    let mut corner_values = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let r = response[y as usize * w + x as usize];
            if r < cut {
                continue;
            }
            let mut is_max = true;
            'outer: for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if response[ny as usize * w + nx as usize] >= r {
                        is_max = false;
                        break 'outer;
                    }
                }
            }
            if is_max {
                corner_values.push(r);
            }
        }
    }
    if corner_values.is_empty() {
        return Ok(vec![0.0; 4]);
    }
    let (mean, std) = mean_std(corner_values.iter().copied());
    let max = corner_values.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(vec![(corner_values.len() as f64).ln_1p(), mean, std, max])
}
