//! Procedural four-class image generator for tests and demos.
//!
//! Each class is built to be separable along a different axis, so every
//! family of extractors has something to find:
//!
//! * hue — each class lives in its own hue band (red / green / blue /
//!   yellow), which color histograms and moments pick up;
//! * texture frequency — from near-flat through low-frequency waves to
//!   high-frequency stripes, which LBP, spectra, and wavelets pick up;
//! * blob shape — large ellipses, none, one ring, or many small dots,
//!   which edge, contour, and corner statistics pick up.
//!
//! Every image is a pure function of `(seed, class, index)` via a named
//! RNG stream, so regenerating with the same seed is byte-identical.

use std::fs;
use std::path::Path;

use image::RgbImage;
use rand::Rng;

use coopsight::colorspace::hsv_to_rgb;
use coopsight::rng::seeded_rng;
use coopsight::{Error, Result};

/// Class names in ascending lexicographic order, matching the class
/// indices a dataset scan will assign.
pub const CLASS_NAMES: [&str; 4] = ["blotch", "grain", "marble", "speckle"];

/// Generated images are square at this edge length.
pub const IMG_SIZE: u32 = 128;

const TAU: f64 = std::f64::consts::TAU;

/// Value field plus hue/saturation for one pixel; each class fills this
/// differently.
struct Brush {
    hue: f64,
    sat: f64,
    value: f64,
}

fn paint(img: &mut RgbImage, x: u32, y: u32, b: &Brush) {
    let (r, g, bl) = hsv_to_rgb(b.hue, b.sat.clamp(0.0, 1.0), b.value.clamp(0.05, 1.0));
    img.put_pixel(x, y, image::Rgb([r, g, bl]));
}

/// Large soft-valued field with a handful of big dark ellipses. Red hue
/// band, lowest texture frequency, elliptical shapes.
fn render_blotch(rng: &mut impl Rng) -> RgbImage {
    let hue = 0.00 + rng.random_range(-0.03..0.03);
    let (fx, fy) = (rng.random_range(0.8..1.6), rng.random_range(0.8..1.6));
    let phase = rng.random_range(0.0..TAU);
    let n = IMG_SIZE as f64;
    let mut img = RgbImage::new(IMG_SIZE, IMG_SIZE);
    for y in 0..IMG_SIZE {
        for x in 0..IMG_SIZE {
            let (u, v) = (x as f64 / n, y as f64 / n);
            let value = 0.62 + 0.18 * (TAU * (fx * u + fy * v) + phase).sin();
            paint(&mut img, x, y, &Brush { hue, sat: 0.78, value });
        }
    }
    // Two to four large rotated ellipses, darker and more saturated.
    for _ in 0..rng.random_range(2..=4) {
        let (cx, cy) = (rng.random_range(20.0..n - 20.0), rng.random_range(20.0..n - 20.0));
        let (a, b) = (rng.random_range(18.0..34.0), rng.random_range(12.0..26.0));
        let theta: f64 = rng.random_range(0.0..TAU);
        let (cos_t, sin_t) = (theta.cos(), theta.sin());
        for y in 0..IMG_SIZE {
            for x in 0..IMG_SIZE {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let e = (dx * cos_t + dy * sin_t) / a;
                let f = (-dx * sin_t + dy * cos_t) / b;
                if e * e + f * f <= 1.0 {
                    paint(&mut img, x, y, &Brush { hue, sat: 0.95, value: 0.28 });
                }
            }
        }
    }
    img
}

/// High-frequency oriented stripes plus per-pixel noise. Green hue band,
/// highest texture frequency, no macroscopic shapes.
fn render_grain(rng: &mut impl Rng) -> RgbImage {
    let hue = 0.33 + rng.random_range(-0.03..0.03);
    let freq = rng.random_range(18.0..26.0);
    let theta: f64 = rng.random_range(0.0..TAU);
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let phase = rng.random_range(0.0..TAU);
    let n = IMG_SIZE as f64;
    let mut img = RgbImage::new(IMG_SIZE, IMG_SIZE);
    for y in 0..IMG_SIZE {
        for x in 0..IMG_SIZE {
            let (u, v) = (x as f64 / n, y as f64 / n);
            let stripe = (TAU * freq * (u * cos_t + v * sin_t) + phase).sin();
            let noise: f64 = rng.random_range(-1.0..1.0);
            let value = 0.55 + 0.18 * stripe + 0.16 * noise;
            paint(&mut img, x, y, &Brush { hue, sat: 0.65, value });
        }
    }
    img
}

/// Sinusoidal marbling (medium frequency) with one bright ring. Blue hue
/// band, medium texture frequency, a single annular shape.
fn render_marble(rng: &mut impl Rng) -> RgbImage {
    let hue = 0.62 + rng.random_range(-0.03..0.03);
    let freq = rng.random_range(4.0..7.0);
    let warp_freq = rng.random_range(1.0..3.0);
    let warp_amp = rng.random_range(2.0..4.0);
    let phase = rng.random_range(0.0..TAU);
    let n = IMG_SIZE as f64;
    let mut img = RgbImage::new(IMG_SIZE, IMG_SIZE);
    for y in 0..IMG_SIZE {
        for x in 0..IMG_SIZE {
            let (u, v) = (x as f64 / n, y as f64 / n);
            let band = (TAU * freq * u + warp_amp * (TAU * warp_freq * v).sin() + phase).sin();
            let value = 0.55 + 0.25 * band;
            paint(&mut img, x, y, &Brush { hue, sat: 0.70, value });
        }
    }
    let (cx, cy) = (rng.random_range(40.0..n - 40.0), rng.random_range(40.0..n - 40.0));
    let radius = rng.random_range(28.0..42.0);
    for y in 0..IMG_SIZE {
        for x in 0..IMG_SIZE {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if (d - radius).abs() <= 3.0 {
                paint(&mut img, x, y, &Brush { hue, sat: 0.40, value: 0.95 });
            }
        }
    }
    img
}

/// Flat bright background scattered with small dark dots. Yellow hue band,
/// near-zero background frequency, many tiny circular shapes.
fn render_speckle(rng: &mut impl Rng) -> RgbImage {
    let hue = 0.15 + rng.random_range(-0.02..0.02);
    let base = rng.random_range(0.72..0.80);
    let n = IMG_SIZE as f64;
    let mut img = RgbImage::new(IMG_SIZE, IMG_SIZE);
    for y in 0..IMG_SIZE {
        for x in 0..IMG_SIZE {
            let wobble: f64 = rng.random_range(-0.02..0.02);
            paint(&mut img, x, y, &Brush { hue, sat: 0.80, value: base + wobble });
        }
    }
    for _ in 0..rng.random_range(40..=70) {
        let (cx, cy) = (rng.random_range(4.0..n - 4.0), rng.random_range(4.0..n - 4.0));
        let radius: f64 = rng.random_range(2.0..4.0);
        let r_ceil = radius.ceil() as i64;
        for dy in -r_ceil..=r_ceil {
            for dx in -r_ceil..=r_ceil {
                if ((dx * dx + dy * dy) as f64).sqrt() <= radius {
                    let (px, py) = (cx as i64 + dx, cy as i64 + dy);
                    if px >= 0 && py >= 0 && px < IMG_SIZE as i64 && py < IMG_SIZE as i64 {
                        paint(
                            &mut img,
                            px as u32,
                            py as u32,
                            &Brush { hue, sat: 0.90, value: 0.22 },
                        );
                    }
                }
            }
        }
    }
    img
}

/// Render one image of `class` (an index into [`CLASS_NAMES`]).
pub fn render(class: usize, index: usize, seed: u64) -> RgbImage {
    let name = CLASS_NAMES[class];
    let mut rng = seeded_rng(seed, &format!("synth-{name}-{index}"));
    match class {
        0 => render_blotch(&mut rng),
        1 => render_grain(&mut rng),
        2 => render_marble(&mut rng),
        _ => render_speckle(&mut rng),
    }
}

/// Generate `n_per_class` PNGs per class under `out/{class}/{index:04}.png`.
/// Returns the total number of images written.
pub fn generate(out: &Path, n_per_class: usize, seed: u64) -> Result<usize> {
    if n_per_class == 0 {
        return Err(Error::InvalidParam("n_per_class must be positive".into()));
    }
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        let dir = out.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for index in 0..n_per_class {
            let img = render(class, index, seed);
            let path = dir.join(format!("{index:04}.png"));
            img.save(&path).map_err(|e| Error::format(&path, e.to_string()))?;
        }
    }
    Ok(n_per_class * CLASS_NAMES.len())
}
