//! Color-space conversions and channel decomposition.
//!
//! An input image is an 8-bit RGB raster. From it we derive ten scalar
//! planes — Gray, R, G, B, H, S, V, L, A, B* — each normalized to `[0,1]`
//! so downstream feature extractors can treat every channel uniformly:
//!
//! * RGB components are divided by 255.
//! * Gray is the Rec. 601 luma `0.299 R + 0.587 G + 0.114 B`, divided by 255.
//! * HSV follows the hexcone model; H is stored as angle/360 so a full turn
//!   maps to `[0,1)`. The hue of an achromatic pixel (S = 0) is defined as 0.
//! * CIELAB uses the D65 white point and the 2° standard observer, going
//!   through linearized sRGB. L ∈ [0,100] is stored as L/100; a* and b* are
//!   clamped to [−128,127] and mapped affinely onto `[0,1]`. Consumers that
//!   need raw a*/b* values can invert the affine map exactly.

use crate::error::{Error, Result};

/// Identifier for one of the ten derived channel planes.
///
/// `V` is the HSV value (brightness) channel and `Bstar` is CIELAB b*,
/// distinct from the RGB blue channel `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelId {
    Gray,
    R,
    G,
    B,
    H,
    S,
    V,
    L,
    A,
    Bstar,
}

impl ChannelId {
    /// All ten channels in canonical order.
    pub const ALL: [ChannelId; 10] = [
        ChannelId::Gray,
        ChannelId::R,
        ChannelId::G,
        ChannelId::B,
        ChannelId::H,
        ChannelId::S,
        ChannelId::V,
        ChannelId::L,
        ChannelId::A,
        ChannelId::Bstar,
    ];

    /// Short display name.
    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Gray => "Gray",
            ChannelId::R => "R",
            ChannelId::G => "G",
            ChannelId::B => "B",
            ChannelId::H => "H",
            ChannelId::S => "S",
            ChannelId::V => "V",
            ChannelId::L => "L",
            ChannelId::A => "A",
            ChannelId::Bstar => "B*",
        }
    }

    fn slot(self) -> usize {
        match self {
            ChannelId::Gray => 0,
            ChannelId::R => 1,
            ChannelId::G => 2,
            ChannelId::B => 3,
            ChannelId::H => 4,
            ChannelId::S => 5,
            ChannelId::V => 6,
            ChannelId::L => 7,
            ChannelId::A => 8,
            ChannelId::Bstar => 9,
        }
    }
}

/// An 8-bit RGB image stored as row-major triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterRgb {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterRgb {
    /// Wrap raw row-major RGB triples. `data.len()` must equal `3·w·h` and
    /// both dimensions must be nonzero.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "raster dimensions must be nonzero, got {width}x{height}"
            )));
        }
        let expected = 3 * width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::InvalidParam(format!(
                "raster buffer has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(RasterRgb { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Pixel at `(x, y)` as an `(r, g, b)` triple.
    pub fn get(&self, x: u32, y: u32) -> (u8, u8, u8) {
        debug_assert!(x < self.width && y < self.height);
        let i = 3 * (y as usize * self.width as usize + x as usize);
        (self.data[i], self.data[i + 1], self.data[i + 2])
    }

    /// Raw row-major RGB bytes.
    pub fn bytes(&self) -> &[u8] {
        &self.data
    }
}

/// A single scalar channel plane with values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Plane {
    /// Wrap row-major scalar values. Length must equal `w·h`.
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "plane dimensions must be nonzero, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidParam(format!(
                "plane buffer has {} values, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Apply `f` to every value, producing a new plane of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// The full ten-plane decomposition of one raster.
#[derive(Debug, Clone)]
pub struct Channels {
    planes: Vec<Plane>,
}

impl Channels {
    /// Plane for the given channel.
    pub fn plane(&self, id: ChannelId) -> &Plane {
        &self.planes[id.slot()]
    }
}

/// Rec. 601 luma of an 8-bit pixel, normalized to `[0,1]`.
pub fn gray(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Hexcone HSV of an 8-bit pixel. All three outputs lie in `[0,1]`;
/// H is the hue angle divided by 360° and is 0 for achromatic pixels.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == rf {
        ((gf - bf) / delta).rem_euclid(6.0) / 6.0
    } else if max == gf {
        ((bf - rf) / delta + 2.0) / 6.0
    } else {
        ((rf - gf) / delta + 4.0) / 6.0
    };
    (h, s, v)
}

/// Inverse hexcone conversion; `h` is interpreted as angle/360 and wrapped
/// into `[0,1)`. Components are rounded to the nearest 8-bit level.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (rf, gf, bf) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let to_u8 = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    (to_u8(rf), to_u8(gf), to_u8(bf))
}

/// sRGB gamma expansion of one component in `[0,1]`.
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB → XYZ matrix (D65, 2° observer). Rows sum to the D65 white point,
/// which is also used as the CIELAB reference white so that pure white maps
/// to (L=100, a*≈0, b*≈0).
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const WHITE_X: f64 = SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2];
const WHITE_Y: f64 = SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2];
const WHITE_Z: f64 = SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2];

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELAB coordinates of an 8-bit sRGB pixel under D65.
///
/// Returns raw `(L, a*, b*)` with L in `[0,100]`; a* and b* are unclamped
/// here (the sRGB gamut keeps them well inside ±128).
pub fn rgb_to_lab(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let lin = [
        srgb_to_linear(r as f64 / 255.0),
        srgb_to_linear(g as f64 / 255.0),
        srgb_to_linear(b as f64 / 255.0),
    ];
    let mut xyz = [0.0f64; 3];
    for (row, out) in SRGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / WHITE_X);
    let fy = lab_f(xyz[1] / WHITE_Y);
    let fz = lab_f(xyz[2] / WHITE_Z);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Map raw L to its normalized plane value.
pub fn normalize_l(l: f64) -> f64 {
    l / 100.0
}

/// Map raw a* or b* to its normalized plane value (clamp to [−128,127],
/// then affine onto `[0,1]`).
pub fn normalize_ab(v: f64) -> f64 {
    (v.clamp(-128.0, 127.0) + 128.0) / 255.0
}

/// Exact inverse of [`normalize_ab`] on the clamped range.
pub fn denormalize_ab(v: f64) -> f64 {
    v * 255.0 - 128.0
}

/// Exact inverse of [`normalize_l`].
pub fn denormalize_l(v: f64) -> f64 {
    v * 100.0
}

/// Decompose a raster into all ten normalized channel planes.
pub fn decompose(raster: &RasterRgb) -> Channels {
    let (w, h) = (raster.width(), raster.height());
    let n = w as usize * h as usize;
    let mut planes: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0; n]).collect();
    for i in 0..n {
        let (r, g, b) = (
            raster.data[3 * i],
            raster.data[3 * i + 1],
            raster.data[3 * i + 2],
        );
        let (hh, ss, vv) = rgb_to_hsv(r, g, b);
        let (ll, aa, bb) = rgb_to_lab(r, g, b);
        planes[ChannelId::Gray.slot()][i] = gray(r, g, b);
        planes[ChannelId::R.slot()][i] = r as f64 / 255.0;
        planes[ChannelId::G.slot()][i] = g as f64 / 255.0;
        planes[ChannelId::B.slot()][i] = b as f64 / 255.0;
        planes[ChannelId::H.slot()][i] = hh;
        planes[ChannelId::S.slot()][i] = ss;
        planes[ChannelId::V.slot()][i] = vv;
        planes[ChannelId::L.slot()][i] = normalize_l(ll);
        planes[ChannelId::A.slot()][i] = normalize_ab(aa);
        planes[ChannelId::Bstar.slot()][i] = normalize_ab(bb);
    }
    Channels {
        planes: planes
            .into_iter()
            .map(|data| Plane { width: w, height: h, data })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hsv_of_mixed_pixel() {
        // Hexcone arithmetic by hand: max = B, so
        // H = ((R−G)/Δ + 4)·60° = (4 − 128/255)·60° ≈ 209.88°.
        let (h, s, v) = rgb_to_hsv(0, 128, 255);
        assert!((h - 209.88 / 360.0).abs() < 1e-3, "h = {h}");
        assert!((s - 1.0).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hsv_of_gray_pixel_has_zero_hue_and_saturation() {
        let (h, s, v) = rgb_to_hsv(128, 128, 128);
        assert_eq!(h, 0.0);
        assert_eq!(s, 0.0);
        assert!((v - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn hsv_primary_hues() {
        assert!((rgb_to_hsv(255, 0, 0).0 - 0.0).abs() < 1e-12);
        assert!((rgb_to_hsv(0, 255, 0).0 - 1.0 / 3.0).abs() < 1e-12);
        assert!((rgb_to_hsv(0, 0, 255).0 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lab_reference_colors() {
        let (l, a, b) = rgb_to_lab(255, 0, 0);
        assert!((l - 53.24).abs() < 0.1, "L = {l}");
        assert!((a - 80.09).abs() < 0.1, "a* = {a}");
        assert!((b - 67.20).abs() < 0.1, "b* = {b}");

        let (l, a, b) = rgb_to_lab(255, 255, 255);
        assert!((l - 100.0).abs() < 0.01, "white L = {l}");
        assert!(a.abs() < 0.01 && b.abs() < 0.01, "white a*,b* = {a},{b}");

        let (l, a, b) = rgb_to_lab(0, 0, 0);
        assert!(l.abs() < 1e-9 && a.abs() < 1e-9 && b.abs() < 1e-9);
    }

    #[test]
    fn decompose_two_pixel_raster() {
        let raster = RasterRgb::new(2, 1, vec![255, 0, 0, 0, 255, 0]).unwrap();
        let ch = decompose(&raster);
        assert_eq!(ch.plane(ChannelId::R).values(), &[1.0, 0.0]);
        assert_eq!(ch.plane(ChannelId::G).values(), &[0.0, 1.0]);
        let hplane = ch.plane(ChannelId::H);
        assert!((hplane.get(0, 0) - 0.0).abs() < 1e-12);
        assert!((hplane.get(1, 0) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ch.plane(ChannelId::V).values(), &[1.0, 1.0]);
    }

    #[test]
    fn gray_ramp_collapses_channels() {
        let data: Vec<u8> = (0..=255u32).flat_map(|v| [v as u8, v as u8, v as u8]).collect();
        let raster = RasterRgb::new(256, 1, data).unwrap();
        let ch = decompose(&raster);
        for id in [ChannelId::R, ChannelId::G, ChannelId::B] {
            for (a, b) in ch
                .plane(ChannelId::Gray)
                .values()
                .iter()
                .zip(ch.plane(id).values())
            {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(ch.plane(ChannelId::S).values().iter().all(|&s| s == 0.0));
        assert!(ch.plane(ChannelId::H).values().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn raster_shape_is_validated() {
        assert!(RasterRgb::new(0, 4, vec![]).is_err());
        assert!(RasterRgb::new(2, 2, vec![0; 11]).is_err());
        assert!(RasterRgb::new(2, 2, vec![0; 12]).is_ok());
    }

    proptest! {
        #[test]
        fn hsv_stays_in_unit_range_and_roundtrips(r: u8, g: u8, b: u8) {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            prop_assert!((0.0..1.0).contains(&h) || h == 0.0);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&v));
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            prop_assert!((r as i16 - r2 as i16).abs() <= 1);
            prop_assert!((g as i16 - g2 as i16).abs() <= 1);
            prop_assert!((b as i16 - b2 as i16).abs() <= 1);
        }

        #[test]
        fn all_planes_stay_in_unit_range(pixels in proptest::collection::vec(any::<[u8; 3]>(), 1..64)) {
            let w = pixels.len() as u32;
            let data: Vec<u8> = pixels.iter().flatten().copied().collect();
            let raster = RasterRgb::new(w, 1, data).unwrap();
            let ch = decompose(&raster);
            for id in ChannelId::ALL {
                for &v in ch.plane(id).values() {
                    prop_assert!((0.0..=1.0).contains(&v), "{:?} produced {v}", id);
                }
            }
        }
    }
}
