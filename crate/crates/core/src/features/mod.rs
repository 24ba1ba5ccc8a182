//! Feature extraction across color spaces.
//!
//! A *feature group* pairs a color space (RGB, HSV, LAB) with one of sixteen
//! extractors and is named `"{SPACE}-{NAME}"`, e.g. `"LAB-CM"` or
//! `"HSV-LBP"`. Color extractors consume all three planes of their space;
//! texture and shape extractors consume the space's designated luminance
//! plane (Gray for RGB, V for HSV, L for LAB). Every extractor returns a
//! fixed-width vector of finite `f64` values whose width depends only on
//! [`FeatureParams`] and the raster dimensions.

pub mod color;
mod cooccur;
pub mod shape;
pub mod texture;

use serde::{Deserialize, Serialize};

use crate::colorspace::{ChannelId, Channels, Plane};
use crate::error::{Error, Result};

pub use cooccur::{cooccurrence_matrix, haralick_stats, quantize_plane};

/// Tunable parameters shared by all extractors.
///
/// The defaults reproduce the reference configuration: 32-bin color
/// histograms, a 4×4 local-histogram grid with 8 bins, 8-level co-occurrence
/// quantization, 8-point radius-1 LBP, 8-px HOG cells with 9 unsigned
/// orientation bins and 2×2-cell blocks, Gabor filters at three frequencies
/// and four orientations, 32 radial spectrum annuli, a 2-level Haar
/// decomposition, and a 4×4 grid for shape statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub ch_bins: usize,
    pub lch_grid: usize,
    pub lch_bins: usize,
    pub ccm_levels: usize,
    pub ccm_offsets: Vec<(i32, i32)>,
    pub glcm_levels: usize,
    pub glcm_offsets: Vec<(i32, i32)>,
    pub lbp_points: usize,
    pub lbp_radius: f64,
    pub hog_cell: usize,
    pub hog_orientations: usize,
    pub hog_block: usize,
    pub gabor_freqs: Vec<f64>,
    pub gabor_orientations: usize,
    pub fft_radial_bins: usize,
    pub wavelet_levels: usize,
    pub shape_grid: usize,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub harris_k: f64,
    pub harris_thresh: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            ch_bins: 32,
            lch_grid: 4,
            lch_bins: 8,
            ccm_levels: 8,
            ccm_offsets: vec![(1, 0), (0, 1)],
            glcm_levels: 8,
            glcm_offsets: vec![(1, 0), (0, 1), (1, 1), (1, -1)],
            lbp_points: 8,
            lbp_radius: 1.0,
            hog_cell: 8,
            hog_orientations: 9,
            hog_block: 2,
            gabor_freqs: vec![0.1, 0.2, 0.3],
            gabor_orientations: 4,
            fft_radial_bins: 32,
            wavelet_levels: 2,
            shape_grid: 4,
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.3,
            harris_k: 0.04,
            harris_thresh: 0.01,
        }
    }
}

impl FeatureParams {
    /// Reject parameter combinations outside their documented domains.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ch_bins", self.ch_bins),
            ("lch_grid", self.lch_grid),
            ("lch_bins", self.lch_bins),
            ("lbp_points", self.lbp_points),
            ("hog_cell", self.hog_cell),
            ("hog_orientations", self.hog_orientations),
            ("hog_block", self.hog_block),
            ("gabor_orientations", self.gabor_orientations),
            ("fft_radial_bins", self.fft_radial_bins),
            ("wavelet_levels", self.wavelet_levels),
            ("shape_grid", self.shape_grid),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidParam(format!("{name} must be positive")));
            }
        }
        if self.ccm_levels < 2 || self.glcm_levels < 2 {
            return Err(Error::InvalidParam("co-occurrence levels must be at least 2".into()));
        }
        if self.ccm_offsets.is_empty() || self.glcm_offsets.is_empty() {
            return Err(Error::InvalidParam("co-occurrence offset lists must be nonempty".into()));
        }
        if self
            .ccm_offsets
            .iter()
            .chain(&self.glcm_offsets)
            .any(|&(dx, dy)| dx == 0 && dy == 0)
        {
            return Err(Error::InvalidParam("co-occurrence offsets must be nonzero".into()));
        }
        if self.lbp_radius <= 0.0 {
            return Err(Error::InvalidParam("lbp_radius must be positive".into()));
        }
        if self.gabor_freqs.is_empty() || self.gabor_freqs.iter().any(|&f| f <= 0.0 || f > 0.5) {
            return Err(Error::InvalidParam(
                "gabor_freqs must be nonempty with frequencies in (0, 0.5]".into(),
            ));
        }
        if !(0.0 < self.canny_low && self.canny_low < self.canny_high && self.canny_high <= 1.0) {
            return Err(Error::InvalidParam(
                "canny thresholds must satisfy 0 < low < high <= 1".into(),
            ));
        }
        if self.canny_sigma <= 0.0 {
            return Err(Error::InvalidParam("canny_sigma must be positive".into()));
        }
        if !(0.0 < self.harris_thresh && self.harris_thresh <= 1.0) {
            return Err(Error::InvalidParam("harris_thresh must lie in (0,1]".into()));
        }
        Ok(())
    }
}

/// Color space a feature group is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Space {
    Rgb,
    Hsv,
    Lab,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Rgb, Space::Hsv, Space::Lab];

    pub fn name(self) -> &'static str {
        match self {
            Space::Rgb => "RGB",
            Space::Hsv => "HSV",
            Space::Lab => "LAB",
        }
    }

    pub fn parse(s: &str) -> Result<Space> {
        match s.to_ascii_uppercase().as_str() {
            "RGB" => Ok(Space::Rgb),
            "HSV" => Ok(Space::Hsv),
            "LAB" => Ok(Space::Lab),
            other => Err(Error::UnknownGroup(format!("unknown color space {other:?}"))),
        }
    }

    /// The three channel planes of this space, in canonical order.
    pub fn channel_ids(self) -> [ChannelId; 3] {
        match self {
            Space::Rgb => [ChannelId::R, ChannelId::G, ChannelId::B],
            Space::Hsv => [ChannelId::H, ChannelId::S, ChannelId::V],
            Space::Lab => [ChannelId::L, ChannelId::A, ChannelId::Bstar],
        }
    }

    /// Designated plane for texture and shape extractors.
    pub fn luminance_id(self) -> ChannelId {
        match self {
            Space::Rgb => ChannelId::Gray,
            Space::Hsv => ChannelId::V,
            Space::Lab => ChannelId::L,
        }
    }
}

/// Broad family an extractor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Color,
    Texture,
    Shape,
}

/// One of the sixteen feature extractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Extractor {
    /// Per-channel color histogram.
    Ch,
    /// First-order color moments (mean, std).
    Cm1,
    /// Four color moments (mean, std, skewness, excess kurtosis).
    Cm2,
    /// Local (gridded) color histogram.
    Lch,
    /// Per-channel co-occurrence Haralick statistics.
    Ccm,
    /// Gray-level co-occurrence Haralick statistics.
    Glcm,
    /// Uniform local binary pattern histogram.
    Lbp,
    /// Histogram of oriented gradients.
    Hog,
    /// Gabor filter-bank response statistics.
    Gabor,
    /// Fourier spectrum statistics.
    Fft,
    /// Haar wavelet subband statistics.
    Wavelet,
    /// Sobel gradient statistics.
    Sobel,
    /// Prewitt gradient statistics.
    Prewitt,
    /// Canny edge densities.
    Canny,
    /// Connected-component contour statistics.
    Contour,
    /// Harris corner statistics.
    Harris,
}

impl Extractor {
    /// All extractors in canonical (column-ordering) order.
    pub const ALL: [Extractor; 16] = [
        Extractor::Ch,
        Extractor::Cm1,
        Extractor::Cm2,
        Extractor::Lch,
        Extractor::Ccm,
        Extractor::Glcm,
        Extractor::Lbp,
        Extractor::Hog,
        Extractor::Gabor,
        Extractor::Fft,
        Extractor::Wavelet,
        Extractor::Sobel,
        Extractor::Prewitt,
        Extractor::Canny,
        Extractor::Contour,
        Extractor::Harris,
    ];

    /// Short name used in group identifiers and report rows.
    pub fn name(self) -> &'static str {
        match self {
            Extractor::Ch => "CH",
            Extractor::Cm1 => "CM1",
            Extractor::Cm2 => "CM",
            Extractor::Lch => "LCH",
            Extractor::Ccm => "CCM",
            Extractor::Glcm => "GLCM",
            Extractor::Lbp => "LBP",
            Extractor::Hog => "HOG",
            Extractor::Gabor => "GF",
            Extractor::Fft => "FT",
            Extractor::Wavelet => "WT",
            Extractor::Sobel => "SOBEL",
            Extractor::Prewitt => "PREWITT",
            Extractor::Canny => "CANNY",
            Extractor::Contour => "CONTOUR",
            Extractor::Harris => "HARRIS",
        }
    }

    pub fn parse(s: &str) -> Result<Extractor> {
        let upper = s.to_ascii_uppercase();
        Extractor::ALL
            .into_iter()
            .find(|e| e.name() == upper)
            .ok_or_else(|| Error::UnknownGroup(format!("unknown extractor {s:?}")))
    }

    pub fn family(self) -> Family {
        match self {
            Extractor::Ch | Extractor::Cm1 | Extractor::Cm2 | Extractor::Lch | Extractor::Ccm => {
                Family::Color
            }
            Extractor::Glcm
            | Extractor::Lbp
            | Extractor::Hog
            | Extractor::Gabor
            | Extractor::Fft
            | Extractor::Wavelet => Family::Texture,
            Extractor::Sobel
            | Extractor::Prewitt
            | Extractor::Canny
            | Extractor::Contour
            | Extractor::Harris => Family::Shape,
        }
    }

    /// Output width for planes of the given dimensions.
    pub fn width(self, params: &FeatureParams, dims: (u32, u32)) -> usize {
        match self {
            Extractor::Ch => 3 * params.ch_bins,
            Extractor::Cm1 => 6,
            Extractor::Cm2 => 12,
            Extractor::Lch => 3 * params.lch_grid * params.lch_grid * params.lch_bins,
            Extractor::Ccm => 3 * 5 * params.ccm_offsets.len(),
            Extractor::Glcm => 5 * params.glcm_offsets.len(),
            Extractor::Lbp => params.lbp_points * (params.lbp_points - 1) + 3,
            Extractor::Hog => {
                let cx = dims.0 as usize / params.hog_cell;
                let cy = dims.1 as usize / params.hog_cell;
                let bx = cx.saturating_sub(params.hog_block - 1);
                let by = cy.saturating_sub(params.hog_block - 1);
                bx * by * params.hog_block * params.hog_block * params.hog_orientations
            }
            Extractor::Gabor => 2 * params.gabor_freqs.len() * params.gabor_orientations,
            Extractor::Fft => params.fft_radial_bins + 3,
            Extractor::Wavelet => 3 * (3 * params.wavelet_levels + 1),
            Extractor::Sobel | Extractor::Prewitt => {
                2 * params.shape_grid * params.shape_grid + 2 + 16
            }
            Extractor::Canny => params.shape_grid * params.shape_grid + 1,
            Extractor::Contour => 5,
            Extractor::Harris => 4,
        }
    }
}

/// A (space, extractor) pair — the unit of feature-matrix column grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub space: Space,
    pub extractor: Extractor,
}

impl FeatureGroup {
    pub fn new(space: Space, extractor: Extractor) -> Self {
        FeatureGroup { space, extractor }
    }

    /// Canonical `"{SPACE}-{NAME}"` identifier, e.g. `"HSV-LBP"`.
    pub fn name(&self) -> String {
        format!("{}-{}", self.space.name(), self.extractor.name())
    }

    /// Parse a `"{SPACE}-{NAME}"` identifier.
    pub fn parse(s: &str) -> Result<FeatureGroup> {
        let (space, name) = s
            .split_once('-')
            .ok_or_else(|| Error::UnknownGroup(format!("group {s:?} is not SPACE-NAME")))?;
        Ok(FeatureGroup { space: Space::parse(space)?, extractor: Extractor::parse(name)? })
    }

    pub fn width(&self, params: &FeatureParams, dims: (u32, u32)) -> usize {
        self.extractor.width(params, dims)
    }
}

/// A named feature vector produced by one extractor on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub group: FeatureGroup,
    pub values: Vec<f64>,
}

/// Moment planes for a space: raw CIELAB values for LAB, the normalized
/// planes otherwise. Color moments are defined on physical channel values,
/// and L/a*/b* live on their native scales.
fn moment_planes(channels: &Channels, space: Space) -> [Plane; 3] {
    let [c0, c1, c2] = space.channel_ids();
    let p0 = channels.plane(c0);
    let p1 = channels.plane(c1);
    let p2 = channels.plane(c2);
    match space {
        Space::Lab => [
            p0.map(crate::colorspace::denormalize_l),
            p1.map(crate::colorspace::denormalize_ab),
            p2.map(crate::colorspace::denormalize_ab),
        ],
        _ => [p0.clone(), p1.clone(), p2.clone()],
    }
}

/// Run one extractor on a decomposed image.
pub fn extract_group(
    channels: &Channels,
    group: FeatureGroup,
    params: &FeatureParams,
) -> Result<FeatureVector> {
    let ids = group.space.channel_ids();
    let planes = [
        channels.plane(ids[0]),
        channels.plane(ids[1]),
        channels.plane(ids[2]),
    ];
    let lum = channels.plane(group.space.luminance_id());
    let values = match group.extractor {
        Extractor::Ch => color::color_histogram(&planes, params.ch_bins)?,
        Extractor::Cm1 => {
            let planes = moment_planes(channels, group.space);
            color::color_moments1(&[&planes[0], &planes[1], &planes[2]])
        }
        Extractor::Cm2 => {
            let planes = moment_planes(channels, group.space);
            color::color_moments2(&[&planes[0], &planes[1], &planes[2]])
        }
        Extractor::Lch => color::local_color_histogram(&planes, params.lch_grid, params.lch_bins)?,
        Extractor::Ccm => {
            color::color_cooccurrence(&planes, params.ccm_levels, &params.ccm_offsets)?
        }
        Extractor::Glcm => texture::glcm_features(lum, params.glcm_levels, &params.glcm_offsets)?,
        Extractor::Lbp => texture::lbp_histogram(lum, params.lbp_points, params.lbp_radius)?,
        Extractor::Hog => texture::hog_descriptor(
            lum,
            params.hog_cell,
            params.hog_orientations,
            params.hog_block,
        )?,
        Extractor::Gabor => {
            texture::gabor_features(lum, &params.gabor_freqs, params.gabor_orientations)?
        }
        Extractor::Fft => texture::fft_features(lum, params.fft_radial_bins)?,
        Extractor::Wavelet => texture::wavelet_features(lum, params.wavelet_levels)?,
        Extractor::Sobel => shape::sobel_features(lum, params.shape_grid)?,
        Extractor::Prewitt => shape::prewitt_features(lum, params.shape_grid)?,
        Extractor::Canny => shape::canny_features(
            lum,
            params.canny_sigma,
            params.canny_low,
            params.canny_high,
            params.shape_grid,
        )?,
        Extractor::Contour => shape::contour_features(lum),
        Extractor::Harris => {
            shape::harris_features(lum, params.harris_k, params.harris_thresh)?
        }
    };
    debug_assert_eq!(
        values.len(),
        group.width(params, (planes[0].width(), planes[0].height())),
        "width contract violated by {}",
        group.name()
    );
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "extractor {} produced non-finite value {bad}",
            group.name()
        )));
    }
    Ok(FeatureVector { group, values })
}
