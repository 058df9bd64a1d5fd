//! The 22-operation augmentation catalog and the strength-to-magnitude rule.
//!
//! Conventions shared by every operation:
//!
//! * channel arithmetic is done in `f64`, rounded half-to-even and clamped to
//!   `[0, 255]` once, at the end of the operation;
//! * geometric operations sample with bilinear interpolation and fill
//!   out-of-bounds locations with mid-gray [`FILL`];
//! * 3x3 kernels use clamp-to-edge padding;
//! * magnitudes are oriented so that larger strength always means a stronger
//!   visual effect.
//!
//! Random draws consumed per operation (in this order): `ResizeCrop` draws the
//! x then y crop offset; `Color`, `Contrast`, `Brightness` and `Sharpness` draw
//! one sign deciding between the factors `m` and `2 - m`. Every other
//! operation consumes nothing.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::image::{RasterImage, Rgb};
use crate::rng;
use crate::MAX_STRENGTH;

/// Out-of-bounds fill for geometric operations.
pub const FILL: Rgb = [128, 128, 128];

/// The catalog of operations, in stable catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Flip,
    Mirror,
    EdgeEnhance,
    Detail,
    Smooth,
    AutoContrast,
    Equalize,
    Invert,
    GaussianBlur,
    ResizeCrop,
    Rotate,
    Posterize,
    Solarize,
    SolarizeAdd,
    Color,
    Contrast,
    Brightness,
    Sharpness,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl OpKind {
    pub const COUNT: usize = 22;

    pub const ALL: [OpKind; Self::COUNT] = [
        OpKind::Flip,
        OpKind::Mirror,
        OpKind::EdgeEnhance,
        OpKind::Detail,
        OpKind::Smooth,
        OpKind::AutoContrast,
        OpKind::Equalize,
        OpKind::Invert,
        OpKind::GaussianBlur,
        OpKind::ResizeCrop,
        OpKind::Rotate,
        OpKind::Posterize,
        OpKind::Solarize,
        OpKind::SolarizeAdd,
        OpKind::Color,
        OpKind::Contrast,
        OpKind::Brightness,
        OpKind::Sharpness,
        OpKind::ShearX,
        OpKind::ShearY,
        OpKind::TranslateX,
        OpKind::TranslateY,
    ];

    /// Zero-based position in the catalog.
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<OpKind> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Flip => "Flip",
            OpKind::Mirror => "Mirror",
            OpKind::EdgeEnhance => "EdgeEnhance",
            OpKind::Detail => "Detail",
            OpKind::Smooth => "Smooth",
            OpKind::AutoContrast => "AutoContrast",
            OpKind::Equalize => "Equalize",
            OpKind::Invert => "Invert",
            OpKind::GaussianBlur => "GaussianBlur",
            OpKind::ResizeCrop => "ResizeCrop",
            OpKind::Rotate => "Rotate",
            OpKind::Posterize => "Posterize",
            OpKind::Solarize => "Solarize",
            OpKind::SolarizeAdd => "SolarizeAdd",
            OpKind::Color => "Color",
            OpKind::Contrast => "Contrast",
            OpKind::Brightness => "Brightness",
            OpKind::Sharpness => "Sharpness",
            OpKind::ShearX => "ShearX",
            OpKind::ShearY => "ShearY",
            OpKind::TranslateX => "TranslateX",
            OpKind::TranslateY => "TranslateY",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        Self::ALL.iter().copied().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    pub fn spec(self) -> OpSpec {
        CATALOG[self.ordinal()]
    }

    pub fn param_class(self) -> ParamClass {
        self.spec().param_class
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    /// Applied unconditionally when selected; magnitude is ignored.
    OnOff,
    Ranged,
}

/// Catalog entry for one operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpSpec {
    pub kind: OpKind,
    pub param_class: ParamClass,
    /// Magnitude at strength 0.
    pub weakest: f64,
    /// Magnitude at the maximum strength.
    pub strongest: f64,
    /// Lower bound of the published parameter range.
    pub table_min: f64,
    /// Upper bound of the published parameter range.
    pub table_max: f64,
    pub unit: &'static str,
}

impl OpSpec {
    const fn on_off(kind: OpKind) -> Self {
        OpSpec {
            kind,
            param_class: ParamClass::OnOff,
            weakest: 0.0,
            strongest: 0.0,
            table_min: 0.0,
            table_max: 0.0,
            unit: "on/off",
        }
    }

    const fn ranged(kind: OpKind, weakest: f64, strongest: f64, table: (f64, f64), unit: &'static str) -> Self {
        OpSpec {
            kind,
            param_class: ParamClass::Ranged,
            weakest,
            strongest,
            table_min: table.0,
            table_max: table.1,
            unit,
        }
    }

    fn contains(&self, v: f64) -> bool {
        let (lo, hi) = if self.weakest <= self.strongest {
            (self.weakest, self.strongest)
        } else {
            (self.strongest, self.weakest)
        };
        v >= lo && v <= hi
    }
}

// Color, Contrast, Brightness and Sharpness store the upper branch of the
// enhancement factor (1.0 ..= 1.9); the per-application sign mirrors it to
// 2 - m, so the table range 0.1 ..= 1.9 is covered symmetrically about 1.0.
static CATALOG: [OpSpec; OpKind::COUNT] = [
    OpSpec::on_off(OpKind::Flip),
    OpSpec::on_off(OpKind::Mirror),
    OpSpec::on_off(OpKind::EdgeEnhance),
    OpSpec::on_off(OpKind::Detail),
    OpSpec::on_off(OpKind::Smooth),
    OpSpec::on_off(OpKind::AutoContrast),
    OpSpec::on_off(OpKind::Equalize),
    OpSpec::on_off(OpKind::Invert),
    OpSpec::ranged(OpKind::GaussianBlur, 0.0, 2.0, (0.0, 2.0), "sigma (pixels)"),
    OpSpec::ranged(OpKind::ResizeCrop, 1.0, 1.3, (1.0, 1.3), "scale factor"),
    OpSpec::ranged(OpKind::Rotate, 0.0, 30.0, (0.0, 30.0), "degrees"),
    OpSpec::ranged(OpKind::Posterize, 0.0, 4.0, (0.0, 4.0), "bits removed"),
    OpSpec::ranged(OpKind::Solarize, 256.0, 0.0, (0.0, 256.0), "threshold"),
    OpSpec::ranged(OpKind::SolarizeAdd, 0.0, 110.0, (0.0, 110.0), "addend"),
    OpSpec::ranged(OpKind::Color, 1.0, 1.9, (0.1, 1.9), "factor"),
    OpSpec::ranged(OpKind::Contrast, 1.0, 1.9, (0.1, 1.9), "factor"),
    OpSpec::ranged(OpKind::Brightness, 1.0, 1.9, (0.1, 1.9), "factor"),
    OpSpec::ranged(OpKind::Sharpness, 1.0, 1.9, (0.1, 1.9), "factor"),
    OpSpec::ranged(OpKind::ShearX, 0.0, 0.3, (0.0, 0.3), "shear"),
    OpSpec::ranged(OpKind::ShearY, 0.0, 0.3, (0.0, 0.3), "shear"),
    OpSpec::ranged(OpKind::TranslateX, 0.0, 100.0, (0.0, 100.0), "pixels"),
    OpSpec::ranged(OpKind::TranslateY, 0.0, 100.0, (0.0, 100.0), "pixels"),
];

/// The full catalog in stable order.
pub fn op_catalog() -> &'static [OpSpec] {
    &CATALOG
}

/// Magnitude handed to [`apply_op`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    /// Marker for on/off operations.
    Unit,
    Value(f64),
}

impl Magnitude {
    pub fn value(self) -> Option<f64> {
        match self {
            Magnitude::Unit => None,
            Magnitude::Value(v) => Some(v),
        }
    }
}

/// `m_k(s)` on the default 30-level grid.
pub fn magnitude(kind: OpKind, strength: u32) -> Result<Magnitude> {
    magnitude_with_levels(kind, strength, MAX_STRENGTH)
}

/// Linear magnitude rule: `weakest + (strongest - weakest) * s / levels`.
pub fn magnitude_with_levels(kind: OpKind, strength: u32, levels: u32) -> Result<Magnitude> {
    if levels == 0 {
        return Err(Error::InvalidParameter("magnitude levels must be positive".into()));
    }
    if strength > levels {
        return Err(Error::StrengthOutOfRange { strength, max: levels });
    }
    let spec = kind.spec();
    Ok(match spec.param_class {
        ParamClass::OnOff => Magnitude::Unit,
        ParamClass::Ranged => Magnitude::Value(
            spec.weakest + (spec.strongest - spec.weakest) * strength as f64 / levels as f64,
        ),
    })
}

/// Apply one operation at magnitude `m`.
///
/// Fails only when `m` does not belong to `kind` (a value outside its range,
/// or a missing value for a ranged operation).
pub fn apply_op<R: RngCore + ?Sized>(
    img: &RasterImage,
    kind: OpKind,
    m: Magnitude,
    rng: &mut R,
) -> Result<RasterImage> {
    let spec = kind.spec();
    let v = match (spec.param_class, m) {
        (ParamClass::OnOff, _) => 0.0,
        (ParamClass::Ranged, Magnitude::Value(v)) if spec.contains(v) => v,
        (ParamClass::Ranged, other) => {
            return Err(Error::InvalidParameter(alloc::format!(
                "magnitude {other:?} is not valid for {kind}"
            )))
        }
    };

    Ok(match kind {
        OpKind::Flip => flip(img),
        OpKind::Mirror => mirror(img),
        OpKind::EdgeEnhance => convolve3x3(img, &EDGE_ENHANCE, 2.0),
        OpKind::Detail => convolve3x3(img, &DETAIL, 6.0),
        OpKind::Smooth => convolve3x3(img, &SMOOTH, 13.0),
        OpKind::AutoContrast => autocontrast(img),
        OpKind::Equalize => equalize(img),
        OpKind::Invert => map_channels(img, |c| 255 - c),
        OpKind::GaussianBlur => gaussian_blur(img, v),
        OpKind::ResizeCrop => resize_crop(img, v, rng),
        OpKind::Rotate => rotate(img, v),
        OpKind::Posterize => posterize(img, v),
        OpKind::Solarize => map_channels(img, |c| if c as f64 >= v { 255 - c } else { c }),
        OpKind::SolarizeAdd => {
            map_channels(img, |c| if c < 128 { round_channel(c as f64 + v) } else { c })
        }
        OpKind::Color => {
            let f = signed_factor(v, rng);
            blend_per_pixel(img, f, |p| {
                let g = luma(p);
                [g; 3]
            })
        }
        OpKind::Contrast => {
            let f = signed_factor(v, rng);
            let mean = img.pixels().iter().map(|&p| luma(p)).sum::<f64>() / img.pixels().len() as f64;
            blend_per_pixel(img, f, |_| [mean; 3])
        }
        OpKind::Brightness => {
            let f = signed_factor(v, rng);
            blend_per_pixel(img, f, |_| [0.0; 3])
        }
        OpKind::Sharpness => {
            let f = signed_factor(v, rng);
            let smooth = convolve3x3_f64(img, &SMOOTH, 13.0);
            let pixels = img
                .pixels()
                .iter()
                .zip(&smooth)
                .map(|(p, s)| {
                    core::array::from_fn(|ch| round_channel(s[ch] + f * (p[ch] as f64 - s[ch])))
                })
                .collect();
            img.with_pixels(pixels)
        }
        OpKind::ShearX => warp(img, Edge::Fill, |x, y| (x - v * y, y)),
        OpKind::ShearY => warp(img, Edge::Fill, |x, y| (x, y - v * x)),
        OpKind::TranslateX => {
            let d = v.min(img.width() as f64 - 1.0);
            warp(img, Edge::Fill, |x, y| (x - d, y))
        }
        OpKind::TranslateY => {
            let d = v.min(img.height() as f64 - 1.0);
            warp(img, Edge::Fill, |x, y| (x, y - d))
        }
    })
}

/// Round half-to-even and clamp to a channel value.
#[inline]
pub fn round_channel(v: f64) -> u8 {
    libm::rint(v).clamp(0.0, 255.0) as u8
}

#[inline]
fn luma(p: Rgb) -> f64 {
    (299.0 * p[0] as f64 + 587.0 * p[1] as f64 + 114.0 * p[2] as f64) / 1000.0
}

fn signed_factor<R: RngCore + ?Sized>(m: f64, rng: &mut R) -> f64 {
    if rng::bernoulli(rng, 0.5) {
        m
    } else {
        2.0 - m
    }
}

fn map_channels(img: &RasterImage, f: impl Fn(u8) -> u8) -> RasterImage {
    let pixels = img.pixels().iter().map(|p| [f(p[0]), f(p[1]), f(p[2])]).collect();
    img.with_pixels(pixels)
}

/// `base + f * (pixel - base)` per channel.
fn blend_per_pixel(img: &RasterImage, f: f64, base: impl Fn(Rgb) -> [f64; 3]) -> RasterImage {
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| {
            let b = base(p);
            core::array::from_fn(|ch| round_channel(b[ch] + f * (p[ch] as f64 - b[ch])))
        })
        .collect();
    img.with_pixels(pixels)
}

fn flip(img: &RasterImage) -> RasterImage {
    let w = img.width() as usize;
    let pixels = img.pixels().chunks_exact(w).rev().flatten().copied().collect();
    img.with_pixels(pixels)
}

fn mirror(img: &RasterImage) -> RasterImage {
    let w = img.width() as usize;
    let pixels = img
        .pixels()
        .chunks_exact(w)
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    img.with_pixels(pixels)
}

const EDGE_ENHANCE: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [-1.0, 10.0, -1.0], [-1.0, -1.0, -1.0]];
const DETAIL: [[f64; 3]; 3] = [[0.0, -1.0, 0.0], [-1.0, 10.0, -1.0], [0.0, -1.0, 0.0]];
const SMOOTH: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]];

fn convolve3x3_f64(img: &RasterImage, kernel: &[[f64; 3]; 3], divisor: f64) -> Vec<[f64; 3]> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    let p = img.get_clamped(x + kx as i64 - 1, y + ky as i64 - 1);
                    for ch in 0..3 {
                        acc[ch] += k * p[ch] as f64;
                    }
                }
            }
            out.push(acc.map(|a| a / divisor));
        }
    }
    out
}

fn convolve3x3(img: &RasterImage, kernel: &[[f64; 3]; 3], divisor: f64) -> RasterImage {
    let pixels = convolve3x3_f64(img, kernel, divisor)
        .into_iter()
        .map(|p| p.map(round_channel))
        .collect();
    img.with_pixels(pixels)
}

/// Per-channel linear stretch of `[min, max]` onto `[0, 255]`.
fn autocontrast(img: &RasterImage) -> RasterImage {
    let mut lo = [255u8; 3];
    let mut hi = [0u8; 3];
    for p in img.pixels() {
        for ch in 0..3 {
            lo[ch] = lo[ch].min(p[ch]);
            hi[ch] = hi[ch].max(p[ch]);
        }
    }
    let luts: [[u8; 256]; 3] = core::array::from_fn(|ch| {
        let mut lut = [0u8; 256];
        for (c, slot) in lut.iter_mut().enumerate() {
            *slot = if hi[ch] <= lo[ch] {
                c as u8
            } else {
                let scale = 255.0 / (hi[ch] - lo[ch]) as f64;
                round_channel((c as f64 - lo[ch] as f64) * scale)
            };
        }
        lut
    });
    apply_luts(img, &luts)
}

/// Histogram equalization per channel, with the cumulative-step lookup table
/// used by the common imaging libraries.
fn equalize(img: &RasterImage) -> RasterImage {
    let hist = img.histogram();
    let luts: [[u8; 256]; 3] = core::array::from_fn(|ch| {
        let h = &hist[ch];
        let mut lut = [0u8; 256];
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = i as u8;
        }
        let last_nonzero = h.iter().rposition(|&c| c > 0).map(|i| h[i]).unwrap_or(0);
        let total: u32 = h.iter().sum();
        let step = (total - last_nonzero) / 255;
        if step == 0 {
            return lut;
        }
        let mut n = step / 2;
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (n / step).min(255) as u8;
            n += h[i];
        }
        lut
    });
    apply_luts(img, &luts)
}

fn apply_luts(img: &RasterImage, luts: &[[u8; 256]; 3]) -> RasterImage {
    let pixels = img
        .pixels()
        .iter()
        .map(|p| [luts[0][p[0] as usize], luts[1][p[1] as usize], luts[2][p[2] as usize]])
        .collect();
    img.with_pixels(pixels)
}

fn posterize(img: &RasterImage, bits_removed: f64) -> RasterImage {
    let bits = libm::floor(bits_removed).clamp(0.0, 8.0) as u32;
    let mask = (0xFFu32 << bits) as u8;
    map_channels(img, |c| c & mask)
}

/// Separable Gaussian with radius `ceil(3 sigma)` and clamp-to-edge padding.
fn gaussian_blur(img: &RasterImage, sigma: f64) -> RasterImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = libm::ceil(3.0 * sigma) as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);

    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut horizontal = vec![[0.0f64; 3]; img.pixels().len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, wt) in weights.iter().enumerate() {
                let p = img.get_clamped(x + k as i64 - radius, y);
                for ch in 0..3 {
                    acc[ch] += wt * p[ch] as f64;
                }
            }
            horizontal[(y * w + x) as usize] = acc;
        }
    }
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, wt) in weights.iter().enumerate() {
                let sy = (y + k as i64 - radius).clamp(0, h - 1);
                let p = horizontal[(sy * w + x) as usize];
                for ch in 0..3 {
                    acc[ch] += wt * p[ch];
                }
            }
            pixels.push(acc.map(round_channel));
        }
    }
    img.with_pixels(pixels)
}

/// Counter-clockwise rotation about the image center.
fn rotate(img: &RasterImage, degrees: f64) -> RasterImage {
    let theta = degrees.to_radians();
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    warp(img, Edge::Fill, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + dx * cos - dy * sin, cy + dx * sin + dy * cos)
    })
}

/// Upscale by `scale`, then crop a window of the original size at a random
/// integer offset inside the enlarged frame.
fn resize_crop<R: RngCore + ?Sized>(img: &RasterImage, scale: f64, rng: &mut R) -> RasterImage {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let sw = libm::floor(w * scale).max(w);
    let sh = libm::floor(h * scale).max(h);
    let ox = rng::below(rng, (sw - w) as u64 + 1) as f64;
    let oy = rng::below(rng, (sh - h) as u64 + 1) as f64;
    let (rx, ry) = (w / sw, h / sh);
    warp(img, Edge::Clamp, |x, y| {
        ((x + ox + 0.5) * rx - 0.5, (y + oy + 0.5) * ry - 0.5)
    })
}

#[derive(Clone, Copy)]
enum Edge {
    Fill,
    Clamp,
}

/// Inverse-mapped resampling: output `(x, y)` reads the source at `map(x, y)`.
fn warp(img: &RasterImage, edge: Edge, map: impl Fn(f64, f64) -> (f64, f64)) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map(x as f64, y as f64);
            pixels.push(bilinear(img, sx, sy, edge).map(round_channel));
        }
    }
    img.with_pixels(pixels)
}

fn bilinear(img: &RasterImage, sx: f64, sy: f64, edge: Edge) -> [f64; 3] {
    let x0 = libm::floor(sx);
    let y0 = libm::floor(sy);
    let fx = sx - x0;
    let fy = sy - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (w, h) = (img.width() as i64, img.height() as i64);
    let fetch = |x: i64, y: i64| -> [f64; 3] {
        let p = match edge {
            Edge::Clamp => img.get_clamped(x, y),
            Edge::Fill if x < 0 || y < 0 || x >= w || y >= h => FILL,
            Edge::Fill => img.get(x as u32, y as u32),
        };
        p.map(|c| c as f64)
    };
    let mut out = [0.0; 3];
    let corners = [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ];
    for (dx, dy, wt) in corners {
        if wt == 0.0 {
            continue;
        }
        let p = fetch(x0 + dx, y0 + dy);
        for ch in 0..3 {
            out[ch] += wt * p[ch];
        }
    }
    out
}
