//! 8-bit RGB raster, the sample type every augmentation acts on.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::SampleId;

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidImage { width, height, pixels: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width as usize * height as usize])
    }

    /// Build from packed `RGBRGB...` bytes.
    pub fn from_rgb_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 3 != 0 {
            return Err(Error::InvalidImage { width, height, pixels: bytes.len() / 3 });
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    /// Build by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel with coordinates clamped to the image bounds.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> Rgb {
        let cx = x.clamp(0, self.width as i64 - 1) as u32;
        let cy = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(cx, cy)
    }

    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.iter().copied()).collect()
    }

    /// Per-channel histogram.
    pub fn histogram(&self) -> [[u32; 256]; 3] {
        let mut h = [[0u32; 256]; 3];
        for p in &self.pixels {
            for ch in 0..3 {
                h[ch][p[ch] as usize] += 1;
            }
        }
        h
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<Rgb>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self { width: self.width, height: self.height, pixels }
    }
}

/// Random-access lookup of images by sample id.
pub trait ImageSource {
    fn image(&self, id: SampleId) -> Option<&RasterImage>;
}

impl ImageSource for [RasterImage] {
    fn image(&self, id: SampleId) -> Option<&RasterImage> {
        self.get(id)
    }
}

impl ImageSource for Vec<RasterImage> {
    fn image(&self, id: SampleId) -> Option<&RasterImage> {
        self.get(id)
    }
}

impl ImageSource for BTreeMap<SampleId, RasterImage> {
    fn image(&self, id: SampleId) -> Option<&RasterImage> {
        self.get(&id)
    }
}

/// A source with no images, for drivers whose callbacks never look at pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoImages;

impl ImageSource for NoImages {
    fn image(&self, _id: SampleId) -> Option<&RasterImage> {
        None
    }
}
