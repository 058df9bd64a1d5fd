//! PNG encoding and decoding for [`RasterImage`].

use std::io::Cursor;

use cudaug_core::RasterImage;
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

/// Decode PNG bytes to RGB8. Alpha is dropped, gray is expanded, 16-bit
/// channels are narrowed.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?;
    let rgb = img.into_rgb8();
    RasterImage::from_rgb_bytes(rgb.width(), rgb.height(), rgb.as_raw()).map_err(|e| e.to_string())
}

/// Encode as 8-bit RGB PNG with fixed encoder settings.
pub fn encode_png(img: &RasterImage) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(Cursor::new(&mut out), CompressionType::Default, FilterType::Adaptive)
        .write_image(&img.to_rgb_bytes(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .expect("encoding into memory cannot fail for a valid image");
    out
}
