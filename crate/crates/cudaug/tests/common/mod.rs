#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cudaug::codec::encode_png;
use cudaug_core::rng::{self, stream};
use cudaug_core::{apply_op, magnitude, OpKind, RasterImage};

/// Smooth gradients plus a few hard edges, so every op has something to act on.
pub fn test_card(w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| {
        let r = (x * 255 / w.max(2).saturating_sub(1).max(1)) as u8;
        let g = (y * 255 / h.max(2).saturating_sub(1).max(1)) as u8;
        let b = if (x / 4 + y / 4) % 2 == 0 { 40 } else { 200 };
        let ring = ((x as i64 - w as i64 / 2).pow(2) + (y as i64 - h as i64 / 2).pow(2)) < (w.min(h) as i64 / 3).pow(2);
        if ring { [255 - r, g / 2, 255 - b] } else { [r, g, b] }
    })
    .unwrap()
}

pub fn random_image(seed: u64, w: u32, h: u32) -> RasterImage {
    let mut r = stream(seed);
    RasterImage::from_fn(w, h, |_, _| {
        let v = rng::below(&mut r, 1 << 24);
        [v as u8, (v >> 8) as u8, (v >> 16) as u8]
    })
    .unwrap()
}

/// Write `n` random PNGs named `img_0000.png`, ... into `dir`.
pub fn write_corpus(dir: &Path, n: usize, w: u32, h: u32) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    (0..n)
        .map(|i| {
            let p = dir.join(format!("img_{i:04}.png"));
            std::fs::write(&p, encode_png(&random_image(i as u64, w, h))).unwrap();
            p
        })
        .collect()
}

/// Every file in `dir`, sorted, with its bytes.
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub const GOLDEN_STRENGTH: u32 = 15;
pub const GOLDEN_SEED: u64 = 2024;

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn golden_name(kind: OpKind) -> String {
    format!("{:02}_{}.png", kind.ordinal(), kind.name())
}

pub fn golden_input() -> RasterImage {
    test_card(48, 40)
}

pub fn golden_render(kind: OpKind) -> RasterImage {
    let m = magnitude(kind, GOLDEN_STRENGTH).unwrap();
    let seed = rng::derive_seed(GOLDEN_SEED, &[kind.ordinal() as u64]);
    apply_op(&golden_input(), kind, m, &mut stream(seed)).unwrap()
}
