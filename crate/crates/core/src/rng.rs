//! Seeded random streams.
//!
//! Every random decision in the crate goes through a [`RngCore`] passed in by
//! the caller. Independent streams (one per sample, per probe, per epoch) are
//! derived from a master seed with [`derive_seed`] and opened with
//! [`stream`], so results never depend on scheduling or thread count.
//!
//! Draw helpers here are written against `next_u64` directly so the mapping
//! from stream bits to values is fixed by this crate, not by a distribution
//! library.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Concrete stream type used throughout.
pub type Stream = ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint.
pub mod domain {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const PROBE: u64 = 0x5052_4f42;
    pub const PLAN: u64 = 0x504c_414e;
    pub const SIM: u64 = 0x5349_4d55;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed with a path of identifiers into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    for &p in path {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(GOLDEN)));
    }
    h
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Open the stream for `master` and a derivation path.
pub fn derived_stream(master: u64, path: &[u64]) -> Stream {
    stream(derive_seed(master, path))
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` (Lemire's multiply-and-reject). `n` must be positive.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// `true` with probability `p` (clamped to `[0, 1]`).
#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    unit_f64(rng) < p
}
