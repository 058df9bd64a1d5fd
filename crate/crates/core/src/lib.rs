//! Class-wise curriculum of data augmentation for long-tailed recognition.
//!
//! The crate is `no_std` (with `alloc`) and carries only the algorithmic
//! pieces: the 22-operation augmentation catalog and its strength-to-magnitude
//! rule, the sequential strength operator, Level-of-Learning bookkeeping, the
//! epoch driver, long-tailed profile construction, a closed-form simulated
//! learner and the diagnostic metrics. File formats, the CLI and the sidecar
//! service live in the `cudaug` crate.
//!
//! All randomness is threaded through explicit [`rand_core::RngCore`] streams;
//! see [`rng`] for how per-sample streams are derived from a master seed.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod analysis;
pub mod compose;
pub mod curriculum;
mod error;
pub mod image;
pub mod lol;
pub mod longtail;
pub mod ops;
pub mod rng;
pub mod sim;

pub use compose::{apply_strength, apply_strength_ordered, sample_sequence, ApplyOrder, OpSequence};
pub use curriculum::{Curriculum, CurriculumConfig, Directive, DirectiveAction, EpochPlan};
pub use error::{Error, EvalError, Result};
pub use image::{ImageSource, NoImages, RasterImage, Rgb};
pub use lol::{LoLTable, ProbeOutcome, ProbePlan, ThresholdRule};
pub use longtail::{CategoryMasks, ClassProfile};
pub use ops::{apply_op, magnitude, op_catalog, Magnitude, OpKind, OpSpec, ParamClass};

/// Index of a sample within a dataset.
pub type SampleId = usize;
/// Class label, `0..num_classes`.
pub type ClassId = usize;

/// Maximum augmentation strength, and the number of magnitude levels.
pub const MAX_STRENGTH: u32 = 30;
