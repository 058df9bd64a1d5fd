use alloc::string::String;
use core::fmt;

use crate::{ClassId, SampleId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Image dimensions or pixel buffer are inconsistent.
    InvalidImage { width: u32, height: u32, pixels: usize },
    /// Strength level outside `0..=levels`.
    StrengthOutOfRange { strength: u32, max: u32 },
    /// A class has no samples to draw probes from.
    EmptyClass(ClassId),
    /// Probe outcome is missing a level or has an impossible count.
    InvalidOutcome { class_id: ClassId, reason: String },
    /// Class counts of two inputs disagree.
    ClassCountMismatch { expected: usize, found: usize },
    /// An image referenced by an epoch plan is missing from the source.
    MissingImage(SampleId),
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
    /// Not enough samples of a class to satisfy a profile.
    InsufficientSamples { class_id: ClassId, needed: usize, available: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidImage { width, height, pixels } => write!(
                f,
                "invalid image: {width}x{height} with {pixels} pixels"
            ),
            Error::StrengthOutOfRange { strength, max } => {
                write!(f, "strength {strength} out of range 0..={max}")
            }
            Error::EmptyClass(c) => write!(f, "class {c} has no samples to probe"),
            Error::InvalidOutcome { class_id, reason } => {
                write!(f, "invalid probe outcome for class {class_id}: {reason}")
            }
            Error::ClassCountMismatch { expected, found } => {
                write!(f, "expected {expected} classes, found {found}")
            }
            Error::MissingImage(id) => write!(f, "no image for sample {id}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InsufficientSamples { class_id, needed, available } => write!(
                f,
                "class {class_id} needs {needed} samples but only {available} are available"
            ),
        }
    }
}

impl core::error::Error for Error {}

/// Failure of an evaluation that calls back into user code.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError<E> {
    Engine(Error),
    Callback(E),
}

impl<E> From<Error> for EvalError<E> {
    fn from(e: Error) -> Self {
        EvalError::Engine(e)
    }
}

impl<E: fmt::Display> fmt::Display for EvalError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Engine(e) => e.fmt(f),
            EvalError::Callback(e) => write!(f, "callback failed: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for EvalError<E> {}
