//! Sequential strength-`s` augmentation: draw `s` operations uniformly with
//! replacement and compose them, each at magnitude `m_k(s)`.
//!
//! Stream consumption order for [`apply_strength`]: the `s` catalog draws
//! first, then each operation's internal draws in application order. Replaying
//! a logged sequence with a stream opened from the same seed therefore
//! reproduces the output exactly.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::ops::{apply_op, magnitude, op_catalog, Magnitude, OpKind, OpSpec};
use crate::{rng, MAX_STRENGTH};

/// The operations drawn for one application of the strength operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OpSequence {
    strength: u32,
    ops: Vec<(OpKind, Magnitude)>,
}

impl OpSequence {
    /// Build from explicit kinds, all at magnitude `m_k(strength)`.
    pub fn from_kinds(strength: u32, kinds: &[OpKind]) -> Result<Self> {
        if strength > MAX_STRENGTH {
            return Err(Error::StrengthOutOfRange { strength, max: MAX_STRENGTH });
        }
        if kinds.len() != strength as usize {
            return Err(Error::InvalidParameter(alloc::format!(
                "sequence of strength {strength} needs {strength} operations, got {}",
                kinds.len()
            )));
        }
        let ops = kinds
            .iter()
            .map(|&k| magnitude(k, strength).map(|m| (k, m)))
            .collect::<Result<_>>()?;
        Ok(Self { strength, ops })
    }

    pub fn strength(&self) -> u32 {
        self.strength
    }

    pub fn ops(&self) -> &[(OpKind, Magnitude)] {
        &self.ops
    }

    pub fn kinds(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.ops.iter().map(|(k, _)| *k)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Audit line `sample_id,s,k_1,...,k_s` with zero-based catalog ordinals.
    pub fn log_line(&self, sample_id: &str) -> String {
        let mut line = String::new();
        let _ = write!(line, "{sample_id},{}", self.strength);
        for k in self.kinds() {
            let _ = write!(line, ",{}", k.ordinal());
        }
        line
    }

    /// Parse a line produced by [`OpSequence::log_line`].
    pub fn parse_log_line(line: &str) -> Result<(String, OpSequence)> {
        let bad = || Error::InvalidParameter(alloc::format!("malformed sequence log line: {line:?}"));
        let mut fields = line.trim().split(',');
        let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
        let strength: u32 = fields.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let kinds = fields
            .map(|f| f.trim().parse::<usize>().ok().and_then(OpKind::from_ordinal).ok_or_else(bad))
            .collect::<Result<Vec<_>>>()?;
        if kinds.len() != strength as usize {
            return Err(bad());
        }
        Ok((id.into(), OpSequence::from_kinds(strength, &kinds)?))
    }
}

/// Order in which a drawn sequence is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApplyOrder {
    #[default]
    AsDrawn,
    /// Ascending catalog ordinal (fixed-order ablation).
    SortedByIndex,
}

/// Draw `strength` operations i.i.d. uniform over `catalog`, with replacement.
pub fn sample_sequence<R: RngCore + ?Sized>(
    strength: u32,
    catalog: &[OpSpec],
    rng: &mut R,
) -> Result<OpSequence> {
    if strength > MAX_STRENGTH {
        return Err(Error::StrengthOutOfRange { strength, max: MAX_STRENGTH });
    }
    if catalog.is_empty() && strength > 0 {
        return Err(Error::InvalidParameter("empty operation catalog".into()));
    }
    let mut ops = Vec::with_capacity(strength as usize);
    for _ in 0..strength {
        let kind = catalog[rng::below(rng, catalog.len() as u64) as usize].kind;
        ops.push((kind, magnitude(kind, strength)?));
    }
    Ok(OpSequence { strength, ops })
}

/// `O(x; s)` over the full catalog.
pub fn apply_strength<R: RngCore + ?Sized>(
    img: &RasterImage,
    strength: u32,
    rng: &mut R,
) -> Result<RasterImage> {
    apply_strength_logged(img, strength, rng).map(|(out, _)| out)
}

/// Like [`apply_strength`], also returning the drawn sequence.
pub fn apply_strength_logged<R: RngCore + ?Sized>(
    img: &RasterImage,
    strength: u32,
    rng: &mut R,
) -> Result<(RasterImage, OpSequence)> {
    let seq = sample_sequence(strength, op_catalog(), rng)?;
    let out = apply_strength_ordered(img, &seq, ApplyOrder::AsDrawn, rng)?;
    Ok((out, seq))
}

/// Apply an already-drawn sequence; `rng` feeds the operations' internal draws.
pub fn apply_strength_ordered<R: RngCore + ?Sized>(
    img: &RasterImage,
    sequence: &OpSequence,
    order: ApplyOrder,
    rng: &mut R,
) -> Result<RasterImage> {
    let mut ops: Vec<(OpKind, Magnitude)> = sequence.ops.clone();
    if order == ApplyOrder::SortedByIndex {
        ops.sort_by_key(|(k, _)| k.ordinal());
    }
    let mut iter = ops.into_iter();
    let Some((k, m)) = iter.next() else {
        return Ok(img.clone());
    };
    let mut out = apply_op(img, k, m, rng)?;
    for (k, m) in iter {
        out = apply_op(&out, k, m, rng)?;
    }
    Ok(out)
}
