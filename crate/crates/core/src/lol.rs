//! Level-of-Learning (LoL) scoring.
//!
//! A class at level `L` is probed at every level `l = 0..=L` with `T(l+1)`
//! augmented samples drawn with replacement from the class. The level rises
//! by one when every level clears the acceptance threshold `gamma * T(l+1)`
//! and falls by one otherwise, clamped to `[0, S]`.
//!
//! The work is split in two phases so an external trainer can take part:
//! [`plan_probes`] decides which samples to probe with which seeds, the
//! caller counts correct predictions into a [`ProbeOutcome`], and
//! [`update_level`] / [`LoLTable::update`] apply the rule. [`evaluate_plan`]
//! runs the middle phase in-process given a predictor callback.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::compose::apply_strength;
use crate::error::{Error, EvalError, Result};
use crate::image::{ImageSource, RasterImage};
use crate::{rng, ClassId, SampleId, MAX_STRENGTH};

/// Tie handling at `v == gamma * T(l+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// A level fails when `v <= gamma * T(l+1)`; passing needs strictly more.
    #[default]
    Strict,
    /// A level passes when `v >= gamma * T(l+1)`.
    Inclusive,
}

impl ThresholdRule {
    #[inline]
    pub fn passes(self, correct: u32, gamma: f64, probes: u32) -> bool {
        let threshold = gamma * probes as f64;
        match self {
            ThresholdRule::Strict => correct as f64 > threshold,
            ThresholdRule::Inclusive => correct as f64 >= threshold,
        }
    }
}

/// One planned probe: a class sample and the seed of its augmentation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub sample_id: SampleId,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeLevel {
    pub level: u32,
    pub probes: Vec<Probe>,
}

/// Probes for one class at its current level `L`: one entry per `l = 0..=L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbePlan {
    pub class_id: ClassId,
    pub levels: Vec<ProbeLevel>,
}

impl ProbePlan {
    pub fn current_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn total_probes(&self) -> usize {
        self.levels.iter().map(|l| l.probes.len()).sum()
    }
}

/// Correct-prediction counts `v_l` for `l = 0..=L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeOutcome {
    pub class_id: ClassId,
    pub correct: Vec<u32>,
}

impl ProbeOutcome {
    pub fn new(class_id: ClassId, correct: Vec<u32>) -> Self {
        Self { class_id, correct }
    }
}

/// Number of probes at level `l`.
#[inline]
pub fn probes_at_level(t: u32, level: u32) -> u32 {
    t * (level + 1)
}

/// Total probes for a class at level `L`: `T(L+1)(L+2)/2`.
pub fn probe_budget(t: u32, level: u32) -> u64 {
    t as u64 * (level as u64 + 1) * (level as u64 + 2) / 2
}

/// Plan the probes for a class currently at `level`.
pub fn plan_probes<R: RngCore + ?Sized>(
    class_id: ClassId,
    class_samples: &[SampleId],
    level: u32,
    t: u32,
    rng: &mut R,
) -> Result<ProbePlan> {
    if class_samples.is_empty() {
        return Err(Error::EmptyClass(class_id));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("probe coefficient T must be positive".into()));
    }
    if level > MAX_STRENGTH {
        return Err(Error::StrengthOutOfRange { strength: level, max: MAX_STRENGTH });
    }
    let n = class_samples.len() as u64;
    let levels = (0..=level)
        .map(|l| {
            let probes = (0..probes_at_level(t, l))
                .map(|_| {
                    let sample_id = class_samples[rng::below(rng, n) as usize];
                    Probe { sample_id, seed: rng.next_u64() }
                })
                .collect();
            ProbeLevel { level: l, probes }
        })
        .collect();
    Ok(ProbePlan { class_id, levels })
}

/// Count probes at one level whose augmented image is predicted as `class_id`.
///
/// Each probe image is `O(x; l)` drawn from a stream seeded with the probe's
/// seed. The predictor only ever sees the augmented image.
pub fn v_correct<S, F, E>(
    predictor: &mut F,
    class_id: ClassId,
    probes: &ProbeLevel,
    images: &S,
) -> Result<u32, EvalError<E>>
where
    S: ImageSource + ?Sized,
    F: FnMut(&RasterImage) -> Result<ClassId, E>,
{
    let mut correct = 0;
    for probe in &probes.probes {
        let img = images.image(probe.sample_id).ok_or(Error::MissingImage(probe.sample_id))?;
        let aug = apply_strength(img, probes.level, &mut rng::stream(probe.seed))?;
        if predictor(&aug).map_err(EvalError::Callback)? == class_id {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Evaluate every level of a plan in-process.
pub fn evaluate_plan<S, F, E>(
    plan: &ProbePlan,
    images: &S,
    predictor: &mut F,
) -> Result<ProbeOutcome, EvalError<E>>
where
    S: ImageSource + ?Sized,
    F: FnMut(&RasterImage) -> Result<ClassId, E>,
{
    let correct = plan
        .levels
        .iter()
        .map(|lvl| v_correct(predictor, plan.class_id, lvl, images))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProbeOutcome { class_id: plan.class_id, correct })
}

/// Level update with the default (strict) threshold and `S = 30`.
pub fn update_level(level: u32, outcome: &ProbeOutcome, gamma: f64, t: u32) -> Result<u32> {
    update_level_with(level, outcome, gamma, t, ThresholdRule::Strict, MAX_STRENGTH)
}

/// `L + 1` if every level `l <= L` clears the threshold, else `L - 1`;
/// clamped to `[0, max_level]`.
pub fn update_level_with(
    level: u32,
    outcome: &ProbeOutcome,
    gamma: f64,
    t: u32,
    rule: ThresholdRule,
    max_level: u32,
) -> Result<u32> {
    let invalid = |reason| Error::InvalidOutcome { class_id: outcome.class_id, reason };
    if outcome.correct.len() != level as usize + 1 {
        return Err(invalid(format!(
            "expected counts for levels 0..={level}, got {}",
            outcome.correct.len()
        )));
    }
    let mut pass = true;
    for (l, &v) in outcome.correct.iter().enumerate() {
        let n = probes_at_level(t, l as u32);
        if v > n {
            return Err(invalid(format!("{v} correct out of {n} probes at level {l}")));
        }
        pass &= rule.passes(v, gamma, n);
    }
    Ok(if pass {
        (level + 1).min(max_level)
    } else {
        level.saturating_sub(1).min(max_level)
    })
}

/// Per-class levels with their per-epoch history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoLTable {
    levels: Vec<u32>,
    epoch: u32,
    history: Vec<Vec<u32>>,
    max_level: u32,
}

impl LoLTable {
    pub fn new(num_classes: usize) -> Self {
        Self::with_max_level(num_classes, MAX_STRENGTH)
    }

    pub fn with_max_level(num_classes: usize, max_level: u32) -> Self {
        Self {
            levels: alloc::vec![0; num_classes],
            epoch: 0,
            history: Vec::new(),
            max_level: max_level.min(MAX_STRENGTH),
        }
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn num_classes(&self) -> usize {
        self.levels.len()
    }

    /// Number of updates applied so far.
    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Levels after each update; `history()[e - 1]` holds epoch `e`.
    pub fn history(&self) -> &[Vec<u32>] {
        &self.history
    }

    /// Apply one round of outcomes, one per class in class order.
    pub fn update(&mut self, outcomes: &[ProbeOutcome], gamma: f64, t: u32, rule: ThresholdRule) -> Result<()> {
        if outcomes.len() != self.levels.len() {
            return Err(Error::ClassCountMismatch { expected: self.levels.len(), found: outcomes.len() });
        }
        let next = self
            .levels
            .iter()
            .zip(outcomes)
            .enumerate()
            .map(|(c, (&level, outcome))| {
                if outcome.class_id != c {
                    return Err(Error::InvalidOutcome {
                        class_id: outcome.class_id,
                        reason: format!("outcome found at position {c}"),
                    });
                }
                update_level_with(level, outcome, gamma, t, rule, self.max_level)
            })
            .collect::<Result<Vec<_>>>()?;
        self.history.push(next.clone());
        self.levels = next;
        self.epoch += 1;
        Ok(())
    }

    /// `(epoch, class_id, level)` rows, epochs starting at 1.
    pub fn history_rows(&self) -> impl Iterator<Item = (u32, ClassId, u32)> + '_ {
        self.history.iter().enumerate().flat_map(|(e, levels)| {
            levels.iter().enumerate().map(move |(c, &l)| (e as u32 + 1, c, l))
        })
    }

    /// Rebuild a table from history snapshots.
    pub fn from_history(history: Vec<Vec<u32>>, max_level: u32) -> Result<Self> {
        let num_classes = history.first().map_or(0, Vec::len);
        if let Some(bad) = history.iter().find(|h| h.len() != num_classes) {
            return Err(Error::ClassCountMismatch { expected: num_classes, found: bad.len() });
        }
        if history.iter().flatten().any(|&l| l > max_level) {
            return Err(Error::InvalidParameter(format!("level above maximum {max_level}")));
        }
        Ok(Self {
            levels: history.last().cloned().unwrap_or_default(),
            epoch: history.len() as u32,
            history,
            max_level,
        })
    }
}

/// Functional form of [`LoLTable::update`] with the strict threshold.
pub fn update_table(table: &LoLTable, outcomes: &[ProbeOutcome], gamma: f64, t: u32) -> Result<LoLTable> {
    let mut next = table.clone();
    next.update(outcomes, gamma, t, ThresholdRule::Strict)?;
    Ok(next)
}

/// Epoch at which the threshold auto-tune rule is evaluated.
pub const AUTO_TUNE_EPOCH: u32 = 20;
/// Starting threshold of the auto-tune rule.
pub const AUTO_TUNE_INITIAL_GAMMA: f64 = 0.6;

/// Lower `gamma` by 0.1 (floored at 0) when, within the first 20 epochs, no
/// class has ever risen above level 0; otherwise keep it.
pub fn auto_tune_gamma(history: &[Vec<u32>], gamma: f64, epoch: u32) -> f64 {
    let never_raised = history.iter().flatten().all(|&l| l == 0);
    if epoch <= AUTO_TUNE_EPOCH && never_raised {
        // snap to a 1e-12 grid so 0.6 - 0.1 lands on 0.5
        (libm::rint((gamma - 0.1) * 1e12) / 1e12).max(0.0)
    } else {
        gamma
    }
}
