//! A closed-form stand-in for a classifier, for exercising curriculum
//! dynamics without a model.
//!
//! Class `c` at probe strength `s`, after `e` training epochs, is predicted
//! correctly with probability `sigmoid(rate_c * e - beta * s)`. Head classes
//! get larger rates, so they climb the curriculum faster.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::curriculum::{Curriculum, CurriculumConfig, EpochView, RunError, RunReport};
use crate::error::{Error, EvalError, Result};
use crate::lol::{ProbeOutcome, ProbePlan};
use crate::longtail::ClassProfile;
use crate::rng::{self, domain};
use crate::ClassId;

/// Default rate multiplier applied to `ln(1 + count)`.
pub const DEFAULT_RATE_SCALE: f64 = 0.005;
/// Default per-level difficulty slope.
pub const DEFAULT_BETA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SimLearnerParams {
    /// Per-class learning rate, all positive.
    pub rates: Vec<f64>,
    /// Logit drop per strength level.
    pub beta: f64,
    pub seed: u64,
}

impl SimLearnerParams {
    pub fn new(rates: Vec<f64>, beta: f64, seed: u64) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|&r| !r.is_finite() || r <= 0.0) {
            return Err(Error::InvalidParameter("class rates must be positive and finite".into()));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter("beta must be non-negative".into()));
        }
        Ok(Self { rates, beta, seed })
    }

    /// Rates proportional to `ln(1 + count)`, favouring head classes.
    pub fn from_profile(profile: &ClassProfile, rate_scale: f64, beta: f64, seed: u64) -> Result<Self> {
        let rates = profile
            .counts()
            .iter()
            .map(|&n| rate_scale * libm::log(1.0 + n as f64))
            .collect();
        Self::new(rates, beta, seed)
    }

    pub fn num_classes(&self) -> usize {
        self.rates.len()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let z = libm::exp(x);
        z / (1.0 + z)
    }
}

/// Probability that class `c` is predicted correctly at strength `s` after `e` epochs.
pub fn sim_accuracy(class_id: ClassId, strength: u32, epoch: u32, params: &SimLearnerParams) -> f64 {
    let x = params.rates[class_id] * epoch as f64 - params.beta * strength as f64;
    logistic(x).clamp(0.0, 1.0)
}

/// Predicted class: `c` with probability [`sim_accuracy`], otherwise a
/// uniformly chosen wrong class. Always consumes exactly two `u64` draws.
pub fn sim_predict<R: RngCore + ?Sized>(
    class_id: ClassId,
    strength: u32,
    epoch: u32,
    params: &SimLearnerParams,
    rng: &mut R,
) -> ClassId {
    predict_with(class_id, sim_accuracy(class_id, strength, epoch, params), params.num_classes(), rng)
}

fn predict_with<R: RngCore + ?Sized>(class_id: ClassId, p: f64, num_classes: usize, rng: &mut R) -> ClassId {
    let hit = rng::bernoulli(rng, p);
    let u = rng::unit_f64(rng);
    if hit || num_classes < 2 {
        return class_id;
    }
    let wrong = ((u * (num_classes - 1) as f64) as usize).min(num_classes - 2);
    if wrong >= class_id {
        wrong + 1
    } else {
        wrong
    }
}

/// Evaluate a probe plan against the simulator. The model has trained
/// `epoch - 1` epochs when epoch `epoch`'s probes run.
pub fn sim_outcome(epoch: u32, plan: &ProbePlan, params: &SimLearnerParams) -> ProbeOutcome {
    let c = plan.class_id;
    let trained = epoch.saturating_sub(1);
    let mut r = rng::derived_stream(params.seed, &[domain::SIM, epoch as u64, c as u64]);
    let correct = plan
        .levels
        .iter()
        .map(|lvl| {
            let p = sim_accuracy(c, lvl.level, trained, params);
            lvl.probes
                .iter()
                .filter(|_| predict_with(c, p, params.num_classes(), &mut r) == c)
                .count() as u32
        })
        .collect();
    ProbeOutcome::new(c, correct)
}

/// Drive a full curriculum run over `profile` with the simulator as probe
/// predictor. The trainer step is a no-op: the simulator's progress depends
/// only on the epoch count.
pub fn run_dynamics(
    profile: &ClassProfile,
    cfg: &CurriculumConfig,
    params: &SimLearnerParams,
) -> Result<RunReport, RunError<core::convert::Infallible>> {
    if params.num_classes() != profile.num_classes() {
        return Err(RunError {
            epoch: 0,
            stage: crate::curriculum::Stage::Probe,
            source: EvalError::Engine(Error::ClassCountMismatch {
                expected: profile.num_classes(),
                found: params.num_classes(),
            }),
        });
    }
    let curriculum = Curriculum::new(cfg.clone(), profile.labels(), profile.num_classes()).map_err(|e| RunError {
        epoch: 0,
        stage: crate::curriculum::Stage::Probe,
        source: EvalError::Engine(e),
    })?;
    curriculum.run(
        |epoch, plan| Ok(sim_outcome(epoch, plan, params)),
        |_: EpochView<'_>| Ok(()),
    )
}
