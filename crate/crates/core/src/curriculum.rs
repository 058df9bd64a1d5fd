//! The epoch driver.
//!
//! Each epoch runs, in order: probe planning and evaluation against the model
//! as it stood after the previous epoch, the LoL update, then the augmented
//! epoch view handed to the trainer. Randomness for epoch `e` comes from
//! streams derived from the config seed, the epoch and (for probes) the class,
//! so a [`Curriculum`] driven through the two-phase API gives the same result
//! as [`Curriculum::run`].

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::compose::apply_strength;
use crate::error::{Error, EvalError, Result};
use crate::image::{ImageSource, RasterImage};
use crate::lol::{self, LoLTable, ProbeOutcome, ProbePlan, ThresholdRule};
use crate::rng::{self, domain};
use crate::{ClassId, SampleId, MAX_STRENGTH};

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig {
    /// Per-sample probability of training on the augmented view.
    pub p_aug: f64,
    /// Acceptance threshold.
    pub gamma: f64,
    /// Probe coefficient `T`: level `l` is checked with `T(l+1)` probes.
    pub probe_coefficient: u32,
    pub epochs: u32,
    pub max_strength: u32,
    pub seed: u64,
    pub gamma_auto_tune: bool,
    pub threshold_rule: ThresholdRule,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            p_aug: 0.5,
            gamma: 0.6,
            probe_coefficient: 10,
            epochs: 200,
            max_strength: MAX_STRENGTH,
            seed: 0,
            gamma_auto_tune: false,
            threshold_rule: ThresholdRule::Strict,
        }
    }
}

impl CurriculumConfig {
    /// Defaults for ImageNet-scale datasets (lower threshold).
    pub fn large_scale() -> Self {
        Self { gamma: 0.4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if !(0.0..=1.0).contains(&self.p_aug) {
            return bad(format!("p_aug {} not in [0, 1]", self.p_aug));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} not in [0, 1]", self.gamma));
        }
        if self.probe_coefficient == 0 {
            return bad("probe coefficient T must be positive".into());
        }
        if self.max_strength > MAX_STRENGTH {
            return bad(format!("max strength {} exceeds {MAX_STRENGTH}", self.max_strength));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveAction {
    Original,
    Augment { strength: u32, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Directive {
    pub sample_id: SampleId,
    pub class_id: ClassId,
    pub action: DirectiveAction,
}

/// One directive per sample, in sample order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochPlan {
    pub epoch: u32,
    pub directives: Vec<Directive>,
}

impl EpochPlan {
    pub fn augmented_count(&self) -> usize {
        self.directives
            .iter()
            .filter(|d| matches!(d.action, DirectiveAction::Augment { .. }))
            .count()
    }

    /// Lazily produce the epoch's images in plan order.
    pub fn materialize<'a, S: ImageSource + ?Sized>(&'a self, images: &'a S) -> Materialize<'a, S> {
        Materialize { directives: self.directives.iter(), images }
    }
}

/// Produce the training image for one directive. Originals are borrowed.
pub fn materialize_one<'a, S: ImageSource + ?Sized>(
    directive: &Directive,
    images: &'a S,
) -> Result<Cow<'a, RasterImage>> {
    let img = images.image(directive.sample_id).ok_or(Error::MissingImage(directive.sample_id))?;
    match directive.action {
        DirectiveAction::Original => Ok(Cow::Borrowed(img)),
        DirectiveAction::Augment { strength: 0, .. } => Ok(Cow::Borrowed(img)),
        DirectiveAction::Augment { strength, seed } => {
            apply_strength(img, strength, &mut rng::stream(seed)).map(Cow::Owned)
        }
    }
}

pub struct Materialize<'a, S: ?Sized> {
    directives: core::slice::Iter<'a, Directive>,
    images: &'a S,
}

impl<'a, S: ImageSource + ?Sized> Iterator for Materialize<'a, S> {
    type Item = Result<(Directive, Cow<'a, RasterImage>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let d = *self.directives.next()?;
        Some(materialize_one(&d, self.images).map(|img| (d, img)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.directives.size_hint()
    }
}

/// Gate every sample with Bernoulli(`p_aug`); augmented samples use their
/// class's current level and a fresh sequence seed.
pub fn build_epoch_plan<R: RngCore + ?Sized>(
    labels: &[ClassId],
    table: &LoLTable,
    cfg: &CurriculumConfig,
    rng: &mut R,
) -> Result<EpochPlan> {
    let levels = table.levels();
    let directives = labels
        .iter()
        .enumerate()
        .map(|(sample_id, &class_id)| {
            let &strength = levels
                .get(class_id)
                .ok_or_else(|| Error::InvalidParameter(format!("label {class_id} out of range")))?;
            let action = if rng::bernoulli(rng, cfg.p_aug) {
                DirectiveAction::Augment { strength, seed: rng.next_u64() }
            } else {
                DirectiveAction::Original
            };
            Ok(Directive { sample_id, class_id, action })
        })
        .collect::<Result<_>>()?;
    Ok(EpochPlan { epoch: table.epoch(), directives })
}

/// What the trainer sees for an epoch. The plan is built on demand.
pub struct EpochView<'a> {
    curriculum: &'a Curriculum,
}

impl<'a> EpochView<'a> {
    pub fn epoch(&self) -> u32 {
        self.curriculum.table.epoch()
    }

    pub fn levels(&self) -> &'a [u32] {
        self.curriculum.table.levels()
    }

    pub fn plan(&self) -> Result<EpochPlan> {
        self.curriculum.epoch_plan()
    }
}

/// Which step of an epoch failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Probe,
    Update,
    Train,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunError<E> {
    pub epoch: u32,
    pub stage: Stage,
    pub source: EvalError<E>,
}

impl<E: fmt::Display> fmt::Display for RunError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {} ({:?}): {}", self.epoch, self.stage, self.source)
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for RunError<E> {}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    /// Threshold used for this epoch's update.
    pub gamma: f64,
    pub mean_level: f64,
    pub max_level: u32,
    pub probes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub table: LoLTable,
    pub metrics: Vec<EpochMetrics>,
    pub final_gamma: f64,
}

/// Stateful driver over a labelled dataset.
#[derive(Debug, Clone)]
pub struct Curriculum {
    cfg: CurriculumConfig,
    labels: Vec<ClassId>,
    by_class: Vec<Vec<SampleId>>,
    table: LoLTable,
    gamma: f64,
    metrics: Vec<EpochMetrics>,
}

impl Curriculum {
    /// Every class in `0..num_classes` must have at least one sample.
    pub fn new(cfg: CurriculumConfig, labels: Vec<ClassId>, num_classes: usize) -> Result<Self> {
        cfg.validate()?;
        let mut by_class = alloc::vec![Vec::new(); num_classes];
        for (i, &c) in labels.iter().enumerate() {
            by_class
                .get_mut(c)
                .ok_or_else(|| Error::InvalidParameter(format!("label {c} of sample {i} >= {num_classes} classes")))?
                .push(i);
        }
        if let Some(c) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::EmptyClass(c));
        }
        Ok(Self {
            gamma: cfg.gamma,
            table: LoLTable::with_max_level(num_classes, cfg.max_strength),
            cfg,
            labels,
            by_class,
            metrics: Vec::new(),
        })
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.cfg
    }

    pub fn table(&self) -> &LoLTable {
        &self.table
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.by_class.len()
    }

    pub fn class_samples(&self, class_id: ClassId) -> &[SampleId] {
        &self.by_class[class_id]
    }

    /// Current threshold (after any auto-tuning).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }

    /// Probe plans for the upcoming update, one per class in class order.
    pub fn plan_probes(&self) -> Result<Vec<ProbePlan>> {
        let epoch = self.table.epoch() as u64 + 1;
        self.by_class
            .iter()
            .zip(self.table.levels())
            .enumerate()
            .map(|(c, (samples, &level))| {
                let mut r = rng::derived_stream(self.cfg.seed, &[domain::PROBE, epoch, c as u64]);
                lol::plan_probes(c, samples, level, self.cfg.probe_coefficient, &mut r)
            })
            .collect()
    }

    /// Apply the outcomes for the plans from [`Curriculum::plan_probes`].
    pub fn apply_outcomes(&mut self, outcomes: &[ProbeOutcome]) -> Result<()> {
        let used_gamma = self.gamma;
        self.table
            .update(outcomes, used_gamma, self.cfg.probe_coefficient, self.cfg.threshold_rule)?;
        let epoch = self.table.epoch();
        if self.cfg.gamma_auto_tune && epoch == lol::AUTO_TUNE_EPOCH {
            self.gamma = lol::auto_tune_gamma(self.table.history(), self.gamma, epoch);
        }
        let levels = self.table.levels();
        self.metrics.push(EpochMetrics {
            epoch,
            gamma: used_gamma,
            mean_level: levels.iter().map(|&l| l as f64).sum::<f64>() / levels.len().max(1) as f64,
            max_level: levels.iter().copied().max().unwrap_or(0),
            probes: outcomes.iter().map(|o| lol::probe_budget(self.cfg.probe_coefficient, o.correct.len() as u32 - 1)).sum(),
        });
        Ok(())
    }

    /// The augmented epoch view for the current levels.
    pub fn epoch_plan(&self) -> Result<EpochPlan> {
        let mut r = rng::derived_stream(self.cfg.seed, &[domain::PLAN, self.table.epoch() as u64]);
        build_epoch_plan(&self.labels, &self.table, &self.cfg, &mut r)
    }

    /// One full epoch: probe, update, train.
    pub fn run_epoch<E, P, T>(&mut self, probe: &mut P, train: &mut T) -> Result<(), RunError<E>>
    where
        P: FnMut(u32, &ProbePlan) -> Result<ProbeOutcome, EvalError<E>>,
        T: FnMut(EpochView<'_>) -> Result<(), EvalError<E>>,
    {
        let epoch = self.table.epoch() + 1;
        let err = |stage| move |source| RunError { epoch, stage, source };
        let plans = self.plan_probes().map_err(|e| err(Stage::Probe)(EvalError::Engine(e)))?;
        let outcomes = plans
            .iter()
            .map(|p| probe(epoch, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err(Stage::Probe))?;
        self.apply_outcomes(&outcomes)
            .map_err(|e| err(Stage::Update)(EvalError::Engine(e)))?;
        train(EpochView { curriculum: self }).map_err(err(Stage::Train))
    }

    /// Run all configured epochs.
    pub fn run<E, P, T>(mut self, mut probe: P, mut train: T) -> Result<RunReport, RunError<E>>
    where
        P: FnMut(u32, &ProbePlan) -> Result<ProbeOutcome, EvalError<E>>,
        T: FnMut(EpochView<'_>) -> Result<(), EvalError<E>>,
    {
        for _ in 0..self.cfg.epochs {
            self.run_epoch(&mut probe, &mut train)?;
        }
        Ok(RunReport { table: self.table, metrics: self.metrics, final_gamma: self.gamma })
    }
}

/// Probe callback that augments probe images and asks `predictor` for labels.
pub fn image_prober<'a, S, F, E>(
    images: &'a S,
    mut predictor: F,
) -> impl FnMut(u32, &ProbePlan) -> Result<ProbeOutcome, EvalError<E>> + 'a
where
    S: ImageSource + ?Sized,
    F: FnMut(&RasterImage) -> Result<ClassId, E> + 'a,
{
    move |_, plan| lol::evaluate_plan(plan, images, &mut predictor)
}
