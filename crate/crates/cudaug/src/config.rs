//! TOML run configuration.
//!
//! ```toml
//! [curriculum]
//! p_aug = 0.5
//! gamma = 0.6
//! probe_coefficient = 10
//! epochs = 200
//! max_strength = 30
//! seed = 7
//! gamma_auto_tune = false
//! threshold = "strict"        # or "inclusive"
//!
//! [profile]
//! kind = "exp"                # "exp", "pareto" or "file"
//! classes = 100
//! n_max = 500
//! imbalance = 100.0           # exp only
//! # n_min = 5, alpha = 0.6    # pareto only
//! # path = "profile.csv"      # file only
//!
//! [learner]
//! rate_scale = 0.005
//! beta = 1.5
//! # seed defaults to curriculum.seed
//! ```

use std::path::{Path, PathBuf};

use cudaug_core::longtail::{exp_profile, pareto_profile, PARETO_ALPHA};
use cudaug_core::sim::{SimLearnerParams, DEFAULT_BETA, DEFAULT_RATE_SCALE};
use cudaug_core::{ClassProfile, CurriculumConfig, ThresholdRule};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    #[default]
    Strict,
    Inclusive,
}

impl From<Threshold> for ThresholdRule {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Strict => ThresholdRule::Strict,
            Threshold::Inclusive => ThresholdRule::Inclusive,
        }
    }
}

/// Serialized form of [`CurriculumConfig`]; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumSection {
    pub p_aug: f64,
    pub gamma: f64,
    pub probe_coefficient: u32,
    pub epochs: u32,
    pub max_strength: u32,
    pub seed: u64,
    pub gamma_auto_tune: bool,
    pub threshold: Threshold,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        CurriculumConfig::default().into()
    }
}

impl From<CurriculumConfig> for CurriculumSection {
    fn from(c: CurriculumConfig) -> Self {
        Self {
            p_aug: c.p_aug,
            gamma: c.gamma,
            probe_coefficient: c.probe_coefficient,
            epochs: c.epochs,
            max_strength: c.max_strength,
            seed: c.seed,
            gamma_auto_tune: c.gamma_auto_tune,
            threshold: match c.threshold_rule {
                ThresholdRule::Strict => Threshold::Strict,
                ThresholdRule::Inclusive => Threshold::Inclusive,
            },
        }
    }
}

impl CurriculumSection {
    pub fn to_config(&self) -> cudaug_core::Result<CurriculumConfig> {
        let cfg = CurriculumConfig {
            p_aug: self.p_aug,
            gamma: self.gamma,
            probe_coefficient: self.probe_coefficient,
            epochs: self.epochs,
            max_strength: self.max_strength,
            seed: self.seed,
            gamma_auto_tune: self.gamma_auto_tune,
            threshold_rule: self.threshold.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Exp { classes: usize, n_max: u32, imbalance: f64 },
    Pareto { classes: usize, n_max: u32, n_min: u32, #[serde(default = "default_alpha")] alpha: f64 },
    File { path: PathBuf },
}

fn default_alpha() -> f64 {
    PARETO_ALPHA
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection::Exp { classes: 100, n_max: 500, imbalance: 100.0 }
    }
}

impl ProfileSection {
    /// Relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<ClassProfile> {
        Ok(match self {
            ProfileSection::Exp { classes, n_max, imbalance } => exp_profile(*classes, *n_max, *imbalance)?,
            ProfileSection::Pareto { classes, n_max, n_min, alpha } => {
                pareto_profile(*classes, *n_max, *n_min, *alpha)?
            }
            ProfileSection::File { path } => formats::load_profile(&base.join(path))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub rate_scale: f64,
    pub beta: f64,
    pub seed: Option<u64>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self { rate_scale: DEFAULT_RATE_SCALE, beta: DEFAULT_BETA, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub curriculum: CurriculumSection,
    pub profile: ProfileSection,
    pub learner: LearnerSection,
}

/// A validated simulation setup.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub config: CurriculumConfig,
    pub profile: ClassProfile,
    pub learner: SimLearnerParams,
}

impl RunConfig {
    /// Parse TOML; `path` is used only for error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Config { path: path.to_path_buf(), line, column, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn setup(&self, base: &Path) -> Result<SimSetup> {
        let config = self.curriculum.to_config()?;
        let profile = self.profile.build(base)?;
        let seed = self.learner.seed.unwrap_or(config.seed);
        let learner = SimLearnerParams::from_profile(&profile, self.learner.rate_scale, self.learner.beta, seed)?;
        Ok(SimSetup { config, profile, learner })
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
