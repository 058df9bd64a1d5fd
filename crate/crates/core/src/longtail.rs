//! Long-tailed class profiles and the Many/Med/Few split.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::{rng, ClassId, SampleId};

/// Many-shot classes have strictly more than this many samples.
pub const MANY_ABOVE: u32 = 100;
/// Few-shot classes have strictly fewer than this many samples.
pub const FEW_BELOW: u32 = 20;

/// Per-class sample counts, non-increasing, all positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassProfile {
    counts: Vec<u32>,
}

impl ClassProfile {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("profile needs at least one class".into()));
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!("class {c} has zero samples")));
        }
        if let Some(c) = counts.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(format!(
                "counts must be non-increasing (class {} < class {})",
                c,
                c + 1
            )));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_max(&self) -> u32 {
        self.counts[0]
    }

    pub fn n_min(&self) -> u32 {
        *self.counts.last().unwrap()
    }

    pub fn imbalance_ratio(&self) -> f64 {
        self.n_max() as f64 / self.n_min() as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Labels `0,0,...,1,1,...` matching the counts.
    pub fn labels(&self) -> Vec<ClassId> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| core::iter::repeat(c).take(n as usize))
            .collect()
    }
}

/// Exponential decay `counts[k] = round(n_max * ir^(-k/(C-1)))`, with both
/// endpoints forced exact.
pub fn exp_profile(num_classes: usize, n_max: u32, imbalance: f64) -> Result<ClassProfile> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if !imbalance.is_finite() || imbalance < 1.0 {
        return Err(Error::InvalidParameter(format!("imbalance ratio {imbalance} must be >= 1")));
    }
    if (n_max as f64) < imbalance {
        return Err(Error::InvalidParameter(format!(
            "n_max {n_max} smaller than imbalance ratio {imbalance}"
        )));
    }
    let last = (num_classes - 1) as f64;
    let mut counts: Vec<u32> = (0..num_classes)
        .map(|k| libm::rint(n_max as f64 * libm::pow(imbalance, -(k as f64) / last)) as u32)
        .collect();
    counts[0] = n_max;
    counts[num_classes - 1] = libm::rint(n_max as f64 / imbalance) as u32;
    if counts.contains(&0) {
        return Err(Error::InvalidParameter("profile would contain an empty class".into()));
    }
    ClassProfile::new(counts)
}

/// Default Pareto shape for ImageNet-scale profiles.
pub const PARETO_ALPHA: f64 = 0.6;

/// Power-law profile: weights `(k+1)^(-1/alpha)` affinely rescaled so the
/// first class has `n_max` and the last `n_min` samples.
pub fn pareto_profile(num_classes: usize, n_max: u32, n_min: u32, alpha: f64) -> Result<ClassProfile> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if n_min == 0 || n_max < n_min {
        return Err(Error::InvalidParameter(format!("need n_max >= n_min >= 1, got {n_max}, {n_min}")));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha {alpha} must be positive")));
    }
    let weight = |k: usize| libm::pow((k + 1) as f64, -1.0 / alpha);
    let (w0, wl) = (weight(0), weight(num_classes - 1));
    let span = (n_max - n_min) as f64;
    let mut counts: Vec<u32> = (0..num_classes)
        .map(|k| libm::rint(n_min as f64 + span * (weight(k) - wl) / (w0 - wl)) as u32)
        .collect();
    counts[0] = n_max;
    counts[num_classes - 1] = n_min;
    for k in 1..num_classes {
        counts[k] = counts[k].min(counts[k - 1]).max(n_min);
    }
    ClassProfile::new(counts)
}

/// Uniform selection without replacement of exactly `counts[c]` samples of
/// every class. Returns sorted sample ids.
pub fn subsample<R: RngCore + ?Sized>(
    labels: &[ClassId],
    profile: &ClassProfile,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    let mut by_class: Vec<Vec<SampleId>> = alloc::vec![Vec::new(); profile.num_classes()];
    for (i, &c) in labels.iter().enumerate() {
        by_class
            .get_mut(c)
            .ok_or_else(|| Error::InvalidParameter(format!("label {c} of sample {i} outside the profile")))?
            .push(i);
    }
    let mut kept = Vec::with_capacity(profile.total() as usize);
    for (c, (pool, &need)) in by_class.iter_mut().zip(profile.counts()).enumerate() {
        let need = need as usize;
        if pool.len() < need {
            return Err(Error::InsufficientSamples { class_id: c, needed: need, available: pool.len() });
        }
        // partial Fisher-Yates
        for i in 0..need {
            let j = i + rng::below(rng, (pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        kept.extend_from_slice(&pool[..need]);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Disjoint class-id sets by training-sample count.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryMasks {
    pub many: Vec<ClassId>,
    pub med: Vec<ClassId>,
    pub few: Vec<ClassId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Many,
    Med,
    Few,
}

pub fn category_of(count: u32) -> Category {
    if count > MANY_ABOVE {
        Category::Many
    } else if count >= FEW_BELOW {
        Category::Med
    } else {
        Category::Few
    }
}

impl CategoryMasks {
    pub fn category(&self, class_id: ClassId) -> Option<Category> {
        if self.many.binary_search(&class_id).is_ok() {
            Some(Category::Many)
        } else if self.med.binary_search(&class_id).is_ok() {
            Some(Category::Med)
        } else if self.few.binary_search(&class_id).is_ok() {
            Some(Category::Few)
        } else {
            None
        }
    }

    pub fn num_classes(&self) -> usize {
        self.many.len() + self.med.len() + self.few.len()
    }
}

/// Many: `> 100`, Med: `20..=100`, Few: `< 20`.
pub fn categorize(profile: &ClassProfile) -> CategoryMasks {
    categorize_counts(profile.counts())
}

/// [`categorize`] over raw per-class counts (any order).
pub fn categorize_counts(counts: &[u32]) -> CategoryMasks {
    let mut masks = CategoryMasks::default();
    for (c, &n) in counts.iter().enumerate() {
        match category_of(n) {
            Category::Many => masks.many.push(c),
            Category::Med => masks.med.push(c),
            Category::Few => masks.few.push(c),
        }
    }
    masks
}
