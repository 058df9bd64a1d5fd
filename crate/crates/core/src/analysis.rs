//! Diagnostics over trainer-supplied arrays: classifier weight-norm variance,
//! same-class feature alignment, and accuracy by Many/Med/Few category.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::longtail::{Category, CategoryMasks};
use crate::ClassId;

/// Row-major `classes x dim` matrix of linear classifier weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged weight rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_l1_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).iter().map(|v| v.abs()).sum()).collect()
    }
}

/// Population variance of the per-class L1 norms.
pub fn weight_norm_variance(w: &WeightMatrix) -> Result<f64> {
    if w.rows() < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    let norms = w.row_l1_norms();
    let n = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / n;
    Ok(norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// `N` feature vectors of dimension `D` with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<ClassId>,
}

impl FeatureBatch {
    pub fn new(dim: usize, data: Vec<f64>, labels: Vec<ClassId>) -> Result<Self> {
        if dim == 0 || data.len() != dim * labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels with dimension {dim} need {} values, got {}",
                labels.len(),
                dim * labels.len(),
                data.len()
            )));
        }
        let batch = Self { dim, data, labels };
        if let Some(i) = (0..batch.len()).find(|&i| batch.vector(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidParameter(format!("feature vector {i} is zero")));
        }
        if batch.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("features must be finite".into()));
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAlignment {
    pub class_id: ClassId,
    /// Mean cosine similarity over unordered same-class pairs.
    pub alignment: f64,
    pub samples: usize,
}

/// A class left out of an alignment report, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentWarning {
    pub class_id: ClassId,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentReport {
    /// Sorted by class id.
    pub classes: Vec<ClassAlignment>,
    /// Classes with fewer than two samples.
    pub skipped: Vec<AlignmentWarning>,
}

impl AlignmentReport {
    pub fn get(&self, class_id: ClassId) -> Option<f64> {
        self.classes
            .binary_search_by_key(&class_id, |c| c.class_id)
            .ok()
            .map(|i| self.classes[i].alignment)
    }
}

/// Per-class mean pairwise cosine similarity.
///
/// Vectors are normalised once; the sum over pairs uses
/// `sum_{i<j} u_i.u_j = (|sum u_i|^2 - n) / 2`, which is exact in exact
/// arithmetic and avoids the quadratic pair loop.
pub fn feature_alignment(batch: &FeatureBatch) -> AlignmentReport {
    let num_classes = batch.labels().iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = alloc::vec![alloc::vec![0.0f64; batch.dim()]; num_classes];
    let mut counts = alloc::vec![0usize; num_classes];
    for i in 0..batch.len() {
        let v = batch.vector(i);
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        let c = batch.labels()[i];
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(v) {
            *s += x / norm;
        }
    }
    let mut report = AlignmentReport::default();
    for (c, (sum, &n)) in sums.iter().zip(&counts).enumerate() {
        if n == 0 {
            continue;
        }
        if n < 2 {
            report.skipped.push(AlignmentWarning { class_id: c, samples: n });
            continue;
        }
        let sq: f64 = sum.iter().map(|x| x * x).sum();
        let pairs = (n * (n - 1) / 2) as f64;
        let alignment = ((sq - n as f64) / 2.0 / pairs).clamp(-1.0, 1.0);
        report.classes.push(ClassAlignment { class_id: c, alignment, samples: n });
    }
    report
}

/// Per-class `treated - base` over identical class sets.
pub fn alignment_gain(base: &AlignmentReport, treated: &AlignmentReport) -> Result<Vec<(ClassId, f64)>> {
    let ids = |r: &AlignmentReport| r.classes.iter().map(|c| c.class_id).collect::<Vec<_>>();
    if ids(base) != ids(treated) {
        return Err(Error::InvalidParameter("alignment reports cover different classes".into()));
    }
    Ok(base
        .classes
        .iter()
        .zip(&treated.classes)
        .map(|(b, t)| (b.class_id, t.alignment - b.alignment))
        .collect())
}

/// Sample-averaged accuracy overall and within each category. Categories
/// without test samples are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBreakdown {
    pub all: f64,
    pub many: Option<f64>,
    pub med: Option<f64>,
    pub few: Option<f64>,
}

pub fn accuracy_breakdown(
    predictions: &[ClassId],
    labels: &[ClassId],
    masks: &CategoryMasks,
) -> Result<AccuracyBreakdown> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    // [hits, total] for all / many / med / few
    let mut tally = [[0usize; 2]; 4];
    for (&p, &y) in predictions.iter().zip(labels) {
        let slot = match masks.category(y) {
            Some(Category::Many) => 1,
            Some(Category::Med) => 2,
            Some(Category::Few) => 3,
            None => return Err(Error::InvalidParameter(format!("label {y} not covered by category masks"))),
        };
        let hit = (p == y) as usize;
        for s in [0, slot] {
            tally[s][0] += hit;
            tally[s][1] += 1;
        }
    }
    let rate = |[h, n]: [usize; 2]| (n > 0).then(|| h as f64 / n as f64);
    Ok(AccuracyBreakdown {
        all: rate(tally[0]).unwrap_or(0.0),
        many: rate(tally[1]),
        med: rate(tally[2]),
        few: rate(tally[3]),
    })
}
