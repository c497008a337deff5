//! Datasets: dense storage, LIBSVM ingestion, synthetic generators,
//! sampling and prior-drift resampling.

mod drift;
mod libsvm;
mod normalize;
mod sampling;
mod synthetic;

pub use drift::{drift_resample, DriftSpec};
pub use libsvm::{parse_libsvm, read_libsvm_file, write_libsvm, LibsvmOptions};
pub use normalize::{normalize, NormStats};
pub use sampling::{split, MinibatchStream};
pub use synthetic::{gen_two_gaussians, SyntheticSpec};

use crate::error::{Error, Result};
use crate::rewards::Label;

/// Dense `n x d` feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Builds a dataset from row-major features; rejects non-finite entries.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if features.len() != dim * labels.len() {
            return Err(Error::Shape {
                expected: dim * labels.len(),
                got: features.len(),
            });
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "feature matrix",
                value: features[k],
            });
        }
        Ok(Self {
            name: name.into(),
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape {
                expected: dim,
                got: r.len(),
            });
        }
        Self::new(name, dim, rows.concat(), labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn num_positives(&self) -> usize {
        self.labels.iter().filter(|y| y.is_pos()).count()
    }

    pub fn num_negatives(&self) -> usize {
        self.len() - self.num_positives()
    }

    /// Positive fraction; 0 for an empty dataset.
    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.num_positives() as f64 / self.len() as f64
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.num_positives();
        pos > 0 && pos < self.len()
    }

    /// Copies the listed rows, in order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            name: name.into(),
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same labels, new feature matrix (used for learned representations).
    pub fn with_features(&self, dim: usize, features: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.name.clone(), dim, features, self.labels.clone())
    }

    pub(crate) fn positive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_pos()).collect()
    }

    pub(crate) fn negative_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.labels[i].is_pos()).collect()
    }
}
