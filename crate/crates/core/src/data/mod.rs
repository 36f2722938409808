//! Labeled datasets, index views over them, and agency partitioning.

mod exchange;
mod idx;
mod partition;
mod synthetic;

pub use exchange::{apply_exchange, ExchangeTransfer, LocalShards};
pub use idx::{load_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use partition::{partition_by_class, partition_random, PartitionPlan};
pub use synthetic::{generate_synthetic, generate_synthetic_split, SYNTHETIC_SIGMA};

use crate::error::{Error, Result};
use crate::nn::{Batch, Matrix};

/// Immutable labeled examples with features in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("dataset has no examples".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if let Some(bad) = features
            .as_slice()
            .iter()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "feature value {bad} outside [0, 1]"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false for a constructed dataset.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Stored size of one example: one byte per feature plus the label byte.
    pub fn bytes_per_example(&self) -> u64 {
        self.dim() as u64 + 1
    }

    /// Indices of each class, ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn all(&self) -> Subset<'_> {
        Subset {
            dataset: self,
            indices: None,
        }
    }

    pub fn subset<'a>(&'a self, indices: &'a [usize]) -> Result<Subset<'a>> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for {} examples",
                self.len()
            )));
        }
        Ok(Subset {
            dataset: self,
            indices: Some(indices),
        })
    }
}

/// A borrowed selection of rows from a [`Dataset`]. The dataset itself is
/// never copied or modified.
#[derive(Debug, Clone, Copy)]
pub struct Subset<'a> {
    dataset: &'a Dataset,
    indices: Option<&'a [usize]>,
}

impl<'a> Subset<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn len(&self) -> usize {
        self.indices.map_or(self.dataset.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row index into the underlying dataset.
    pub fn global_index(&self, pos: usize) -> usize {
        match self.indices {
            Some(ix) => ix[pos],
            None => pos,
        }
    }

    pub fn label(&self, pos: usize) -> usize {
        self.dataset.labels[self.global_index(pos)]
    }

    /// Copies the rows at `positions` (relative to this subset) into a batch.
    pub fn batch(&self, positions: &[usize]) -> Batch {
        let d = self.dataset.dim();
        let mut features = Vec::with_capacity(positions.len() * d);
        let mut labels = Vec::with_capacity(positions.len());
        for &p in positions {
            let g = self.global_index(p);
            features.extend_from_slice(self.dataset.features.row(g));
            labels.push(self.dataset.labels[g]);
        }
        Batch {
            features: Matrix::new(positions.len(), d, features).expect("sized above"),
            labels,
        }
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.dataset.class_count];
        for pos in 0..self.len() {
            hist[self.label(pos)] += 1;
        }
        hist
    }

    /// Copies the selection into a standalone dataset.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let positions: Vec<usize> = (0..self.len()).collect();
        let batch = self.batch(&positions);
        Dataset::new(batch.features, batch.labels, self.dataset.class_count)
    }
}
