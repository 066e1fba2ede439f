use super::Dataset;
use crate::error::{Error, Result};

/// A clustering function over the full tuple domain.
///
/// The end-to-end privacy guarantee assumes the function was computed
/// privately (e.g. DP k-means centers) or independently of the data. A
/// [`ClusteringFunction::LabelTable`] read from a non-private clustering of the
/// same data is accepted for evaluation but carries no such guarantee.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusteringFunction {
    /// Nearest center under squared Euclidean distance, with every attribute
    /// embedded as its domain index. Ties go to the lowest center index.
    CenterBased { centers: Vec<Vec<f64>> },
    /// Precomputed per-row labels; tuples outside the table get `default_label`.
    LabelTable {
        labels: Vec<usize>,
        default_label: usize,
        num_clusters: usize,
    },
}

impl ClusteringFunction {
    pub fn center_based(centers: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = centers.first() else {
            return Err(Error::NoClusters);
        };
        let dim = first.len();
        if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: 0,
                column: "centers".into(),
                message: "center coordinates must be finite".into(),
            });
        }
        Ok(Self::CenterBased { centers })
    }

    /// `num_clusters` defaults to one past the largest label seen.
    pub fn label_table(labels: Vec<usize>, num_clusters: Option<usize>) -> Result<Self> {
        let num_clusters = num_clusters.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
        if num_clusters == 0 {
            return Err(Error::NoClusters);
        }
        if let Some(&label) = labels.iter().find(|l| **l >= num_clusters) {
            return Err(Error::LabelOutOfRange {
                label,
                num_clusters,
            });
        }
        Ok(Self::LabelTable {
            labels,
            default_label: 0,
            num_clusters,
        })
    }

    pub fn num_clusters(&self) -> usize {
        match self {
            Self::CenterBased { centers } => centers.len(),
            Self::LabelTable { num_clusters, .. } => *num_clusters,
        }
    }

    /// Label of an arbitrary tuple of domain indices.
    pub fn label_of_tuple(&self, tuple: &[u32]) -> usize {
        match self {
            Self::CenterBased { centers } => nearest_center(centers, tuple),
            Self::LabelTable { default_label, .. } => *default_label,
        }
    }

    pub fn assign(&self, data: &Dataset) -> Result<ClusterPartition> {
        let labels = match self {
            Self::CenterBased { centers } => {
                let dim = centers[0].len();
                if dim != data.schema().len() {
                    return Err(Error::LengthMismatch {
                        expected: data.schema().len(),
                        actual: dim,
                    });
                }
                let mut tuple = vec![0u32; dim];
                (0..data.len())
                    .map(|r| {
                        for (a, slot) in tuple.iter_mut().enumerate() {
                            *slot = data.column(super::AttrId(a)).expect("in range")[r];
                        }
                        nearest_center(centers, &tuple)
                    })
                    .collect()
            }
            Self::LabelTable { labels, .. } => {
                if labels.len() != data.len() {
                    return Err(Error::LengthMismatch {
                        expected: data.len(),
                        actual: labels.len(),
                    });
                }
                labels.clone()
            }
        };
        ClusterPartition::from_labels(labels, self.num_clusters())
    }
}

fn nearest_center(centers: &[Vec<f64>], tuple: &[u32]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, center) in centers.iter().enumerate() {
        let dist: f64 = center
            .iter()
            .zip(tuple)
            .map(|(c, v)| {
                let d = c - f64::from(*v);
                d * d
            })
            .sum();
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// Disjoint per-label row lists covering every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    row_labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn from_labels(row_labels: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if num_clusters == 0 {
            return Err(Error::NoClusters);
        }
        let mut members = vec![Vec::new(); num_clusters];
        for (row, &label) in row_labels.iter().enumerate() {
            members
                .get_mut(label)
                .ok_or(Error::LabelOutOfRange {
                    label,
                    num_clusters,
                })?
                .push(row);
        }
        Ok(Self {
            row_labels,
            members,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn row_labels(&self) -> &[usize] {
        &self.row_labels
    }

    pub fn members(&self, label: usize) -> &[usize] {
        &self.members[label]
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.len() as u64).collect()
    }
}
