use rayon::prelude::*;

use super::{AttrId, ClusterPartition, Dataset, Histogram};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Full-data and per-cluster histograms of one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrCounts<T> {
    pub full: Histogram<T>,
    pub clusters: Vec<Histogram<T>>,
}

/// Group-by-(cluster, value) counts for every attribute.
///
/// This is the only view of the data the quality functions read. For exact
/// tables the sizes are the cluster cardinalities; tables assembled from
/// noisy releases carry estimated sizes instead.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable<T> {
    sizes: Vec<T>,
    total: T,
    attrs: Vec<AttrCounts<T>>,
}

impl CountTable<u64> {
    pub fn build(data: &Dataset, partition: &ClusterPartition) -> Result<Self> {
        if partition.num_rows() != data.len() {
            return Err(Error::LengthMismatch {
                expected: data.len(),
                actual: partition.num_rows(),
            });
        }
        let num_clusters = partition.num_clusters();
        let labels = partition.row_labels();
        let attrs = data
            .schema()
            .attr_ids()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|attr| {
                let column = data.column(attr)?;
                let width = data.schema().domain_size(attr)?;
                let mut flat = vec![0u64; num_clusters * width];
                for (v, label) in column.iter().zip(labels) {
                    flat[label * width + *v as usize] += 1;
                }
                let clusters: Vec<Histogram<u64>> = flat
                    .chunks(width)
                    .map(|chunk| Histogram::new(attr, chunk.to_vec()))
                    .collect();
                let mut full = Histogram::zeros(attr, width);
                for h in &clusters {
                    for (f, c) in full.counts.iter_mut().zip(&h.counts) {
                        *f += c;
                    }
                }
                Ok(AttrCounts { full, clusters })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sizes: partition.sizes(),
            total: data.len() as u64,
            attrs,
        })
    }

    pub fn to_scalar<S: Scalar>(&self) -> CountTable<S> {
        CountTable {
            sizes: self.sizes.iter().map(|s| S::from_count(*s)).collect(),
            total: S::from_count(self.total),
            attrs: self
                .attrs
                .iter()
                .map(|a| AttrCounts {
                    full: a.full.to_scalar(),
                    clusters: a.clusters.iter().map(Histogram::to_scalar).collect(),
                })
                .collect(),
        }
    }
}

impl<S: Scalar> CountTable<S> {
    /// Assemble a table from externally produced histograms; `total` is the
    /// sum of `sizes`.
    pub fn from_parts(sizes: Vec<S>, attrs: Vec<AttrCounts<S>>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::NoClusters);
        }
        for (i, a) in attrs.iter().enumerate() {
            if a.full.attribute != AttrId(i) || a.clusters.len() != sizes.len() {
                return Err(Error::DomainMismatch);
            }
            for h in &a.clusters {
                h.check_same_domain(&a.full)?;
            }
        }
        let total = crate::scalar::sum(sizes.iter().copied());
        Ok(Self {
            sizes,
            total,
            attrs,
        })
    }
}

impl<T: Copy> CountTable<T> {
    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_attrs(&self) -> usize {
        self.attrs.len()
    }

    pub fn attr_ids(&self) -> impl Iterator<Item = AttrId> {
        (0..self.attrs.len()).map(AttrId)
    }

    pub fn sizes(&self) -> &[T] {
        &self.sizes
    }

    pub fn size(&self, cluster: usize) -> T {
        self.sizes[cluster]
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn attr(&self, attr: AttrId) -> Result<&AttrCounts<T>> {
        self.attrs
            .get(attr.0)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_string()))
    }

    pub fn full(&self, attr: AttrId) -> Result<&Histogram<T>> {
        Ok(&self.attr(attr)?.full)
    }

    pub fn cluster(&self, cluster: usize, attr: AttrId) -> Result<&Histogram<T>> {
        let num_clusters = self.num_clusters();
        self.attr(attr)?
            .clusters
            .get(cluster)
            .ok_or(Error::LabelOutOfRange {
                label: cluster,
                num_clusters,
            })
    }
}

/// Per-cluster histograms of `attr` together with the full-data histogram.
pub fn cluster_histograms(
    data: &Dataset,
    partition: &ClusterPartition,
    attr: AttrId,
) -> Result<(Vec<Histogram<u64>>, Histogram<u64>)> {
    let full = data.histogram(attr)?;
    let clusters = (0..partition.num_clusters())
        .map(|c| data.histogram_of_rows(attr, partition.members(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok((clusters, full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeDef, ClusteringFunction, Schema};

    fn data() -> Dataset {
        let schema = Schema::new(vec![
            AttributeDef::categorical("x", &["a", "b"]),
            AttributeDef::categorical("y", &["p", "q", "r"]),
        ])
        .unwrap();
        Dataset::from_rows(
            schema,
            &[
                vec![0, 0],
                vec![0, 1],
                vec![1, 2],
                vec![1, 2],
                vec![0, 0],
                vec![0, 1],
            ],
        )
        .unwrap()
    }

    #[test]
    fn one_cluster_equals_full_histogram() {
        let d = data();
        let p = ClusterPartition::from_labels(vec![0; d.len()], 1).unwrap();
        let (clusters, full) = cluster_histograms(&d, &p, AttrId(1)).unwrap();
        assert_eq!(clusters[0], full);
    }

    #[test]
    fn identical_clusters_have_identical_histograms() {
        let d = data();
        // rows {0,1,2} and {4,5,3} hold the same multiset of tuples
        let p = ClusterPartition::from_labels(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let (clusters, _) = cluster_histograms(&d, &p, AttrId(0)).unwrap();
        assert_eq!(clusters[0].counts, clusters[1].counts);
        let (clusters, _) = cluster_histograms(&d, &p, AttrId(1)).unwrap();
        assert_eq!(clusters[0].counts, vec![1, 1, 1]);
        assert_eq!(clusters[1].counts, vec![1, 1, 1]);
    }

    #[test]
    fn table_matches_row_subset_histograms() {
        let d = data();
        let f = ClusteringFunction::center_based(vec![vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let p = f.assign(&d).unwrap();
        let t = CountTable::build(&d, &p).unwrap();
        for attr in d.schema().attr_ids() {
            let (clusters, full) = cluster_histograms(&d, &p, attr).unwrap();
            assert_eq!(t.full(attr).unwrap(), &full);
            for (c, h) in clusters.iter().enumerate() {
                assert_eq!(t.cluster(c, attr).unwrap(), h);
            }
        }
        assert_eq!(t.total(), 6);
        assert_eq!(t.sizes().iter().sum::<u64>(), 6);
    }
}
