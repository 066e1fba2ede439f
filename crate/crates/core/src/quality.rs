//! Low-sensitivity quality functions.
//!
//! Every function here has sensitivity at most 1 under the addition or
//! removal of a single tuple, which is what lets the selection mechanisms use
//! a unit sensitivity constant. Values are unnormalized: the single-cluster
//! scores live in `[0, |D_c|]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttrId, CountTable, Histogram};
use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

/// Weights of the global score. The three lambdas sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams<S> {
    pub lambda_int: S,
    pub lambda_suf: S,
    pub lambda_div: S,
}

/// Single-cluster weights derived from [`WeightParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma<S> {
    pub int: S,
    pub suf: S,
}

impl<S: Scalar> WeightParams<S> {
    pub fn new(lambda_int: S, lambda_suf: S, lambda_div: S) -> Result<Self> {
        let w = Self {
            lambda_int,
            lambda_suf,
            lambda_div,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn equal() -> Self {
        let third = S::one() / S::from_count(3);
        Self {
            lambda_int: third,
            lambda_suf: third,
            lambda_div: third,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.lambda_int, self.lambda_suf, self.lambda_div];
        if parts.iter().any(|l| *l < S::zero()) {
            return Err(Error::InvalidWeights(format!(
                "weights must be non-negative, got {parts:?}"
            )));
        }
        let total = sum(parts).to_f64_lossy();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(())
    }

    /// Renormalize `(lambda_int, lambda_suf)` to sum to one. When both are
    /// zero the single-cluster score still needs weights; they are split
    /// evenly.
    pub fn gamma(&self) -> Gamma<S> {
        let denom = self.lambda_int + self.lambda_suf;
        if denom.is_zero() {
            return Gamma {
                int: S::half(),
                suf: S::half(),
            };
        }
        let suf = self.lambda_suf / denom;
        Gamma {
            int: S::one() - suf,
            suf,
        }
    }

    pub fn to_f64(&self) -> WeightParams<f64> {
        WeightParams {
            lambda_int: self.lambda_int.to_f64_lossy(),
            lambda_suf: self.lambda_suf.to_f64_lossy(),
            lambda_div: self.lambda_div.to_f64_lossy(),
        }
    }
}

/// One explanation attribute per cluster label, indexed by label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeCombination(Vec<AttrId>);

impl AttributeCombination {
    pub fn new(attrs: Vec<AttrId>) -> Self {
        Self(attrs)
    }

    /// The same attribute for every cluster.
    pub fn uniform(attr: AttrId, num_clusters: usize) -> Self {
        Self(vec![attr; num_clusters])
    }

    pub fn get(&self, cluster: usize) -> AttrId {
        self.0[cluster]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[AttrId] {
        &self.0
    }

    /// Distinct attributes in first-appearance order.
    pub fn distinct(&self) -> Vec<AttrId> {
        let mut out: Vec<AttrId> = Vec::new();
        for a in &self.0 {
            if !out.contains(a) {
                out.push(*a);
            }
        }
        out
    }

    pub(crate) fn check_against<T: Copy>(&self, table: &CountTable<T>) -> Result<()> {
        if self.0.len() != table.num_clusters() {
            return Err(Error::LengthMismatch {
                expected: table.num_clusters(),
                actual: self.0.len(),
            });
        }
        if let Some(a) = self.0.iter().find(|a| a.0 >= table.num_attrs()) {
            return Err(Error::UnknownAttribute(a.to_string()));
        }
        Ok(())
    }
}

/// Data-dependent upper ends of the diversity and global score ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange<S> {
    pub r_div: S,
    pub r_glscore: S,
}

fn binom2<S: Scalar>(m: usize) -> S {
    S::from_usize_lossy(m * (m - 1) / 2)
}

/// `½ Σ_a |cnt_a(D_c) − (n_c/n)·cnt_a(D)|`, i.e. `n_c · TVD` for a non-empty
/// cluster.
pub fn interestingness_p<S: Scalar>(
    h_d: &Histogram<S>,
    h_c: &Histogram<S>,
    n: S,
    nc: S,
) -> Result<S> {
    h_d.check_same_domain(h_c)?;
    if n.is_zero() {
        return Ok(S::zero());
    }
    let ratio = nc / n;
    let l1 = sum(h_c
        .counts
        .iter()
        .zip(&h_d.counts)
        .map(|(c, d)| (*c - ratio * *d).abs()));
    Ok(S::half() * l1)
}

/// `Σ_{a : cnt_a(D_c) > 0} cnt_a(D_c)² / cnt_a(D)`.
pub fn sufficiency_p<S: Scalar>(h_d: &Histogram<S>, h_c: &Histogram<S>) -> Result<S> {
    h_d.check_same_domain(h_c)?;
    let mut total = S::zero();
    for (bin, (c, d)) in h_c.counts.iter().zip(&h_d.counts).enumerate() {
        if *c <= S::zero() {
            continue;
        }
        if c > d {
            return Err(Error::CountInversion {
                bin,
                cluster: format!("{c:?}"),
                total: format!("{d:?}"),
            });
        }
        total = total + *c * *c / *d;
    }
    Ok(total)
}

/// Diversity of the explanations of two clusters. Histograms carry their
/// attribute ids; different attributes are maximally diverse.
pub fn pair_diversity<S: Scalar>(
    h_c: &Histogram<S>,
    h_c2: &Histogram<S>,
    nc: S,
    nc2: S,
) -> Result<S> {
    let weight = nc.min_of(nc2);
    if h_c.attribute != h_c2.attribute {
        return Ok(weight);
    }
    h_c.check_same_domain(h_c2)?;
    let d1 = nc.max_of(S::one());
    let d2 = nc2.max_of(S::one());
    let l1 = sum(h_c
        .counts
        .iter()
        .zip(&h_c2.counts)
        .map(|(a, b)| (*a / d1 - *b / d2).abs()));
    Ok(weight * S::half() * l1)
}

/// Average pair diversity over unordered cluster pairs; 0 for a single cluster.
pub fn global_diversity<S: Scalar>(table: &CountTable<S>, ac: &AttributeCombination) -> Result<S> {
    ac.check_against(table)?;
    let m = table.num_clusters();
    if m < 2 {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    for i in 0..m {
        for j in i + 1..m {
            total = total
                + pair_diversity(
                    table.cluster(i, ac.get(i))?,
                    table.cluster(j, ac.get(j))?,
                    table.size(i),
                    table.size(j),
                )?;
        }
    }
    Ok(total / binom2(m))
}

pub fn single_cluster_int<S: Scalar>(
    table: &CountTable<S>,
    cluster: usize,
    attr: AttrId,
) -> Result<S> {
    interestingness_p(
        table.full(attr)?,
        table.cluster(cluster, attr)?,
        table.total(),
        table.size(cluster),
    )
}

pub fn single_cluster_suf<S: Scalar>(
    table: &CountTable<S>,
    cluster: usize,
    attr: AttrId,
) -> Result<S> {
    sufficiency_p(table.full(attr)?, table.cluster(cluster, attr)?)
}

/// `γ_int·Int_p + γ_suf·Suf_p` of `attr` as the explanation of `cluster`.
pub fn single_cluster_score<S: Scalar>(
    table: &CountTable<S>,
    cluster: usize,
    attr: AttrId,
    gamma: Gamma<S>,
) -> Result<S> {
    Ok(gamma.int * single_cluster_int(table, cluster, attr)?
        + gamma.suf * single_cluster_suf(table, cluster, attr)?)
}

pub fn global_score<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
    weights: &WeightParams<S>,
) -> Result<S> {
    ac.check_against(table)?;
    let m = S::from_usize_lossy(table.num_clusters());
    let mut int = S::zero();
    let mut suf = S::zero();
    for c in 0..table.num_clusters() {
        int = int + single_cluster_int(table, c, ac.get(c))?;
        suf = suf + single_cluster_suf(table, c, ac.get(c))?;
    }
    let div = global_diversity(table, ac)?;
    Ok(weights.lambda_int * (int / m) + weights.lambda_suf * (suf / m) + weights.lambda_div * div)
}

/// Upper range ends, computed from cluster sizes alone.
pub fn score_ranges<S: Scalar>(sizes: &[S], weights: &WeightParams<S>) -> ScoreRange<S> {
    let m = sizes.len();
    let r_div = if m < 2 {
        S::zero()
    } else {
        let mut sorted = sizes.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let weighted = sum(sorted
            .iter()
            .enumerate()
            .map(|(i, s)| S::from_usize_lossy(m - 1 - i) * *s));
        weighted / binom2(m)
    };
    let mean = if m == 0 {
        S::zero()
    } else {
        sum(sizes.iter().copied()) / S::from_usize_lossy(m)
    };
    ScoreRange {
        r_div,
        r_glscore: (weights.lambda_int + weights.lambda_suf) * mean + weights.lambda_div * r_div,
    }
}

/// Precomputed per-(cluster, attribute) scores and same-attribute pair
/// diversities, so a combination is scored in `O(|C|²)` without touching
/// histograms.
#[derive(Debug, Clone)]
pub struct ScoreCache<S> {
    num_clusters: usize,
    num_attrs: usize,
    sizes: Vec<S>,
    int: Vec<S>,
    suf: Vec<S>,
    // [attr][i][j] for i < j
    same_attr_div: Vec<S>,
}

impl<S: Scalar> ScoreCache<S> {
    pub fn build(table: &CountTable<S>) -> Result<Self> {
        let m = table.num_clusters();
        let na = table.num_attrs();
        let per_attr = (0..na)
            .into_par_iter()
            .map(|a| {
                let attr = AttrId(a);
                let mut int = Vec::with_capacity(m);
                let mut suf = Vec::with_capacity(m);
                let mut div = vec![S::zero(); m * m];
                for c in 0..m {
                    int.push(single_cluster_int(table, c, attr)?);
                    suf.push(single_cluster_suf(table, c, attr)?);
                    for c2 in c + 1..m {
                        div[c * m + c2] = pair_diversity(
                            table.cluster(c, attr)?,
                            table.cluster(c2, attr)?,
                            table.size(c),
                            table.size(c2),
                        )?;
                    }
                }
                Ok((int, suf, div))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut int = vec![S::zero(); m * na];
        let mut suf = vec![S::zero(); m * na];
        let mut same_attr_div = Vec::with_capacity(na * m * m);
        for (a, (i_col, s_col, div)) in per_attr.into_iter().enumerate() {
            for c in 0..m {
                int[c * na + a] = i_col[c];
                suf[c * na + a] = s_col[c];
            }
            same_attr_div.extend(div);
        }
        Ok(Self {
            num_clusters: m,
            num_attrs: na,
            sizes: table.sizes().to_vec(),
            int,
            suf,
            same_attr_div,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_attrs(&self) -> usize {
        self.num_attrs
    }

    pub fn int(&self, cluster: usize, attr: AttrId) -> S {
        self.int[cluster * self.num_attrs + attr.0]
    }

    pub fn suf(&self, cluster: usize, attr: AttrId) -> S {
        self.suf[cluster * self.num_attrs + attr.0]
    }

    pub fn single(&self, cluster: usize, attr: AttrId, gamma: Gamma<S>) -> S {
        gamma.int * self.int(cluster, attr) + gamma.suf * self.suf(cluster, attr)
    }

    /// Pair diversity for clusters `i < j`.
    pub fn pair(&self, i: usize, a_i: AttrId, j: usize, a_j: AttrId) -> S {
        if a_i != a_j {
            return self.sizes[i].min_of(self.sizes[j]);
        }
        let m = self.num_clusters;
        self.same_attr_div[a_i.0 * m * m + i * m + j]
    }

    /// Global score of the combination given as one attribute per label.
    /// Same summation order as [`global_score`].
    pub fn global(&self, ac: &[AttrId], weights: &WeightParams<S>) -> S {
        let m = self.num_clusters;
        let mut int = S::zero();
        let mut suf = S::zero();
        for (c, a) in ac.iter().enumerate() {
            int = int + self.int(c, *a);
            suf = suf + self.suf(c, *a);
        }
        let div = if m < 2 {
            S::zero()
        } else {
            let mut total = S::zero();
            for i in 0..m {
                for j in i + 1..m {
                    total = total + self.pair(i, ac[i], j, ac[j]);
                }
            }
            total / binom2(m)
        };
        let mm = S::from_usize_lossy(m);
        weights.lambda_int * (int / mm) + weights.lambda_suf * (suf / mm) + weights.lambda_div * div
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttrCounts;
    use crate::Exact;

    fn h(attr: usize, counts: &[i64]) -> Histogram<Exact> {
        Histogram::new(
            AttrId(attr),
            counts.iter().map(|c| Exact::from_integer(*c)).collect(),
        )
    }

    fn r(n: i64, d: i64) -> Exact {
        Exact::new(n, d)
    }

    #[test]
    fn interestingness_examples() {
        let d = h(0, &[3, 1]);
        assert_eq!(
            interestingness_p(&d, &h(0, &[1, 1]), r(4, 1), r(2, 1)).unwrap(),
            r(1, 2)
        );
        assert_eq!(
            interestingness_p(&d, &d, r(4, 1), r(4, 1)).unwrap(),
            r(0, 1)
        );
        assert_eq!(
            interestingness_p(&d, &h(0, &[0, 0]), r(4, 1), r(0, 1)).unwrap(),
            r(0, 1)
        );
        let empty = h(0, &[0, 0]);
        assert_eq!(
            interestingness_p(&empty, &empty, r(0, 1), r(0, 1)).unwrap(),
            r(0, 1)
        );
        assert!(matches!(
            interestingness_p(&d, &h(1, &[1, 1]), r(4, 1), r(2, 1)),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn sufficiency_examples() {
        assert_eq!(sufficiency_p(&h(0, &[4]), &h(0, &[2])).unwrap(), r(1, 1));
        // values occurring only inside the cluster
        assert_eq!(
            sufficiency_p(&h(0, &[2, 5, 3]), &h(0, &[2, 0, 3])).unwrap(),
            r(5, 1)
        );
        assert_eq!(
            sufficiency_p(&h(0, &[2, 5]), &h(0, &[0, 0])).unwrap(),
            r(0, 1)
        );
        assert!(matches!(
            sufficiency_p(&h(0, &[2, 5]), &h(0, &[3, 0])),
            Err(Error::CountInversion { bin: 0, .. })
        ));
    }

    #[test]
    fn pair_diversity_examples() {
        assert_eq!(
            pair_diversity(&h(0, &[2]), &h(1, &[1, 2]), r(2, 1), r(3, 1)).unwrap(),
            r(2, 1)
        );
        assert_eq!(
            pair_diversity(&h(0, &[1, 1]), &h(0, &[3, 3]), r(2, 1), r(6, 1)).unwrap(),
            r(0, 1)
        );
        assert_eq!(
            pair_diversity(&h(0, &[2, 0]), &h(0, &[0, 3]), r(2, 1), r(3, 1)).unwrap(),
            r(2, 1)
        );
        assert!(pair_diversity(&h(0, &[2, 0]), &h(0, &[0, 3, 1]), r(2, 1), r(4, 1)).is_err());
    }

    #[test]
    fn single_cluster_linear_combination() {
        let g = Gamma {
            int: r(1, 2),
            suf: r(1, 2),
        };
        // Int_p = 0.5, Suf_p = 1.0
        let v = g.int * r(1, 2) + g.suf * r(1, 1);
        assert_eq!(v, r(3, 4));
    }

    fn table(sizes: &[i64], full: &[&[i64]], clusters: &[&[&[i64]]]) -> CountTable<Exact> {
        let attrs = full
            .iter()
            .enumerate()
            .map(|(a, f)| AttrCounts {
                full: h(a, f),
                clusters: clusters.iter().map(|c| h(a, c[a])).collect(),
            })
            .collect();
        CountTable::from_parts(
            sizes.iter().map(|s| Exact::from_integer(*s)).collect(),
            attrs,
        )
        .unwrap()
    }

    #[test]
    fn global_score_hand_example() {
        // attribute 0: D = [3,1], c0 = [1,1], c1 = [2,0]
        // attribute 1: D = [2,2], c0 = [2,0], c1 = [0,2]
        let t = table(
            &[2, 2],
            &[&[3, 1], &[2, 2]],
            &[&[&[1, 1], &[2, 0]], &[&[2, 0], &[0, 2]]],
        );
        let w = WeightParams::<Exact>::equal();
        let ac = AttributeCombination::new(vec![AttrId(0), AttrId(1)]);
        // Int_p: c0 on A0 = ½(|1−1.5|+|1−0.5|) = 0.5; c1 on A1 = ½(0+... ) = ½(|0−1|+|2−1|) = 1
        // Suf_p: c0 on A0 = 1/3 + 1 = 4/3; c1 on A1 = 0 + 4/2 = 2
        // Div: different attributes, min(2,2) = 2
        let expect =
            r(1, 3) * (r(3, 2) / r(2, 1)) + r(1, 3) * (r(10, 3) / r(2, 1)) + r(1, 3) * r(2, 1);
        assert_eq!(global_score(&t, &ac, &w).unwrap(), expect);
        let cache = ScoreCache::build(&t).unwrap();
        assert_eq!(cache.global(ac.as_slice(), &w), expect);
    }

    #[test]
    fn equal_weights_on_components() {
        // Int mean 0.5, Suf mean 1.0, Div 2.0 under equal weights
        let w = WeightParams::<f64>::equal();
        let v = w.lambda_int * 0.5 + w.lambda_suf * 1.0 + w.lambda_div * 2.0;
        assert!((v - 3.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_div_weight_reduces_to_mean_single_scores() {
        let t = table(
            &[2, 2],
            &[&[3, 1], &[2, 2]],
            &[&[&[1, 1], &[2, 0]], &[&[2, 0], &[0, 2]]],
        );
        let w = WeightParams::new(r(1, 4), r(3, 4), r(0, 1)).unwrap();
        let g = w.gamma();
        assert_eq!(g.suf, r(3, 4));
        for ac in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let ac = AttributeCombination::new(ac.iter().map(|a| AttrId(*a)).collect());
            let mean = (single_cluster_score(&t, 0, ac.get(0), g).unwrap()
                + single_cluster_score(&t, 1, ac.get(1), g).unwrap())
                / r(2, 1);
            assert_eq!(global_score(&t, &ac, &w).unwrap(), mean);
        }
    }

    #[test]
    fn distinct_attributes_hit_diversity_range_maximum() {
        let sizes = [5i64, 1, 3, 2];
        let full: Vec<Vec<i64>> = (0..4).map(|_| vec![11]).collect();
        let full_refs: Vec<&[i64]> = full.iter().map(Vec::as_slice).collect();
        let per_cluster: Vec<Vec<Vec<i64>>> = sizes
            .iter()
            .map(|s| (0..4).map(|_| vec![*s]).collect())
            .collect();
        let per_refs: Vec<Vec<&[i64]>> = per_cluster
            .iter()
            .map(|c| c.iter().map(Vec::as_slice).collect())
            .collect();
        let per_refs2: Vec<&[&[i64]]> = per_refs.iter().map(Vec::as_slice).collect();
        let t = table(&sizes, &full_refs, &per_refs2);
        let ac = AttributeCombination::new((0..4).map(AttrId).collect());
        let div = global_diversity(&t, &ac).unwrap();
        let range = score_ranges(t.sizes(), &WeightParams::equal());
        assert_eq!(div, range.r_div);
        // sizes sorted [1,2,3,5] → (3·1 + 2·2 + 1·3) / 6
        assert_eq!(div, r(10, 6));
    }

    #[test]
    fn score_range_examples() {
        let w = WeightParams::<Exact>::equal();
        assert_eq!(score_ranges(&[r(2, 1), r(3, 1)], &w).r_div, r(2, 1));
        for m in 2..=6usize {
            let sizes = vec![r(7, 1); m];
            assert_eq!(score_ranges(&sizes, &w).r_div, r(7, 1));
        }
        let w0 = WeightParams::new(r(1, 2), r(1, 2), r(0, 1)).unwrap();
        assert_eq!(score_ranges(&[r(2, 1), r(4, 1)], &w0).r_glscore, r(3, 1));
        assert_eq!(score_ranges(&[r(2, 1)], &w).r_div, r(0, 1));
    }

    #[test]
    fn identical_clusters_same_attribute_have_zero_diversity() {
        let t = table(
            &[2, 2, 2],
            &[&[3, 3]],
            &[&[&[1, 1]], &[&[1, 1]], &[&[1, 1]]],
        );
        let ac = AttributeCombination::uniform(AttrId(0), 3);
        assert_eq!(global_diversity(&t, &ac).unwrap(), r(0, 1));
    }

    #[test]
    fn single_cluster_diversity_is_zero() {
        let t = table(&[4], &[&[3, 1]], &[&[&[3, 1]]]);
        assert_eq!(
            global_diversity(&t, &AttributeCombination::uniform(AttrId(0), 1)).unwrap(),
            r(0, 1)
        );
    }

    #[test]
    fn weight_validation() {
        assert!(WeightParams::new(0.5, 0.5, 0.1).is_err());
        assert!(WeightParams::new(-0.5, 1.0, 0.5).is_err());
        assert!(WeightParams::new(0.2, 0.3, 0.5).is_ok());
        let g = WeightParams::new(0.0, 0.0, 1.0).unwrap().gamma();
        assert_eq!((g.int, g.suf), (0.5, 0.5));
    }
}
