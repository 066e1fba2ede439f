//! Sensitive quality functions, the Quality and MAE measures, and a brute
//! force optimum for small instances.
//!
//! These are the original normalized scores the low-sensitivity functions
//! stand in for. Their sensitivity is at least ½, so they are only used to
//! evaluate explanations and inside the non-private and DP-TabEE pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttrId, CountTable, Histogram, Schema};
use crate::error::{Error, Result};
use crate::quality::{sufficiency_p, AttributeCombination, Gamma, WeightParams};
use crate::scalar::{sum, Scalar};

/// Largest search space [`brute_force_best_combination`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Total variation distance between the normalized histograms. A side with
/// zero total makes the distance 0.
pub fn tvd<S: Scalar>(h1: &Histogram<S>, h2: &Histogram<S>) -> Result<S> {
    h1.check_same_domain(h2)?;
    let n1 = h1.scalar_total();
    let n2 = h2.scalar_total();
    if n1 <= S::zero() || n2 <= S::zero() {
        return Ok(S::zero());
    }
    let l1 = sum(h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(a, b)| (*a / n1 - *b / n2).abs()));
    Ok(S::half() * l1)
}

/// Mean over tuples of the cluster of the fraction of tuples sharing their
/// value that also lie in the cluster; `Suf_p / |D_c|`.
pub fn cluster_sufficiency<S: Scalar>(
    table: &CountTable<S>,
    cluster: usize,
    attr: AttrId,
) -> Result<S> {
    let hc = table.cluster(cluster, attr)?;
    let nc = hc.scalar_total();
    if nc <= S::zero() {
        return Ok(S::zero());
    }
    Ok(sufficiency_p(table.full(attr)?, hc)? / nc)
}

pub fn sensitive_interestingness<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
) -> Result<S> {
    ac.check_against(table)?;
    let mut total = S::zero();
    for c in 0..table.num_clusters() {
        total = total + tvd(table.full(ac.get(c))?, table.cluster(c, ac.get(c))?)?;
    }
    Ok(total / S::from_usize_lossy(table.num_clusters()))
}

/// Tuple-averaged sufficiency over the whole dataset, `Σ_c |D_c|·m_c / |D|`.
pub fn sensitive_sufficiency<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
) -> Result<S> {
    ac.check_against(table)?;
    if table.total() <= S::zero() {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    for c in 0..table.num_clusters() {
        total = total + table.size(c) * cluster_sufficiency(table, c, ac.get(c))?;
    }
    Ok(total / table.total())
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn scalar_from_u128<S: Scalar>(v: u128) -> S {
    match u64::try_from(v) {
        Ok(v) => S::from_count(v),
        Err(_) => S::from_f64(v as f64).expect("binomial representable"),
    }
}

/// Expected permutation diversity of one group of clusters sharing an
/// attribute, given the pairwise distance matrix `dist` (row-major, `m × m`).
///
/// In a uniformly random order, element `x` at position `s + 1` sees a
/// uniformly random `s`-subset of the others before it, and the smallest of
/// the sorted distances `d_1 ≤ … ≤ d_{m−1}` is `d_r` with probability
/// `C(m−1−r, s−1) / C(m−1, s)`. The first element contributes nothing, and a
/// lone element counts as fully diverse.
pub fn expected_perm_diversity<S: Scalar>(dist: &[S], m: usize) -> S {
    if m == 0 {
        return S::zero();
    }
    if m == 1 {
        return S::one();
    }
    let others = m - 1;
    // weight[r - 1] = Σ_s C(m−1−r, s−1) / C(m−1, s)
    let weights: Vec<S> = (1..=others)
        .map(|r| {
            sum((1..=others).map(|s| {
                scalar_from_u128::<S>(binomial(others - r, s - 1))
                    / scalar_from_u128::<S>(binomial(others, s))
            }))
        })
        .collect();
    let mut total = S::zero();
    for x in 0..m {
        let mut d: Vec<S> = (0..m)
            .filter(|y| *y != x)
            .map(|y| dist[x * m + y])
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        total = total + sum(d.iter().zip(&weights).map(|(d, w)| *d * *w));
    }
    total / S::from_usize_lossy(m)
}

/// Sum over attributes of the expected permutation diversity of the
/// clusters they explain, divided by `|C|` so the result lies in `[0, 1]`.
pub fn sensitive_diversity<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
) -> Result<S> {
    ac.check_against(table)?;
    let mut total = S::zero();
    for attr in ac.distinct() {
        let group: Vec<usize> = (0..ac.len()).filter(|c| ac.get(*c) == attr).collect();
        let m = group.len();
        let mut dist = vec![S::zero(); m * m];
        for i in 0..m {
            for j in i + 1..m {
                let d = tvd(
                    table.cluster(group[i], attr)?,
                    table.cluster(group[j], attr)?,
                )?;
                dist[i * m + j] = d;
                dist[j * m + i] = d;
            }
        }
        total = total + expected_perm_diversity(&dist, m);
    }
    Ok(total / S::from_usize_lossy(table.num_clusters()))
}

/// The three normalized components of Quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityParts<S> {
    pub int: S,
    pub suf: S,
    pub div: S,
}

impl<S: Scalar> QualityParts<S> {
    pub fn weighted(&self, weights: &WeightParams<S>) -> S {
        weights.lambda_int * self.int
            + weights.lambda_suf * self.suf
            + weights.lambda_div * self.div
    }
}

pub fn quality_parts<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
) -> Result<QualityParts<S>> {
    Ok(QualityParts {
        int: sensitive_interestingness(table, ac)?,
        suf: sensitive_sufficiency(table, ac)?,
        div: sensitive_diversity(table, ac)?,
    })
}

pub fn quality<S: Scalar>(
    table: &CountTable<S>,
    ac: &AttributeCombination,
    weights: &WeightParams<S>,
) -> Result<S> {
    Ok(quality_parts(table, ac)?.weighted(weights))
}

/// Fraction of clusters whose attributes differ.
pub fn mae(ac: &AttributeCombination, ac_star: &AttributeCombination) -> Result<f64> {
    if ac.len() != ac_star.len() {
        return Err(Error::LabelSetMismatch {
            left: ac.len(),
            right: ac_star.len(),
        });
    }
    if ac.is_empty() {
        return Ok(0.0);
    }
    let differ = ac
        .as_slice()
        .iter()
        .zip(ac_star.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(differ as f64 / ac.len() as f64)
}

/// Per-(cluster, attribute) sensitive scores and per-attribute pairwise
/// cluster distances, for scoring many combinations.
#[derive(Debug, Clone)]
pub struct SensitiveCache<S> {
    num_clusters: usize,
    num_attrs: usize,
    sizes: Vec<S>,
    total: S,
    tvd: Vec<S>,
    suf: Vec<S>,
    // [attr][i][j]
    pair_tvd: Vec<S>,
}

impl<S: Scalar> SensitiveCache<S> {
    pub fn build(table: &CountTable<S>) -> Result<Self> {
        let m = table.num_clusters();
        let na = table.num_attrs();
        let per_attr = (0..na)
            .into_par_iter()
            .map(|a| {
                let attr = AttrId(a);
                let mut t = Vec::with_capacity(m);
                let mut s = Vec::with_capacity(m);
                let mut pair = vec![S::zero(); m * m];
                for c in 0..m {
                    t.push(tvd(table.full(attr)?, table.cluster(c, attr)?)?);
                    s.push(cluster_sufficiency(table, c, attr)?);
                    for c2 in c + 1..m {
                        let d = tvd(table.cluster(c, attr)?, table.cluster(c2, attr)?)?;
                        pair[c * m + c2] = d;
                        pair[c2 * m + c] = d;
                    }
                }
                Ok((t, s, pair))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tvd_v = vec![S::zero(); m * na];
        let mut suf_v = vec![S::zero(); m * na];
        let mut pair_tvd = Vec::with_capacity(na * m * m);
        for (a, (t, s, pair)) in per_attr.into_iter().enumerate() {
            for c in 0..m {
                tvd_v[c * na + a] = t[c];
                suf_v[c * na + a] = s[c];
            }
            pair_tvd.extend(pair);
        }
        Ok(Self {
            num_clusters: m,
            num_attrs: na,
            sizes: table.sizes().to_vec(),
            total: table.total(),
            tvd: tvd_v,
            suf: suf_v,
            pair_tvd,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_attrs(&self) -> usize {
        self.num_attrs
    }

    /// TVD between the full-data and in-cluster distributions.
    pub fn tvd(&self, cluster: usize, attr: AttrId) -> S {
        self.tvd[cluster * self.num_attrs + attr.0]
    }

    /// Per-cluster sufficiency `m_c`.
    pub fn suf(&self, cluster: usize, attr: AttrId) -> S {
        self.suf[cluster * self.num_attrs + attr.0]
    }

    /// Sensitive single-cluster score, in `[0, 1]`.
    pub fn single(&self, cluster: usize, attr: AttrId, gamma: Gamma<S>) -> S {
        gamma.int * self.tvd(cluster, attr) + gamma.suf * self.suf(cluster, attr)
    }

    pub fn parts(&self, ac: &[AttrId]) -> QualityParts<S> {
        let m = self.num_clusters;
        let mm = S::from_usize_lossy(m);
        let int = sum(ac.iter().enumerate().map(|(c, a)| self.tvd(c, *a))) / mm;
        let suf = if self.total <= S::zero() {
            S::zero()
        } else {
            sum(ac
                .iter()
                .enumerate()
                .map(|(c, a)| self.sizes[c] * self.suf(c, *a)))
                / self.total
        };
        let mut div = S::zero();
        let mut seen: Vec<AttrId> = Vec::new();
        for a in ac {
            if seen.contains(a) {
                continue;
            }
            seen.push(*a);
            let group: Vec<usize> = (0..m).filter(|c| ac[*c] == *a).collect();
            let g = group.len();
            let mut dist = vec![S::zero(); g * g];
            for i in 0..g {
                for j in 0..g {
                    dist[i * g + j] = self.pair_tvd[a.0 * m * m + group[i] * m + group[j]];
                }
            }
            div = div + expected_perm_diversity(&dist, g);
        }
        QualityParts {
            int,
            suf,
            div: div / mm,
        }
    }

    pub fn quality(&self, ac: &[AttrId], weights: &WeightParams<S>) -> S {
        self.parts(ac).weighted(weights)
    }
}

/// Mixed-radix odometer over per-cluster option lists; the first cluster is
/// the most significant digit, so iteration is lexicographic.
pub(crate) struct Odometer<'a> {
    options: &'a [Vec<AttrId>],
    digits: Vec<usize>,
    current: Vec<AttrId>,
    done: bool,
}

impl<'a> Odometer<'a> {
    pub(crate) fn new(options: &'a [Vec<AttrId>]) -> Self {
        let done = options.is_empty() || options.iter().any(Vec::is_empty);
        Self {
            options,
            digits: vec![0; options.len()],
            current: options
                .iter()
                .map(|o| o.first().copied().unwrap_or(AttrId(0)))
                .collect(),
            done,
        }
    }

    /// Start at the `index`-th combination in lexicographic order.
    pub(crate) fn starting_at(options: &'a [Vec<AttrId>], mut index: u64) -> Self {
        let mut od = Self::new(options);
        for pos in (0..options.len()).rev() {
            let radix = options[pos].len() as u64;
            od.digits[pos] = (index % radix) as usize;
            od.current[pos] = options[pos][od.digits[pos]];
            index /= radix;
        }
        if index > 0 {
            od.done = true;
        }
        od
    }

    pub(crate) fn current(&self) -> Option<&[AttrId]> {
        (!self.done).then_some(self.current.as_slice())
    }

    pub(crate) fn advance(&mut self) {
        for pos in (0..self.options.len()).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.options[pos].len() {
                self.current[pos] = self.options[pos][self.digits[pos]];
                return;
            }
            self.digits[pos] = 0;
            self.current[pos] = self.options[pos][0];
        }
        self.done = true;
    }
}

/// Natural log of the number of combinations.
pub(crate) fn log_search_space(options: &[Vec<AttrId>]) -> f64 {
    options.iter().map(|o| (o.len() as f64).ln()).sum()
}

/// Exact argmax of Quality over every combination drawn from `attrs`;
/// ties resolve to the lexicographically first combination in `attrs` order.
pub fn brute_force_best_combination<S: Scalar>(
    table: &CountTable<S>,
    attrs: &[AttrId],
    weights: &WeightParams<S>,
) -> Result<AttributeCombination> {
    if attrs.is_empty() {
        return Err(Error::EmptyAttributeSet);
    }
    let options = vec![attrs.to_vec(); table.num_clusters()];
    let log_size = log_search_space(&options);
    if log_size > BRUTE_FORCE_LIMIT.ln() + 1e-9 {
        return Err(Error::SearchSpaceTooLarge {
            size: log_size.exp(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let cache = SensitiveCache::build(table)?;
    let mut od = Odometer::new(&options);
    let mut best: Option<(Vec<AttrId>, S)> = None;
    while let Some(ac) = od.current() {
        let q = cache.quality(ac, weights);
        if best.as_ref().is_none_or(|(_, b)| q > *b) {
            best = Some((ac.to_vec(), q));
        }
        od.advance();
    }
    Ok(AttributeCombination::new(
        best.expect("non-empty search space").0,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEval {
    pub label: usize,
    pub attribute: String,
    pub interestingness: f64,
    pub sufficiency: f64,
}

/// Quality of an explanation against the exact data and MAE against a
/// reference combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub quality: f64,
    pub reference_quality: f64,
    pub mae: f64,
    pub interestingness: f64,
    pub sufficiency: f64,
    pub diversity: f64,
    pub clusters: Vec<ClusterEval>,
    pub runtime_secs: f64,
}

impl EvalReport {
    pub fn build(
        table: &CountTable<f64>,
        schema: &Schema,
        ac: &AttributeCombination,
        reference: &AttributeCombination,
        weights: &WeightParams<f64>,
    ) -> Result<Self> {
        let start = std::time::Instant::now();
        let mae = mae(ac, reference)?;
        let parts = quality_parts(table, ac)?;
        let reference_quality = quality(table, reference, weights)?;
        let clusters = (0..ac.len())
            .map(|c| {
                let attr = ac.get(c);
                Ok(ClusterEval {
                    label: c,
                    attribute: schema.attribute(attr)?.name.clone(),
                    interestingness: tvd(table.full(attr)?, table.cluster(c, attr)?)?,
                    sufficiency: cluster_sufficiency(table, c, attr)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            quality: parts.weighted(weights),
            reference_quality,
            mae,
            interestingness: parts.int,
            sufficiency: parts.suf,
            diversity: parts.div,
            clusters,
            runtime_secs: start.elapsed().as_secs_f64(),
        })
    }

    pub const CSV_HEADER: &'static str =
        "quality,reference_quality,mae,interestingness,sufficiency,diversity,runtime_secs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.quality,
            self.reference_quality,
            self.mae,
            self.interestingness,
            self.sufficiency,
            self.diversity,
            self.runtime_secs
        )
    }
}
