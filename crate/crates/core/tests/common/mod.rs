//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use dpclustx::dataset::{ClusterPartition, ClusteringFunction};
use dpclustx::dpmech::RngStream;
use dpclustx::quality::AttributeCombination;
use dpclustx::{AttrId, AttributeDef, CountTable, Dataset, Schema};
use rand::Rng;

pub fn rng(seed: u64, tag: &str) -> RngStream {
    RngStream::new(seed, tag, &[])
}

/// A dataset where attribute `j < clusters` is 1 exactly on the rows of
/// cluster `j`, and the remaining attributes are uniform noise.
pub struct Planted {
    pub data: Dataset,
    pub partition: ClusterPartition,
    pub counts: CountTable<u64>,
    pub planted: AttributeCombination,
}

pub fn planted(seed: u64, clusters: usize, attrs: usize, rows: usize) -> Planted {
    assert!(attrs >= clusters);
    let mut r = rng(seed, "planted");
    let mut defs = Vec::with_capacity(attrs);
    let mut sizes = Vec::with_capacity(attrs);
    for j in 0..attrs {
        let size = if j < clusters {
            2
        } else {
            r.random_range(2..=8)
        };
        let labels: Vec<String> = (0..size).map(|v| format!("v{v}")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        defs.push(AttributeDef::categorical(format!("a{j}"), &refs));
        sizes.push(size as u32);
    }
    let schema = Schema::new(defs).unwrap();
    let mut labels = Vec::with_capacity(rows);
    let mut table = Vec::with_capacity(rows);
    for i in 0..rows {
        // every cluster non-empty, the rest uniform
        let c = if i < clusters {
            i
        } else {
            r.random_range(0..clusters)
        };
        let row: Vec<u32> = (0..attrs)
            .map(|j| {
                if j < clusters {
                    u32::from(c == j)
                } else {
                    r.random_range(0..sizes[j])
                }
            })
            .collect();
        labels.push(c);
        table.push(row);
    }
    let data = Dataset::from_rows(schema, &table).unwrap();
    let partition = ClusterPartition::from_labels(labels, clusters).unwrap();
    let counts = CountTable::build(&data, &partition).unwrap();
    Planted {
        data,
        partition,
        counts,
        planted: AttributeCombination::new((0..clusters).map(AttrId).collect()),
    }
}

/// Random small instance under a random center-based clustering, which is
/// total over the tuple domain so neighbouring datasets reuse it.
pub struct Instance {
    pub data: Dataset,
    pub f: ClusteringFunction,
    pub domain_sizes: Vec<u32>,
}

pub fn random_instance<R: Rng>(
    r: &mut R,
    max_clusters: usize,
    max_attrs: usize,
    max_domain: u32,
    max_rows: usize,
) -> Instance {
    let clusters = r.random_range(1..=max_clusters);
    let attrs = r.random_range(1..=max_attrs);
    let domain_sizes: Vec<u32> = (0..attrs).map(|_| r.random_range(1..=max_domain)).collect();
    let defs = domain_sizes
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let labels: Vec<String> = (0..*s).map(|v| v.to_string()).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            AttributeDef::categorical(format!("a{j}"), &refs)
        })
        .collect();
    let schema = Schema::new(defs).unwrap();
    let rows = r.random_range(0..=max_rows);
    let table: Vec<Vec<u32>> = (0..rows).map(|_| random_tuple(r, &domain_sizes)).collect();
    let centers = (0..clusters)
        .map(|_| {
            domain_sizes
                .iter()
                .map(|s| r.random_range(0.0..f64::from(*s)))
                .collect()
        })
        .collect();
    Instance {
        data: Dataset::from_rows(schema, &table).unwrap(),
        f: ClusteringFunction::center_based(centers).unwrap(),
        domain_sizes,
    }
}

pub fn random_tuple<R: Rng>(r: &mut R, domain_sizes: &[u32]) -> Vec<u32> {
    domain_sizes.iter().map(|s| r.random_range(0..*s)).collect()
}

pub fn random_combination<R: Rng>(
    r: &mut R,
    clusters: usize,
    attrs: usize,
) -> AttributeCombination {
    AttributeCombination::new(
        (0..clusters)
            .map(|_| AttrId(r.random_range(0..attrs)))
            .collect(),
    )
}

/// Tuple-level sufficiency: each tuple of cluster `c` scores the fraction of
/// all tuples sharing its value of `AC(c)` that lie in `c`; the result is the
/// average over all tuples.
pub fn tuple_level_sufficiency(
    data: &Dataset,
    partition: &ClusterPartition,
    ac: &AttributeCombination,
) -> f64 {
    let labels = partition.row_labels();
    let n = data.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for t in 0..n {
        let c = labels[t];
        let col = data.column(ac.get(c)).unwrap();
        let same: Vec<usize> = (0..n).filter(|u| col[*u] == col[t]).collect();
        let inside = same.iter().filter(|u| labels[**u] == c).count();
        total += inside as f64 / same.len() as f64;
    }
    total / n as f64
}

/// Direct TVD between the value distributions of two row sets.
pub fn tvd_of_rows(column: &[u32], domain: u32, a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for v in 0..domain {
        let pa = a.iter().filter(|r| column[**r] == v).count() as f64 / a.len() as f64;
        let pb = b.iter().filter(|r| column[**r] == v).count() as f64 / b.len() as f64;
        total += (pa - pb).abs();
    }
    total / 2.0
}

/// Selection by explicit softmax probabilities `∝ exp(ε·s / 2Δ)`.
pub fn softmax_probabilities(scores: &[f64], delta: f64, eps: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores
        .iter()
        .map(|s| (eps * (s - max) / (2.0 * delta)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn sample_index<R: Rng>(r: &mut R, probs: &[f64]) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `k` rounds of the exponential mechanism at `eps / k`, without replacement.
pub fn iterated_em<R: Rng>(
    r: &mut R,
    scores: &[f64],
    k: usize,
    eps: f64,
    delta: f64,
) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let s: Vec<f64> = remaining.iter().map(|i| scores[*i]).collect();
        let pick = sample_index(r, &softmax_probabilities(&s, delta, eps / k as f64));
        out.push(remaining.remove(pick));
    }
    out
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(xs: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut r = rng(seed, "bootstrap");
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let lo = ((1.0 - level) / 2.0 * resamples as f64).floor() as usize;
    let hi = (((1.0 + level) / 2.0) * resamples as f64).ceil() as usize - 1;
    (means[lo], means[hi.min(resamples - 1)])
}
