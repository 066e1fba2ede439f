//! Differential privacy primitives.
//!
//! All randomness comes from [`RngStream`]s derived from a master seed and a
//! stream id, so results do not depend on thread scheduling.

use std::collections::BTreeMap;

use rand::distr::{Distribution, Open01};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Histogram;
use crate::error::{Error, Result};

/// Deterministic random stream keyed by `(seed, tag, indices)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, tag: &str, indices: &[u64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update((tag.len() as u64).to_le_bytes());
        hasher.update(tag.as_bytes());
        for i in indices {
            hasher.update(i.to_le_bytes());
        }
        let digest: [u8; 32] = hasher.finalize().into();
        Self {
            rng: ChaCha20Rng::from_seed(digest),
        }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn open_uniform(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Factory for the streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeder {
    pub seed: u64,
}

impl Seeder {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, tag: &str, indices: &[u64]) -> RngStream {
        RngStream::new(self.seed, tag, indices)
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::NonPositiveSensitivity(delta));
    }
    Ok(())
}

/// Inverse CDF of Gumbel(0, σ) at `u`.
pub fn gumbel_from_uniform(u: f64, sigma: f64) -> f64 {
    -sigma * (-u.ln()).ln()
}

pub fn gumbel<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveScale(sigma));
    }
    Ok(gumbel_from_uniform(open_uniform(rng), sigma))
}

/// Streaming argmax of noisy scores; ties keep the earlier candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyArgmax<T> {
    best: Option<(T, f64)>,
}

impl<T> Default for NoisyArgmax<T> {
    fn default() -> Self {
        Self { best: None }
    }
}

impl<T> NoisyArgmax<T> {
    pub fn push(&mut self, candidate: T, noisy: f64) {
        match &self.best {
            Some((_, b)) if noisy <= *b => {}
            _ => self.best = Some((candidate, noisy)),
        }
    }

    /// Combine with the result of a later slice of candidates.
    pub fn merge(self, later: Self) -> Self {
        match (self.best, later.best) {
            (Some(a), Some(b)) => {
                if b.1 > a.1 {
                    Self { best: Some(b) }
                } else {
                    Self { best: Some(a) }
                }
            }
            (a, b) => Self { best: a.or(b) },
        }
    }

    pub fn into_inner(self) -> Option<(T, f64)> {
        self.best
    }
}

/// Exponential mechanism via Gumbel-max: candidate `i` is returned with
/// probability proportional to `exp(ε·scores[i] / 2Δ)`.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    delta: f64,
    eps: f64,
    rng: &mut R,
) -> Result<usize> {
    exponential_mechanism_with(scores, delta, eps, |_| open_uniform(rng))
}

/// As [`exponential_mechanism`], taking the uniform for candidate `i` from
/// `uniform(i)`. Candidates are visited in index order.
pub fn exponential_mechanism_with(
    scores: &[f64],
    delta: f64,
    eps: f64,
    mut uniform: impl FnMut(usize) -> f64,
) -> Result<usize> {
    check_eps(eps)?;
    check_delta(delta)?;
    if scores.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let sigma = 2.0 * delta / eps;
    let mut acc = NoisyArgmax::default();
    for (i, s) in scores.iter().enumerate() {
        acc.push(i, s + gumbel_from_uniform(uniform(i), sigma));
    }
    Ok(acc.into_inner().expect("non-empty").0)
}

/// One-shot top-k: Gumbel noise of scale `2Δk/ε` added once to every
/// score, indices of the `k` largest noisy scores in descending order.
pub fn one_shot_top_k<R: Rng + ?Sized>(
    scores: &[f64],
    k: usize,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    one_shot_top_k_with(scores, k, eps, delta, |_| open_uniform(rng))
}

pub fn one_shot_top_k_with(
    scores: &[f64],
    k: usize,
    eps: f64,
    delta: f64,
    mut uniform: impl FnMut(usize) -> f64,
) -> Result<Vec<usize>> {
    check_eps(eps)?;
    check_delta(delta)?;
    if scores.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > scores.len() {
        return Err(Error::KTooLarge {
            k,
            candidates: scores.len(),
        });
    }
    let sigma = 2.0 * delta * k as f64 / eps;
    let mut noisy: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s + gumbel_from_uniform(uniform(i), sigma)))
        .collect();
    noisy.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(noisy.into_iter().take(k).map(|(i, _)| i).collect())
}

/// One draw of two-sided geometric noise, `P(Z = z) ∝ α^{|z|}` with
/// `α = e^{−ε}`, as the difference of two one-sided geometrics.
pub fn two_sided_geometric<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> Result<i64> {
    check_eps(eps)?;
    let mut one_sided = || (open_uniform(rng).ln() / -eps).floor() as i64;
    let a = one_sided();
    let b = one_sided();
    Ok(a.saturating_sub(b))
}

/// Geometric mechanism on every bin; each release is ε-DP for unit L1
/// sensitivity. Noisy bins may be negative.
pub fn geometric_histogram<R: Rng + ?Sized>(
    h: &Histogram<u64>,
    eps: f64,
    rng: &mut R,
) -> Result<Histogram<i64>> {
    check_eps(eps)?;
    let counts = h
        .counts
        .iter()
        .map(|c| Ok((*c as i64).saturating_add(two_sided_geometric(eps, rng)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Histogram::new(h.attribute, counts))
}

/// ε allotments of the three stages of the explanation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub eps_candset: f64,
    pub eps_topcomb: f64,
    pub eps_hist: f64,
}

impl PrivacyBudget {
    pub fn new(eps_candset: f64, eps_topcomb: f64, eps_hist: f64) -> Result<Self> {
        for (name, v) in [
            ("eps_candset", eps_candset),
            ("eps_topcomb", eps_topcomb),
            ("eps_hist", eps_hist),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidBudget(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            eps_candset,
            eps_topcomb,
            eps_hist,
        })
    }

    /// `total` split evenly over the three stages.
    pub fn even(total: f64) -> Result<Self> {
        Self::new(total / 3.0, total / 3.0, total / 3.0)
    }

    pub fn total(&self) -> f64 {
        self.eps_candset + self.eps_topcomb + self.eps_hist
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        for (name, v) in [
            ("eps_candset", self.eps_candset),
            ("eps_topcomb", self.eps_topcomb),
            ("eps_hist", self.eps_hist),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidBudget(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Composition {
    Sequential,
    /// One charge against partition `partition` of a disjoint split named
    /// `group`. A group costs the largest per-partition sum.
    Parallel {
        group: String,
        partition: usize,
    },
    PostProcessing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub tag: String,
    pub eps: f64,
    #[serde(flatten)]
    pub composition: Composition,
}

/// Ordered log of privacy charges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(
        &mut self,
        tag: impl Into<String>,
        eps: f64,
        composition: Composition,
    ) -> Result<()> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::NegativeEpsilon(eps));
        }
        let eps = if composition == Composition::PostProcessing {
            0.0
        } else {
            eps
        };
        self.entries.push(LedgerEntry {
            tag: tag.into(),
            eps,
            composition,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        let mut sequential = 0.0;
        let mut groups: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
        for e in &self.entries {
            match &e.composition {
                Composition::Sequential => sequential += e.eps,
                Composition::Parallel { group, partition } => {
                    *groups
                        .entry(group)
                        .or_default()
                        .entry(*partition)
                        .or_default() += e.eps;
                }
                Composition::PostProcessing => {}
            }
        }
        let parallel: f64 = groups
            .values()
            .map(|g| g.values().copied().fold(0.0, f64::max))
            .sum();
        sequential + parallel
    }
}
