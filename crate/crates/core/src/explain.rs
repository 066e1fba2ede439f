//! Candidate selection, the end-to-end DP explanation and the comparison
//! pipelines.
//!
//! Every pipeline takes the exact [`CountTable`] of a dataset under a fixed
//! clustering. The private ones touch it only through charged mechanisms
//! (one-shot top-k, exponential mechanism, geometric histograms) or through
//! post-processing of their outputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttrCounts, AttrId, CountTable, Histogram, Schema};
use crate::dpmech::{
    geometric_histogram, gumbel_from_uniform, one_shot_top_k_with, BudgetLedger, Composition,
    NoisyArgmax, PrivacyBudget, Seeder,
};
use crate::error::{Error, Result};
use crate::eval::{log_search_space, Odometer, SensitiveCache};
use crate::quality::{AttributeCombination, Gamma, ScoreCache, WeightParams};

/// Default number of candidate attributes kept per cluster.
pub const DEFAULT_K: usize = 3;

/// Largest Stage-2 search space (`k^|C|`) the pipelines will enumerate.
pub const MAX_COMBINATIONS: f64 = 1e8;

/// Combinations scored per random stream in Stage 2.
const COMB_CHUNK: u64 = 4096;

/// Group name of per-cluster histogram charges.
const CLUSTER_GROUP: &str = "clusters";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "dpclustx")]
    DpClustX,
    #[serde(rename = "tabee")]
    TabEE,
    #[serde(rename = "dp-tabee")]
    DpTabEE,
    #[serde(rename = "dp-naive")]
    DpNaive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::DpClustX => "dpclustx",
            Method::TabEE => "tabee",
            Method::DpTabEE => "dp-tabee",
            Method::DpNaive => "dp-naive",
        })
    }
}

/// Per cluster, `k` distinct attributes in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateSets {
    sets: Vec<Vec<AttrId>>,
}

impl CandidateSets {
    pub fn get(&self, cluster: usize) -> &[AttrId] {
        &self.sets[cluster]
    }

    pub fn as_slice(&self) -> &[Vec<AttrId>] {
        &self.sets
    }

    pub fn num_clusters(&self) -> usize {
        self.sets.len()
    }

    /// `Π_c |S_c|`.
    pub fn search_space(&self) -> u64 {
        self.sets.iter().map(|s| s.len() as u64).product()
    }
}

/// Explanation of one cluster: its attribute and the released in-cluster
/// and out-of-cluster histograms over that attribute's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleClusterExplanation {
    pub label: usize,
    pub attribute: AttrId,
    pub in_cluster: Histogram<i64>,
    pub out_of_cluster: Histogram<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExplanation {
    pub method: Method,
    pub combination: AttributeCombination,
    pub clusters: Vec<SingleClusterExplanation>,
    pub candidates: Option<CandidateSets>,
    pub budget: Option<PrivacyBudget>,
    pub ledger: BudgetLedger,
    pub seed: Option<u64>,
    /// Number of combinations scored in Stage 2.
    pub combinations_evaluated: u64,
}

fn check_k(k: usize, num_attrs: usize) -> Result<()> {
    if num_attrs == 0 {
        return Err(Error::EmptyAttributeSet);
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > num_attrs {
        return Err(Error::KTooLarge {
            k,
            candidates: num_attrs,
        });
    }
    Ok(())
}

fn check_search_space(options: &[Vec<AttrId>]) -> Result<()> {
    let log_size = log_search_space(options);
    if log_size > MAX_COMBINATIONS.ln() + 1e-9 {
        return Err(Error::SearchSpaceTooLarge {
            size: log_size.exp(),
            limit: MAX_COMBINATIONS,
        });
    }
    Ok(())
}

/// Per cluster, one-shot top-k over `score(c, A)` at `eps_candset / |C|`
/// with unit sensitivity. The Gumbel noise for `(c, A)` comes from stream
/// `("cand", c, A)`.
fn noisy_top_k(
    num_clusters: usize,
    attrs: &[AttrId],
    k: usize,
    eps_candset: f64,
    seeder: &Seeder,
    score: impl Fn(usize, AttrId) -> f64 + Sync,
) -> Result<CandidateSets> {
    check_k(k, attrs.len())?;
    if num_clusters == 0 {
        return Err(Error::NoClusters);
    }
    let eps_topk = eps_candset / num_clusters as f64;
    let sets = (0..num_clusters)
        .into_par_iter()
        .map(|c| {
            let scores: Vec<f64> = attrs.iter().map(|a| score(c, *a)).collect();
            let picked = one_shot_top_k_with(&scores, k, eps_topk, 1.0, |i| {
                seeder
                    .stream("cand", &[c as u64, attrs[i].0 as u64])
                    .open_uniform()
            })?;
            Ok(picked.into_iter().map(|i| attrs[i]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSets { sets })
}

/// Candidate attribute sets for every cluster from the low-sensitivity
/// single-cluster score. The whole call is `eps_candset`-DP.
pub fn select_candidates(
    cache: &ScoreCache<f64>,
    gamma: Gamma<f64>,
    attrs: &[AttrId],
    eps_candset: f64,
    k: usize,
    seeder: &Seeder,
) -> Result<CandidateSets> {
    noisy_top_k(
        cache.num_clusters(),
        attrs,
        k,
        eps_candset,
        seeder,
        |c, a| cache.single(c, a, gamma),
    )
}

/// Exponential mechanism over `Π_c S_c` with unit sensitivity, streamed so
/// the combinations are never materialized. Chunk `i` of the lexicographic
/// order draws its Gumbel noise from stream `("comb", i)`.
fn noisy_best_combination(
    candidates: &CandidateSets,
    eps: f64,
    seeder: &Seeder,
    score: impl Fn(&[AttrId]) -> f64 + Sync,
) -> Result<(AttributeCombination, u64)> {
    check_search_space(candidates.as_slice())?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let sigma = 2.0 / eps;
    let total = candidates.search_space();
    let chunks = total.div_ceil(COMB_CHUNK);
    let (best, evaluated) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut stream = seeder.stream("comb", &[chunk]);
            let start = chunk * COMB_CHUNK;
            let end = (start + COMB_CHUNK).min(total);
            let mut od = Odometer::starting_at(candidates.as_slice(), start);
            let mut acc = NoisyArgmax::default();
            for index in start..end {
                let ac = od.current().expect("index below search space size");
                let noisy = score(ac) + gumbel_from_uniform(stream.open_uniform(), sigma);
                acc.push(index, noisy);
                od.advance();
            }
            (acc, end - start)
        })
        .reduce(
            || (NoisyArgmax::default(), 0),
            |(a, n), (b, m)| (a.merge(b), n + m),
        );
    let (index, _) = best.into_inner().ok_or(Error::EmptyCandidateSet)?;
    let od = Odometer::starting_at(candidates.as_slice(), index);
    let ac = AttributeCombination::new(od.current().expect("selected index in range").to_vec());
    Ok((ac, evaluated))
}

/// Noisy full-data histograms for the distinct chosen attributes at
/// `eps_hist / (2|A'|)` each (sequential), and the noisy in-cluster
/// histogram of each cluster at `eps_hist / 2` (parallel over the disjoint
/// clusters). Out-of-cluster counts are the clipped difference.
fn release_histograms(
    counts: &CountTable<u64>,
    ac: &AttributeCombination,
    eps_hist: f64,
    seeder: &Seeder,
    ledger: &mut BudgetLedger,
) -> Result<Vec<SingleClusterExplanation>> {
    let distinct = ac.distinct();
    let eps_all = eps_hist / (2.0 * distinct.len() as f64);
    let eps_cluster = eps_hist / 2.0;
    let mut noisy_full = Vec::with_capacity(distinct.len());
    for attr in &distinct {
        let mut rng = seeder.stream("hist-all", &[attr.0 as u64]);
        noisy_full.push(geometric_histogram(counts.full(*attr)?, eps_all, &mut rng)?);
        ledger.charge(
            format!("hist-all/{}", attr.0),
            eps_all,
            Composition::Sequential,
        )?;
    }
    let mut out = Vec::with_capacity(ac.len());
    for c in 0..ac.len() {
        let attr = ac.get(c);
        let mut rng = seeder.stream("hist-c", &[c as u64]);
        let in_cluster = geometric_histogram(counts.cluster(c, attr)?, eps_cluster, &mut rng)?;
        ledger.charge(
            format!("hist-c/{c}"),
            eps_cluster,
            Composition::Parallel {
                group: CLUSTER_GROUP.into(),
                partition: c,
            },
        )?;
        let full = &noisy_full[distinct
            .iter()
            .position(|a| *a == attr)
            .expect("distinct covers combination")];
        let out_of_cluster = Histogram::new(
            attr,
            full.counts
                .iter()
                .zip(&in_cluster.counts)
                .map(|(f, h)| f.saturating_sub(*h).max(0))
                .collect(),
        );
        out.push(SingleClusterExplanation {
            label: c,
            attribute: attr,
            in_cluster,
            out_of_cluster,
        });
    }
    ledger.charge("out-of-cluster clipping", 0.0, Composition::PostProcessing)?;
    Ok(out)
}

fn charge_selection(
    ledger: &mut BudgetLedger,
    num_clusters: usize,
    budget: &PrivacyBudget,
) -> Result<()> {
    let eps_topk = budget.eps_candset / num_clusters as f64;
    for c in 0..num_clusters {
        ledger.charge(format!("cand/{c}"), eps_topk, Composition::Sequential)?;
    }
    ledger.charge("comb", budget.eps_topcomb, Composition::Sequential)
}

fn check_inputs(counts: &CountTable<u64>, weights: &WeightParams<f64>, k: usize) -> Result<()> {
    weights.validate()?;
    if counts.num_clusters() == 0 {
        return Err(Error::NoClusters);
    }
    check_k(k, counts.num_attrs())
}

/// The end-to-end private explanation. Total privacy loss is
/// `eps_candset + eps_topcomb + eps_hist`.
pub fn generate_global_explanation(
    counts: &CountTable<u64>,
    k: usize,
    budget: &PrivacyBudget,
    weights: &WeightParams<f64>,
    seed: u64,
) -> Result<GlobalExplanation> {
    check_inputs(counts, weights, k)?;
    budget.require_positive()?;
    let seeder = Seeder::new(seed);
    let table = counts.to_scalar::<f64>();
    let cache = ScoreCache::build(&table)?;
    let gamma = weights.gamma();
    let attrs: Vec<AttrId> = table.attr_ids().collect();

    let candidates = select_candidates(&cache, gamma, &attrs, budget.eps_candset, k, &seeder)?;
    let (combination, evaluated) =
        noisy_best_combination(&candidates, budget.eps_topcomb, &seeder, |ac| {
            cache.global(ac, weights)
        })?;
    let mut ledger = BudgetLedger::new();
    charge_selection(&mut ledger, table.num_clusters(), budget)?;
    let clusters = release_histograms(counts, &combination, budget.eps_hist, &seeder, &mut ledger)?;
    Ok(GlobalExplanation {
        method: Method::DpClustX,
        combination,
        clusters,
        candidates: Some(candidates),
        budget: Some(*budget),
        ledger,
        seed: Some(seed),
        combinations_evaluated: evaluated,
    })
}

/// True top-k per cluster by the sensitive single-cluster score; ties go to
/// the lower attribute index.
fn exact_top_k(cache: &SensitiveCache<f64>, gamma: Gamma<f64>, k: usize) -> CandidateSets {
    let sets = (0..cache.num_clusters())
        .map(|c| {
            let mut ranked: Vec<(AttrId, f64)> = (0..cache.num_attrs())
                .map(|a| (AttrId(a), cache.single(c, AttrId(a), gamma)))
                .collect();
            ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            ranked.into_iter().take(k).map(|(a, _)| a).collect()
        })
        .collect();
    CandidateSets { sets }
}

/// Exact argmax of sensitive Quality over `Π_c S_c`; ties go to the
/// lexicographically smallest combination by attribute index.
fn exact_best_combination(
    cache: &SensitiveCache<f64>,
    candidates: &CandidateSets,
    weights: &WeightParams<f64>,
) -> Result<(AttributeCombination, u64)> {
    check_search_space(candidates.as_slice())?;
    let sorted: Vec<Vec<AttrId>> = candidates
        .as_slice()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort();
            s
        })
        .collect();
    let total = candidates.search_space();
    let chunks = total.div_ceil(COMB_CHUNK);
    let (best, evaluated) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * COMB_CHUNK;
            let end = (start + COMB_CHUNK).min(total);
            let mut od = Odometer::starting_at(&sorted, start);
            let mut acc = NoisyArgmax::default();
            for index in start..end {
                acc.push(
                    index,
                    cache.quality(od.current().expect("in range"), weights),
                );
                od.advance();
            }
            (acc, end - start)
        })
        .reduce(
            || (NoisyArgmax::default(), 0),
            |(a, n), (b, m)| (a.merge(b), n + m),
        );
    let (index, _) = best.into_inner().ok_or(Error::EmptyCandidateSet)?;
    let ac = Odometer::starting_at(&sorted, index)
        .current()
        .expect("in range")
        .to_vec();
    Ok((AttributeCombination::new(ac), evaluated))
}

fn exact_histograms(
    counts: &CountTable<u64>,
    ac: &AttributeCombination,
) -> Result<Vec<SingleClusterExplanation>> {
    (0..ac.len())
        .map(|c| {
            let attr = ac.get(c);
            let full = counts.full(attr)?;
            let inside = counts.cluster(c, attr)?;
            Ok(SingleClusterExplanation {
                label: c,
                attribute: attr,
                in_cluster: inside.map(|v| v as i64),
                out_of_cluster: Histogram::new(
                    attr,
                    full.counts
                        .iter()
                        .zip(&inside.counts)
                        .map(|(f, h)| (f - h) as i64)
                        .collect(),
                ),
            })
        })
        .collect()
}

/// TabEE selection on an arbitrary (possibly noisy) table of counts.
fn tabee_select(
    table: &CountTable<f64>,
    k: usize,
    weights: &WeightParams<f64>,
) -> Result<(AttributeCombination, CandidateSets, u64)> {
    let cache = SensitiveCache::build(table)?;
    let candidates = exact_top_k(&cache, weights.gamma(), k);
    let (ac, evaluated) = exact_best_combination(&cache, &candidates, weights)?;
    Ok((ac, candidates, evaluated))
}

/// Non-private baseline: exact sensitive scores in both stages, exact
/// histograms out.
pub fn tabee_explain(
    counts: &CountTable<u64>,
    k: usize,
    weights: &WeightParams<f64>,
) -> Result<GlobalExplanation> {
    check_inputs(counts, weights, k)?;
    let (combination, candidates, evaluated) = tabee_select(&counts.to_scalar(), k, weights)?;
    let clusters = exact_histograms(counts, &combination)?;
    Ok(GlobalExplanation {
        method: Method::TabEE,
        combination,
        clusters,
        candidates: Some(candidates),
        budget: None,
        ledger: BudgetLedger::new(),
        seed: None,
        combinations_evaluated: evaluated,
    })
}

/// The TabEE pipeline made private directly: sensitive normalized scores,
/// noise calibrated to unit sensitivity, same budget split as
/// [`generate_global_explanation`].
pub fn dp_tabee_explain(
    counts: &CountTable<u64>,
    k: usize,
    budget: &PrivacyBudget,
    weights: &WeightParams<f64>,
    seed: u64,
) -> Result<GlobalExplanation> {
    check_inputs(counts, weights, k)?;
    budget.require_positive()?;
    let seeder = Seeder::new(seed);
    let table = counts.to_scalar::<f64>();
    let cache = SensitiveCache::build(&table)?;
    let gamma = weights.gamma();
    let attrs: Vec<AttrId> = table.attr_ids().collect();
    let candidates = noisy_top_k(
        table.num_clusters(),
        &attrs,
        k,
        budget.eps_candset,
        &seeder,
        |c, a| cache.single(c, a, gamma),
    )?;
    let (combination, evaluated) =
        noisy_best_combination(&candidates, budget.eps_topcomb, &seeder, |ac| {
            cache.quality(ac, weights)
        })?;
    let mut ledger = BudgetLedger::new();
    charge_selection(&mut ledger, table.num_clusters(), budget)?;
    let clusters = release_histograms(counts, &combination, budget.eps_hist, &seeder, &mut ledger)?;
    Ok(GlobalExplanation {
        method: Method::DpTabEE,
        combination,
        clusters,
        candidates: Some(candidates),
        budget: Some(*budget),
        ledger,
        seed: Some(seed),
        combinations_evaluated: evaluated,
    })
}

/// Release every full-data and every per-cluster histogram, then run TabEE
/// on the noisy counts as post-processing. Total privacy loss is `eps`.
///
/// Before selection, noisy counts are clipped at zero and each full-data bin
/// is raised to at least every cluster's count in that bin, so the
/// sufficiency ratios stay in range. Cluster sizes are estimated as the mean
/// noisy histogram total across attributes.
pub fn dp_naive_explain(
    counts: &CountTable<u64>,
    k: usize,
    eps: f64,
    weights: &WeightParams<f64>,
    seed: u64,
) -> Result<GlobalExplanation> {
    check_inputs(counts, weights, k)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let seeder = Seeder::new(seed);
    let na = counts.num_attrs();
    let m = counts.num_clusters();
    let eps_each = eps / (2.0 * na as f64);
    let mut ledger = BudgetLedger::new();

    let mut noisy: Vec<(Histogram<i64>, Vec<Histogram<i64>>)> = Vec::with_capacity(na);
    for attr in counts.attr_ids() {
        let mut rng = seeder.stream("naive-all", &[attr.0 as u64]);
        let full = geometric_histogram(counts.full(attr)?, eps_each, &mut rng)?;
        ledger.charge(
            format!("naive-all/{}", attr.0),
            eps_each,
            Composition::Sequential,
        )?;
        let mut clusters = Vec::with_capacity(m);
        for c in 0..m {
            let mut rng = seeder.stream("naive-c", &[c as u64, attr.0 as u64]);
            clusters.push(geometric_histogram(
                counts.cluster(c, attr)?,
                eps_each,
                &mut rng,
            )?);
            ledger.charge(
                format!("naive-c/{c}/{}", attr.0),
                eps_each,
                Composition::Parallel {
                    group: CLUSTER_GROUP.into(),
                    partition: c,
                },
            )?;
        }
        noisy.push((full, clusters));
    }

    let clip = |h: &Histogram<i64>| h.map(|v| v.max(0) as f64);
    let attrs: Vec<AttrCounts<f64>> = noisy
        .iter()
        .map(|(full, clusters)| {
            let clusters: Vec<Histogram<f64>> = clusters.iter().map(clip).collect();
            let mut full = clip(full);
            for h in &clusters {
                for (f, v) in full.counts.iter_mut().zip(&h.counts) {
                    *f = f.max(*v);
                }
            }
            AttrCounts { full, clusters }
        })
        .collect();
    let sizes: Vec<f64> = (0..m)
        .map(|c| {
            attrs
                .iter()
                .map(|a| a.clusters[c].scalar_total())
                .sum::<f64>()
                / na as f64
        })
        .collect();
    let table = CountTable::from_parts(sizes, attrs)?;
    let (combination, candidates, evaluated) = tabee_select(&table, k, weights)?;
    ledger.charge(
        "tabee selection on noisy counts",
        0.0,
        Composition::PostProcessing,
    )?;

    let clusters = (0..m)
        .map(|c| {
            let attr = combination.get(c);
            let (full, per_cluster) = &noisy[attr.0];
            let in_cluster = per_cluster[c].clone();
            let out_of_cluster = Histogram::new(
                attr,
                full.counts
                    .iter()
                    .zip(&in_cluster.counts)
                    .map(|(f, h)| f.saturating_sub(*h).max(0))
                    .collect(),
            );
            SingleClusterExplanation {
                label: c,
                attribute: attr,
                in_cluster,
                out_of_cluster,
            }
        })
        .collect();
    Ok(GlobalExplanation {
        method: Method::DpNaive,
        combination,
        clusters,
        candidates: Some(candidates),
        budget: None,
        ledger,
        seed: Some(seed),
        combinations_evaluated: evaluated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub label: usize,
    pub attribute: String,
    pub bins: Vec<String>,
    pub in_counts: Vec<i64>,
    pub out_counts: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_candset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_topcomb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_hist: Option<f64>,
    pub total: f64,
    pub ledger: BudgetLedger,
}

/// Serialized form of a [`GlobalExplanation`], with attributes and bins
/// named by the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub method: Method,
    pub combination: Vec<String>,
    pub clusters: Vec<ClusterReport>,
    pub budget: BudgetReport,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Vec<String>>>,
    pub combinations_evaluated: u64,
}

impl ExplanationReport {
    pub fn new(explanation: &GlobalExplanation, schema: &Schema) -> Result<Self> {
        let name = |a: AttrId| Ok::<_, Error>(schema.attribute(a)?.name.clone());
        let combination = explanation
            .combination
            .as_slice()
            .iter()
            .map(|a| name(*a))
            .collect::<Result<Vec<_>>>()?;
        let clusters = explanation
            .clusters
            .iter()
            .map(|e| {
                Ok(ClusterReport {
                    label: e.label,
                    attribute: name(e.attribute)?,
                    bins: schema.attribute(e.attribute)?.domain.clone(),
                    in_counts: e.in_cluster.counts.clone(),
                    out_counts: e.out_of_cluster.counts.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let candidates = explanation
            .candidates
            .as_ref()
            .map(|sets| {
                sets.as_slice()
                    .iter()
                    .map(|s| s.iter().map(|a| name(*a)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let budget = BudgetReport {
            eps_candset: explanation.budget.map(|b| b.eps_candset),
            eps_topcomb: explanation.budget.map(|b| b.eps_topcomb),
            eps_hist: explanation.budget.map(|b| b.eps_hist),
            total: explanation.ledger.total(),
            ledger: explanation.ledger.clone(),
        };
        Ok(Self {
            method: explanation.method,
            combination,
            clusters,
            budget,
            seed: explanation.seed,
            candidates,
            combinations_evaluated: explanation.combinations_evaluated,
        })
    }

    /// Resolve the attribute names of the combination against `schema`.
    pub fn combination(&self, schema: &Schema) -> Result<AttributeCombination> {
        Ok(AttributeCombination::new(
            self.combination
                .iter()
                .map(|n| schema.id_of(n))
                .collect::<Result<Vec<_>>>()?,
        ))
    }
}
