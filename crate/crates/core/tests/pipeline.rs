mod common;

use common::*;
use dpclustx::dpmech::{PrivacyBudget, Seeder};
use dpclustx::eval::{self, brute_force_best_combination};
use dpclustx::explain::{
    dp_naive_explain, dp_tabee_explain, generate_global_explanation, select_candidates,
    tabee_explain, ExplanationReport, Method,
};
use dpclustx::quality::{self, ScoreCache};
use dpclustx::{AttrId, CountTable, Error, Weights};

#[test]
fn tabee_finds_the_planted_combination() {
    let w = Weights::equal();
    for seed in 0..5 {
        let p = planted(seed, 4, 6, 2000);
        let t = p.counts.to_scalar::<f64>();
        let attrs: Vec<AttrId> = t.attr_ids().collect();
        let best = brute_force_best_combination(&t, &attrs, &w).unwrap();
        assert_eq!(best, p.planted);
        assert_eq!(
            tabee_explain(&p.counts, 3, &w).unwrap().combination,
            p.planted
        );
    }
}

#[test]
fn exhaustive_tabee_matches_brute_force() {
    let mut r = rng(11, "exhaustive");
    let w = Weights::new(0.2, 0.5, 0.3).unwrap();
    for _ in 0..200 {
        let inst = random_instance(&mut r, 4, 4, 5, 60);
        let p = inst.f.assign(&inst.data).unwrap();
        let counts = CountTable::build(&inst.data, &p).unwrap();
        let t = counts.to_scalar::<f64>();
        let attrs: Vec<AttrId> = t.attr_ids().collect();
        let oracle = brute_force_best_combination(&t, &attrs, &w).unwrap();
        let ours = tabee_explain(&counts, attrs.len(), &w).unwrap().combination;
        let (qo, qb) = (
            eval::quality(&t, &ours, &w).unwrap(),
            eval::quality(&t, &oracle, &w).unwrap(),
        );
        assert!((qo - qb).abs() <= 1e-12, "{qo} vs {qb}");
        assert_eq!(ours, oracle);
    }
}

#[test]
fn huge_budget_recovers_the_non_private_answer() {
    let w = Weights::equal();
    let budget = PrivacyBudget::even(1e6).unwrap();
    for seed in 0..10 {
        let p = planted(seed, 5, 8, 1000);
        let tabee = tabee_explain(&p.counts, 3, &w).unwrap().combination;
        for e in [
            generate_global_explanation(&p.counts, 3, &budget, &w, seed).unwrap(),
            dp_tabee_explain(&p.counts, 3, &budget, &w, seed).unwrap(),
            dp_naive_explain(&p.counts, 3, 1e6, &w, seed).unwrap(),
        ] {
            assert_eq!(e.combination, tabee, "{}", e.method);
        }
    }
}

#[test]
fn candidate_sets_lead_with_the_separating_attribute() {
    let p = planted(4, 5, 10, 3000);
    let t = p.counts.to_scalar::<f64>();
    let cache = ScoreCache::build(&t).unwrap();
    let attrs: Vec<AttrId> = t.attr_ids().collect();
    let gamma = Weights::equal().gamma();
    for seed in 0..20 {
        let sets = select_candidates(&cache, gamma, &attrs, 1e6, 3, &Seeder::new(seed)).unwrap();
        for c in 0..5 {
            assert_eq!(sets.get(c)[0], AttrId(c));
            assert_eq!(sets.get(c).len(), 3);
        }
        assert_eq!(sets.search_space(), 243);
    }
}

#[test]
fn stage_one_keeps_the_top_attribute_when_the_gap_is_wide() {
    // with k = 1 the gap is between the first and second true scores; the
    // budget is set so the gap just clears (2|C|k/ε)(ln|A| + 3)
    let p = planted(7, 4, 12, 400);
    let t = p.counts.to_scalar::<f64>();
    let cache = ScoreCache::build(&t).unwrap();
    let attrs: Vec<AttrId> = t.attr_ids().collect();
    let gamma = Weights::equal().gamma();
    let (m, k) = (4usize, 1usize);
    let mut gap = f64::INFINITY;
    let mut top = Vec::new();
    for c in 0..m {
        let mut s: Vec<(f64, AttrId)> = attrs
            .iter()
            .map(|a| (quality::single_cluster_score(&t, c, *a, gamma).unwrap(), *a))
            .collect();
        s.sort_by(|x, y| y.0.total_cmp(&x.0));
        gap = gap.min(s[k - 1].0 - s[k].0);
        top.push(s[0].1);
    }
    assert!(gap > 0.0);
    let eps = 1.001 * (2.0 * (m * k) as f64) * ((attrs.len() as f64).ln() + 3.0) / gap;
    let runs = 400;
    let mut hits = vec![0usize; m];
    for seed in 0..runs {
        let sets = select_candidates(&cache, gamma, &attrs, eps, k, &Seeder::new(seed)).unwrap();
        for c in 0..m {
            if sets.get(c).contains(&top[c]) {
                hits[c] += 1;
            }
        }
    }
    for h in hits {
        assert!(h as f64 >= 0.95 * runs as f64, "{h}/{runs} at eps {eps}");
    }
}

#[test]
fn seeded_runs_replay_exactly() {
    let p = planted(2, 4, 6, 800);
    let w = Weights::equal();
    let budget = PrivacyBudget::new(0.1, 0.1, 0.1).unwrap();
    let run = |seed| {
        let e = generate_global_explanation(&p.counts, 3, &budget, &w, seed).unwrap();
        serde_json::to_string(&ExplanationReport::new(&e, p.data.schema()).unwrap()).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
    let naive = |seed| {
        serde_json::to_string(
            &dp_naive_explain(&p.counts, 3, 0.1, &w, seed)
                .unwrap()
                .clusters,
        )
        .unwrap()
    };
    assert_eq!(naive(3), naive(3));
}

#[test]
fn explanation_shape_and_accounting() {
    let p = planted(1, 5, 7, 1500);
    let w = Weights::equal();
    let budget = PrivacyBudget::new(0.2, 0.3, 0.4).unwrap();
    let e = generate_global_explanation(&p.counts, 3, &budget, &w, 0).unwrap();
    assert_eq!(e.method, Method::DpClustX);
    assert_eq!(e.clusters.len(), 5);
    assert_eq!(e.combinations_evaluated, 3u64.pow(5));
    assert!((e.ledger.total() - 0.9).abs() <= 1e-12);
    for (c, cl) in e.clusters.iter().enumerate() {
        assert_eq!(cl.label, c);
        assert_eq!(cl.attribute, e.combination.get(c));
        let d = p.data.schema().domain_size(cl.attribute).unwrap();
        assert_eq!(cl.in_cluster.len(), d);
        assert_eq!(cl.out_of_cluster.len(), d);
        assert!(cl.out_of_cluster.counts.iter().all(|v| *v >= 0));
    }
    let naive = dp_naive_explain(&p.counts, 3, 0.1, &w, 0).unwrap();
    assert!((naive.ledger.total() - 0.1).abs() <= 1e-12);
}

#[test]
fn guards_reject_bad_requests() {
    let w = Weights::equal();
    let big = planted(0, 17, 17, 200);
    let budget = PrivacyBudget::even(1.0).unwrap();
    assert!(matches!(
        generate_global_explanation(&big.counts, 3, &budget, &w, 0),
        Err(Error::SearchSpaceTooLarge { .. })
    ));
    let small = planted(0, 3, 4, 100);
    let zero = PrivacyBudget::new(0.0, 0.1, 0.1).unwrap();
    assert!(matches!(
        generate_global_explanation(&small.counts, 3, &zero, &w, 0),
        Err(Error::InvalidBudget(_))
    ));
    assert!(generate_global_explanation(&small.counts, 5, &budget, &w, 0).is_err());
    assert!(PrivacyBudget::new(-0.1, 0.1, 0.1).is_err());
    assert!(dp_naive_explain(&small.counts, 3, 0.0, &w, 0).is_err());
}
