mod common;

use proptest::prelude::*;
use seqstrat_core::metrics::{MetricOptions, SplitReport};
use seqstrat_core::pool::{generate_pool, rank_candidates, Candidate, MetricName, PoolConfig, Weights};
use seqstrat_core::stratify::{Method, SubsetSpec};

fn candidate(seed: u64, method: Method, values: [f64; 5]) -> Candidate {
    let mut assignment = common::assignment(&[0, 1], vec![0.5, 0.5]);
    assignment.method = method;
    assignment.seed = seed;
    let report = SplitReport {
        ld: values[0],
        ifwld: values[1],
        ids: values[2],
        ed: values[3],
        kl: values[4],
        obtained_ratios: vec![0.5, 0.5],
        method,
        seed,
        granularity: None,
        options: MetricOptions::default(),
    };
    Candidate { assignment, report }
}

fn raw_pool() -> impl Strategy<Value = Vec<[f64; 5]>> {
    prop::collection::vec(prop::array::uniform5(prop_oneof![Just(0.0), Just(1.0), 0.0f64..10.0]), 1..12)
}

fn weights() -> impl Strategy<Value = Weights> {
    prop::array::uniform5(prop_oneof![Just(0.0), 0.0f64..3.0])
        .prop_filter("one positive weight", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(|w| Weights(MetricName::ALL.into_iter().zip(w).collect()))
}

fn config(weights: Weights, n: usize) -> PoolConfig {
    let mut c = PoolConfig::new(vec![Method::Random, Method::Msss, Method::Msegsss], n, SubsetSpec::new(vec![0.5, 0.5]).unwrap());
    c.weights = weights;
    c
}

fn position(pool: &seqstrat_core::pool::RankedPool, method: Method, seed: u64) -> usize {
    pool.entries.iter().position(|e| e.assignment.method == method && e.assignment.seed == seed).unwrap()
}

fn build(raw: &[[f64; 5]]) -> Vec<Candidate> {
    raw.iter().enumerate().map(|(i, v)| candidate(i as u64, Method::ALL[i % 3], *v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn normalized_metrics_stay_in_unit_interval(raw in raw_pool(), w in weights()) {
        let pool = rank_candidates(build(&raw), &config(w, 1), Vec::new()).unwrap();
        for e in &pool.entries {
            prop_assert!(e.normalized.values().all(|v| (0.0..=1.0).contains(v)));
        }
        for pair in pool.entries.windows(2) {
            prop_assert!(pair[0].objective <= pair[1].objective);
        }
    }

    #[test]
    fn lowering_a_metric_never_worsens_rank(raw in raw_pool(), w in weights(), pick in any::<prop::sample::Index>(), metric in 0usize..5, cut in 0.0f64..=1.0) {
        let i = pick.index(raw.len());
        let before = rank_candidates(build(&raw), &config(w.clone(), 1), Vec::new()).unwrap();
        let mut lowered = raw.clone();
        lowered[i][metric] *= cut;
        let after = rank_candidates(build(&lowered), &config(w, 1), Vec::new()).unwrap();
        let key = (Method::ALL[i % 3], i as u64);
        prop_assert!(position(&after, key.0, key.1) <= position(&before, key.0, key.1));
    }

    #[test]
    fn pools_are_reproducible(segs in common::segments(16, 5), base in 0u64..1000) {
        prop_assume!(segs.len() >= 2);
        let mut c = config(Weights::default(), 3);
        c.seed_base = base;
        let a = generate_pool(&segs, &c).unwrap();
        let b = generate_pool(&segs, &c).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.entries.len(), 9);
    }
}
