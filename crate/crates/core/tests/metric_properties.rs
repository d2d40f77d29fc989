mod common;

use common::{assignment, partition, ratios, segments};
use proptest::prelude::*;
use seqstrat_core::metrics::{
    ifw_label_distribution, intensity_drift_score, kl_divergence, label_distribution, wasserstein_1d, CountMode,
    IdsMode,
};
use seqstrat_core::segment::Segment;

/// Direct evaluation of the label-distribution formula from raw per-segment
/// counts, sharing nothing with the library besides the segment type.
fn direct_ld(segs: &[Segment], owners: &[usize], k: usize, point_mass: bool) -> (f64, f64) {
    let mut labels: Vec<u32> = segs.iter().flat_map(|s| s.label_counts.keys().copied()).collect();
    labels.sort();
    labels.dedup();
    let value = |s: &Segment, l: u32| {
        let n = s.label_counts.get(&l).copied().unwrap_or(0);
        if point_mass {
            n as f64
        } else if n > 0 {
            1.0
        } else {
            0.0
        }
    };
    let weight = |s: &Segment| if point_mass { s.label_counts.values().sum::<u64>() as f64 } else { 1.0 };
    let odds = |x: f64, n: f64| x / (n - x + 1e-9);

    let d_size: f64 = segs.iter().map(weight).sum();
    let mut ld = 0.0;
    let mut ifw = 0.0;
    for &l in &labels {
        let d_i: f64 = segs.iter().map(|s| value(s, l)).sum();
        let mut inner = 0.0;
        for j in 0..k {
            let members: Vec<&Segment> = segs.iter().zip(owners).filter(|(_, &o)| o == j).map(|(s, _)| s).collect();
            let s_size: f64 = members.iter().map(|s| weight(s)).sum();
            let s_i: f64 = members.iter().map(|s| value(s, l)).sum();
            inner += (odds(s_i, s_size) - odds(d_i, d_size)).abs();
        }
        inner /= k as f64;
        ld += inner;
        ifw += d_size / d_i * inner;
    }
    (ld / labels.len() as f64, ifw)
}

fn split_case() -> impl Strategy<Value = (Vec<Segment>, usize, Vec<usize>)> {
    (segments(20, 8), 2usize..=3)
        .prop_filter("enough segments", |(s, k)| s.len() >= *k)
        .prop_flat_map(|(s, k)| {
            let n = s.len();
            (Just(s), Just(k), partition(n, k))
        })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ld_matches_direct_formula((segs, k, owners) in split_case()) {
        let a = assignment(&owners, ratios(k));
        for (mode, pm) in [(CountMode::Containment, false), (CountMode::PointMass, true)] {
            let (ld, ifw) = direct_ld(&segs, &owners, k, pm);
            let got = label_distribution(&a, &segs, mode).unwrap();
            // relative once the epsilon guard inflates an odds term
            prop_assert!(close(got, ld, 1e-9), "{mode:?}: {got} vs {ld}");
            if let Ok(got_ifw) = ifw_label_distribution(&a, &segs, mode) {
                prop_assert!(close(got_ifw, ifw, 1e-9), "{mode:?}: {got_ifw} vs {ifw}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_are_invariant_under_subset_relabeling((segs, k, owners) in split_case(), rot in 1usize..3) {
        let base_ratios = ratios(k);
        let a = assignment(&owners, base_ratios.clone());
        let permuted_owners: Vec<usize> = owners.iter().map(|&o| (o + rot) % k).collect();
        let mut permuted_ratios = vec![0.0; k];
        for (j, r) in base_ratios.iter().enumerate() {
            permuted_ratios[(j + rot) % k] = *r;
        }
        let b = assignment(&permuted_owners, permuted_ratios);
        for mode in [CountMode::Containment, CountMode::PointMass] {
            prop_assert!(close(label_distribution(&a, &segs, mode).unwrap(), label_distribution(&b, &segs, mode).unwrap(), 1e-12));
        }
        prop_assert!(close(kl_divergence(&a, &segs).unwrap(), kl_divergence(&b, &segs).unwrap(), 1e-12));
        for mode in [IdsMode::Pairwise, IdsMode::VsDataset] {
            prop_assert!(close(intensity_drift_score(&a, &segs, mode).unwrap(), intensity_drift_score(&b, &segs, mode).unwrap(), 1e-12));
        }
        prop_assert!(close(
            seqstrat_core::metrics::examples_distribution(&a),
            seqstrat_core::metrics::examples_distribution(&b),
            1e-12,
        ));
    }

    #[test]
    fn scaling_masses_keeps_point_mass_metrics((segs, k, owners) in split_case(), factor in 2u64..20) {
        // two always-present labels keep every odds denominator away from the
        // epsilon guard
        let segs: Vec<Segment> = segs
            .into_iter()
            .map(|mut s| {
                *s.label_counts.entry(100).or_insert(0) += 1;
                *s.label_counts.entry(101).or_insert(0) += 1;
                common::segment(s.segment_id.0, &s.sequence_id, &s.label_counts.iter().map(|(&l, &n)| (l, n)).collect::<Vec<_>>(), s.intensity_histogram)
            })
            .collect();
        let scaled: Vec<Segment> = segs
            .iter()
            .map(|s| {
                let counts: Vec<(u32, u64)> = s.label_counts.iter().map(|(&l, &n)| (l, n * factor)).collect();
                let hist = s.intensity_histogram.iter().map(|b| b * factor).collect();
                common::segment(s.segment_id.0, &s.sequence_id, &counts, hist)
            })
            .collect();
        let a = assignment(&owners, ratios(k));
        prop_assert!(close(
            label_distribution(&a, &segs, CountMode::PointMass).unwrap(),
            label_distribution(&a, &scaled, CountMode::PointMass).unwrap(),
            1e-6,
        ));
        let unsmoothed = |s: &[Segment]| seqstrat_core::metrics::kl_divergence_smoothed(&a, s, 0.0).unwrap();
        prop_assert!(close(unsmoothed(&segs), unsmoothed(&scaled), 1e-9));
        prop_assert!(close(
            intensity_drift_score(&a, &segs, IdsMode::Pairwise).unwrap(),
            intensity_drift_score(&a, &scaled, IdsMode::Pairwise).unwrap(),
            1e-12,
        ));
    }

    #[test]
    fn metrics_are_non_negative((segs, k, owners) in split_case()) {
        let a = assignment(&owners, ratios(k));
        let report = seqstrat_core::metrics::evaluate_split(&a, &segs, Default::default()).unwrap();
        prop_assert!(report.ld >= 0.0 && report.ifwld >= 0.0 && report.ed >= 0.0);
        prop_assert!(report.kl >= 0.0 && report.ids >= 0.0);
        prop_assert!((report.obtained_ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn wasserstein_is_a_metric(
        p in prop::collection::vec(0.0f64..10.0, 16),
        q in prop::collection::vec(0.0f64..10.0, 16),
        r in prop::collection::vec(0.0f64..10.0, 16),
    ) {
        prop_assume!(p.iter().sum::<f64>() > 0.0 && q.iter().sum::<f64>() > 0.0 && r.iter().sum::<f64>() > 0.0);
        let w = |a: &[f64], b: &[f64]| wasserstein_1d(a, b, 1.0 / 16.0).unwrap();
        prop_assert!(w(&p, &p).abs() <= 1e-12);
        prop_assert!((w(&p, &q) - w(&q, &p)).abs() <= 1e-12);
        prop_assert!(w(&p, &r) <= w(&p, &q) + w(&q, &r) + 1e-12);
        prop_assert!(w(&p, &q) >= 0.0);
    }
}

#[test]
fn ld_vanishes_when_subsets_mirror_the_dataset() {
    let hist = vec![1u64; 4];
    let a = common::segment(0, "a", &[(0, 3), (1, 1)], hist.clone());
    let b = common::segment(1, "b", &[(0, 6), (1, 2)], hist.clone());
    let c = common::segment(2, "c", &[(0, 3), (1, 1)], hist);
    let split = assignment(&[0, 1, 0], vec![0.5, 0.5]);
    let segs = [a, b, c];
    assert!(label_distribution(&split, &segs, CountMode::PointMass).unwrap() < 1e-8);
    assert!(ifw_label_distribution(&split, &segs, CountMode::PointMass).unwrap() < 1e-8);

    let skewed = assignment(&[0, 0, 1], vec![0.5, 0.5]);
    let other = [
        common::segment(0, "a", &[(0, 3), (1, 1)], vec![1; 4]),
        common::segment(1, "b", &[(0, 1), (1, 3)], vec![1; 4]),
        common::segment(2, "c", &[(0, 3), (1, 1)], vec![1; 4]),
    ];
    assert!(label_distribution(&skewed, &other, CountMode::PointMass).unwrap() > 0.1);
}
