use std::collections::BTreeMap;

use proptest::prelude::*;
use seqstrat_core::manifest::{apply_label_map, build_scan_meta, DatasetManifest, LabelMap};
use seqstrat_core::parse::{parse_label_bytes, parse_point_bytes, Point};
use seqstrat_core::segment::{segment_manifest, Granularity, RemainderPolicy};

const BINS: usize = 16;

fn dictionary(n: u32) -> BTreeMap<u32, String> {
    (0..n).map(|l| (l, format!("c{l}"))).collect()
}

/// Manifests of up to four sequences, built from synthetic points.
fn manifests() -> impl Strategy<Value = DatasetManifest> {
    prop::collection::vec(
        prop::collection::vec(prop::collection::vec((0u32..6, 0.0f32..=1.0), 0..30), 1..25),
        1..5,
    )
    .prop_map(|sequences| {
        let mut scans = Vec::new();
        for (s, frames) in sequences.iter().enumerate() {
            for (f, pts) in frames.iter().enumerate() {
                let points: Vec<Point> = pts.iter().map(|&(_, i)| Point { x: 0.0, y: 0.0, z: 0.0, intensity: i }).collect();
                let labels: Vec<u32> = pts.iter().map(|&(l, _)| l).collect();
                let pos = [f as f64, s as f64, 0.0];
                scans.push(build_scan_meta(format!("{s:02}"), f as u32, pos, &points, &labels, BINS).unwrap());
            }
        }
        DatasetManifest::new(scans, dictionary(6), BINS).unwrap()
    })
}

fn label_map(n_src: u32, n_dst: u32, picks: &[u32]) -> LabelMap {
    let entries = (0..n_src).map(|l| (l, picks[l as usize] % n_dst)).collect();
    LabelMap::new(entries, dictionary(n_dst)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scans_conserve_points(m in manifests()) {
        for s in &m.scans {
            prop_assert_eq!(s.label_counts.values().sum::<u64>(), s.point_count);
            prop_assert_eq!(s.intensity_histogram.iter().sum::<u64>(), s.point_count);
        }
    }

    #[test]
    fn segments_cover_and_conserve(m in manifests(), g in 1u32..30, merge in prop::bool::ANY) {
        let policy = if merge { RemainderPolicy::Merge } else { RemainderPolicy::Keep };
        for granularity in [Granularity::Scans(g), Granularity::Sequence] {
            let segs = segment_manifest(&m, granularity, policy).unwrap();
            let mut covered: Vec<usize> = segs.iter().flat_map(|s| s.scan_ids.iter().copied()).collect();
            prop_assert_eq!(covered.len(), m.scans.len());
            covered.sort();
            prop_assert_eq!(covered, (0..m.scans.len()).collect::<Vec<_>>());
            prop_assert_eq!(segs.iter().map(|s| s.point_count).sum::<u64>(), m.total_points());
            for s in &segs {
                prop_assert!(s.scan_ids.iter().all(|&i| m.scans[i].sequence_id == s.sequence_id));
            }
        }
    }

    #[test]
    fn segment_count_shrinks_with_granularity(m in manifests(), g in 1u32..30, merge in prop::bool::ANY) {
        let policy = if merge { RemainderPolicy::Merge } else { RemainderPolicy::Keep };
        let count = |gr| segment_manifest(&m, gr, policy).unwrap().len();
        prop_assert!(count(Granularity::Scans(g + 1)) <= count(Granularity::Scans(g)));
        prop_assert!(count(Granularity::Sequence) <= count(Granularity::Scans(g)));
    }

    #[test]
    fn label_maps_compose(
        m in manifests(),
        first in prop::collection::vec(any::<u32>(), 6),
        second in prop::collection::vec(any::<u32>(), 4),
    ) {
        let a = label_map(6, 4, &first);
        let b = label_map(4, 3, &second);
        let stepwise = apply_label_map(&apply_label_map(&m, &a).unwrap(), &b).unwrap();
        let composed = apply_label_map(&m, &a.then(&b).unwrap()).unwrap();
        prop_assert_eq!(&stepwise, &composed);
        for (before, after) in m.scans.iter().zip(&composed.scans) {
            prop_assert_eq!(before.point_count, after.label_counts.values().sum::<u64>());
        }
    }

    #[test]
    fn parsers_distribute_over_concatenation(
        a in prop::collection::vec(any::<u32>(), 0..50),
        b in prop::collection::vec(any::<u32>(), 0..50),
        pa in prop::collection::vec((-100.0f32..100.0, 0.0f32..2.0), 0..40),
        pb in prop::collection::vec((-100.0f32..100.0, 0.0f32..2.0), 0..40),
    ) {
        let words = |v: &[u32]| v.iter().flat_map(|w| w.to_le_bytes()).collect::<Vec<u8>>();
        let joined = [words(&a), words(&b)].concat();
        let mut expect = parse_label_bytes(&words(&a)).unwrap();
        expect.extend(parse_label_bytes(&words(&b)).unwrap());
        prop_assert_eq!(parse_label_bytes(&joined).unwrap(), expect);

        let points = |v: &[(f32, f32)]| {
            v.iter().flat_map(|&(c, i)| [c, -c, c * 0.5, i]).flat_map(f32::to_le_bytes).collect::<Vec<u8>>()
        };
        let whole = parse_point_bytes(&[points(&pa), points(&pb)].concat(), 1.0).unwrap();
        let left = parse_point_bytes(&points(&pa), 1.0).unwrap();
        let right = parse_point_bytes(&points(&pb), 1.0).unwrap();
        prop_assert_eq!(whole.clamped, left.clamped + right.clamped);
        prop_assert_eq!(whole.points, [left.points, right.points].concat());
    }
}
