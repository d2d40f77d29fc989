#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use seqstrat_core::segment::{Segment, SegmentId};
use seqstrat_core::stratify::{Method, SplitAssignment, SubsetSpec};
use seqstrat_core::LabelId;

pub fn segment(id: u32, seq: &str, counts: &[(LabelId, u64)], hist: Vec<u64>) -> Segment {
    let label_counts: BTreeMap<LabelId, u64> = counts.iter().copied().filter(|&(_, n)| n > 0).collect();
    Segment {
        segment_id: SegmentId(id),
        sequence_id: seq.to_string(),
        frame_span: [id, id],
        scan_ids: vec![id as usize],
        label_presence: label_counts.keys().copied().collect(),
        point_count: label_counts.values().sum(),
        label_counts,
        intensity_histogram: hist,
    }
}

/// Segments with random label masses and 8-bin intensity histograms. Every
/// segment carries at least one label.
pub fn segments(max_segments: usize, max_labels: u32) -> impl Strategy<Value = Vec<Segment>> {
    (2..=max_segments, 1..=max_labels).prop_flat_map(|(n, c)| {
        prop::collection::vec(
            (
                prop::collection::vec(prop_oneof![2 => Just(0u64), 3 => 1u64..50], c as usize),
                0..c,
                1u64..20,
                prop::collection::vec(0u64..20, 8),
                0u8..3,
            ),
            n,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (mut counts, forced, forced_mass, mut hist, seq))| {
                    if counts.iter().all(|&m| m == 0) {
                        counts[forced as usize] = forced_mass;
                    }
                    hist[0] += 1;
                    let pairs: Vec<(LabelId, u64)> = counts.iter().enumerate().map(|(l, &m)| (l as LabelId, m)).collect();
                    segment(i as u32, &format!("seq{seq}"), &pairs, hist)
                })
                .collect()
        })
    })
}

/// A random non-empty partition of `n` segment ids into `k` subsets.
pub fn partition(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n).prop_filter("every subset non-empty", move |owners| {
        (0..k).all(|j| owners.contains(&j))
    })
}

pub fn assignment(owners: &[usize], ratios: Vec<f64>) -> SplitAssignment {
    let k = ratios.len();
    let mut subsets = vec![Vec::new(); k];
    for (i, &j) in owners.iter().enumerate() {
        subsets[j].push(SegmentId(i as u32));
    }
    SplitAssignment {
        method: Method::Random,
        seed: 0,
        granularity: None,
        tie_break: None,
        rng: String::new(),
        spec: SubsetSpec::new(ratios).unwrap(),
        subsets,
    }
}

pub fn ratios(k: usize) -> Vec<f64> {
    match k {
        2 => vec![0.8, 0.2],
        3 => vec![0.6, 0.25, 0.15],
        _ => vec![1.0 / k as f64; k],
    }
}
