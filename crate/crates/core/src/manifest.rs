//! Per-scan metadata and the dataset manifest that every downstream stage reads.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::parse::Point;
use crate::{Error, LabelId, Result};

pub const DEFAULT_INTENSITY_BINS: usize = 256;

/// One scan: identity, ego-pose translation, label counts and intensity histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub sequence_id: String,
    pub frame_index: u32,
    pub position: [f64; 3],
    pub label_counts: BTreeMap<LabelId, u64>,
    pub intensity_histogram: Vec<u64>,
    pub point_count: u64,
}

impl ScanMeta {
    fn check(&self) -> Result<()> {
        let label_total: u64 = self.label_counts.values().sum();
        let hist_total: u64 = self.intensity_histogram.iter().sum();
        if label_total != self.point_count || hist_total != self.point_count {
            return Err(Error::InvalidManifest(format!(
                "scan {}/{}: point_count {} but label counts sum to {} and histogram to {}",
                self.sequence_id, self.frame_index, self.point_count, label_total, hist_total
            )));
        }
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidManifest(format!(
                "scan {}/{}: non-finite position",
                self.sequence_id, self.frame_index
            )));
        }
        Ok(())
    }
}

/// Bin index of a normalized intensity: uniform bins, right-open except the last.
pub fn intensity_bin(intensity: f32, bins: usize) -> usize {
    let v = intensity.clamp(0.0, 1.0) as f64;
    let b = libm::floor(v * bins as f64) as usize;
    b.min(bins - 1)
}

/// Build a [`ScanMeta`] from decoded points and their labels.
pub fn build_scan_meta(
    sequence_id: impl Into<String>,
    frame_index: u32,
    position: [f64; 3],
    points: &[Point],
    labels: &[LabelId],
    bins: usize,
) -> Result<ScanMeta> {
    if bins == 0 {
        return Err(crate::error::invalid("intensity bin count must be positive"));
    }
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left_name: "points",
            left: points.len(),
            right_name: "labels",
            right: labels.len(),
        });
    }
    let mut label_counts = BTreeMap::new();
    for &l in labels {
        *label_counts.entry(l).or_insert(0u64) += 1;
    }
    let mut intensity_histogram = vec![0u64; bins];
    for p in points {
        intensity_histogram[intensity_bin(p.intensity, bins)] += 1;
    }
    Ok(ScanMeta {
        sequence_id: sequence_id.into(),
        frame_index,
        position,
        label_counts,
        intensity_histogram,
        point_count: points.len() as u64,
    })
}

/// All scans of a dataset, ordered by `(sequence_id, frame_index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scans: Vec<ScanMeta>,
    pub label_dictionary: BTreeMap<LabelId, String>,
    pub intensity_bins: usize,
}

impl DatasetManifest {
    /// Construct and validate a manifest.
    pub fn new(
        scans: Vec<ScanMeta>,
        label_dictionary: BTreeMap<LabelId, String>,
        intensity_bins: usize,
    ) -> Result<Self> {
        let m = DatasetManifest { scans, label_dictionary, intensity_bins };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensity_bins == 0 {
            return Err(Error::InvalidManifest("intensity_bins must be positive".into()));
        }
        for pair in self.scans.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ordered = match a.sequence_id.cmp(&b.sequence_id) {
                core::cmp::Ordering::Less => true,
                core::cmp::Ordering::Equal => a.frame_index < b.frame_index,
                core::cmp::Ordering::Greater => false,
            };
            if !ordered {
                return Err(Error::InvalidManifest(format!(
                    "scan {}/{} follows {}/{}: scans must be unique and ordered by (sequence, frame)",
                    b.sequence_id, b.frame_index, a.sequence_id, a.frame_index
                )));
            }
        }
        for scan in &self.scans {
            scan.check()?;
            if scan.intensity_histogram.len() != self.intensity_bins {
                return Err(Error::InvalidManifest(format!(
                    "scan {}/{}: histogram has {} bins, manifest declares {}",
                    scan.sequence_id,
                    scan.frame_index,
                    scan.intensity_histogram.len(),
                    self.intensity_bins
                )));
            }
            if let Some(l) = scan.label_counts.keys().find(|l| !self.label_dictionary.contains_key(l)) {
                return Err(Error::InvalidManifest(format!(
                    "scan {}/{}: label {l} missing from label dictionary",
                    scan.sequence_id, scan.frame_index
                )));
            }
        }
        Ok(())
    }

    /// Sequence ids in manifest order, deduplicated.
    pub fn sequences(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.scans {
            if out.last() != Some(&s.sequence_id.as_str()) {
                out.push(&s.sequence_id);
            }
        }
        out
    }

    pub fn total_points(&self) -> u64 {
        self.scans.iter().map(|s| s.point_count).sum()
    }
}

/// Mapping from source label ids to target label ids, e.g. merging a bicycle
/// lane class into road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub entries: BTreeMap<LabelId, LabelId>,
    pub target_dictionary: BTreeMap<LabelId, String>,
}

impl LabelMap {
    pub fn new(
        entries: BTreeMap<LabelId, LabelId>,
        target_dictionary: BTreeMap<LabelId, String>,
    ) -> Result<Self> {
        let missing: BTreeSet<LabelId> = entries
            .values()
            .copied()
            .filter(|t| !target_dictionary.contains_key(t))
            .collect();
        if !missing.is_empty() {
            return Err(crate::error::invalid(format!(
                "label map targets {missing:?} have no name"
            )));
        }
        Ok(LabelMap { entries, target_dictionary })
    }

    /// Identity map over a dictionary.
    pub fn identity(dictionary: &BTreeMap<LabelId, String>) -> Self {
        LabelMap {
            entries: dictionary.keys().map(|&k| (k, k)).collect(),
            target_dictionary: dictionary.clone(),
        }
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &LabelMap) -> Result<LabelMap> {
        let missing: Vec<LabelId> = self
            .entries
            .values()
            .copied()
            .filter(|t| !other.entries.contains_key(t))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnmappedLabels(missing));
        }
        Ok(LabelMap {
            entries: self.entries.iter().map(|(&s, t)| (s, other.entries[t])).collect(),
            target_dictionary: other.target_dictionary.clone(),
        })
    }
}

/// Rewrite every scan's label counts through `map`, summing labels that map
/// to the same target. Fails if a label of the manifest dictionary is unmapped.
pub fn apply_label_map(manifest: &DatasetManifest, map: &LabelMap) -> Result<DatasetManifest> {
    let mut missing: BTreeSet<LabelId> = manifest
        .label_dictionary
        .keys()
        .copied()
        .filter(|l| !map.entries.contains_key(l))
        .collect();
    for scan in &manifest.scans {
        missing.extend(scan.label_counts.keys().filter(|l| !map.entries.contains_key(l)));
    }
    if !missing.is_empty() {
        return Err(Error::UnmappedLabels(missing.into_iter().collect()));
    }
    let scans = manifest
        .scans
        .iter()
        .map(|scan| {
            let mut label_counts = BTreeMap::new();
            for (l, &n) in &scan.label_counts {
                *label_counts.entry(map.entries[l]).or_insert(0u64) += n;
            }
            ScanMeta { label_counts, ..scan.clone() }
        })
        .collect();
    Ok(DatasetManifest {
        scans,
        label_dictionary: map.target_dictionary.clone(),
        intensity_bins: manifest.intensity_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn pt(i: f32) -> Point {
        Point { x: 0.0, y: 0.0, z: 0.0, intensity: i }
    }

    fn dict(ids: &[LabelId]) -> BTreeMap<LabelId, String> {
        ids.iter().map(|&i| (i, format!("label_{i}"))).collect()
    }

    fn scan(seq: &str, frame: u32, counts: &[(LabelId, u64)]) -> ScanMeta {
        let label_counts: BTreeMap<_, _> = counts.iter().copied().collect();
        let n: u64 = label_counts.values().sum();
        let mut hist = vec![0; 2];
        hist[0] = n;
        ScanMeta {
            sequence_id: seq.to_string(),
            frame_index: frame,
            position: [0.0; 3],
            label_counts,
            intensity_histogram: hist,
            point_count: n,
        }
    }

    #[test]
    fn build_counts_and_histogram() {
        let m = build_scan_meta("00", 0, [0.0; 3], &[pt(0.0), pt(0.5), pt(1.0)], &[1, 1, 2], 2).unwrap();
        assert_eq!(m.label_counts, [(1, 2), (2, 1)].into_iter().collect());
        assert_eq!(m.intensity_histogram, vec![1, 2]);
        assert_eq!(m.point_count, 3);

        let m = build_scan_meta("00", 0, [0.0; 3], &[pt(0.2)], &[7], 4).unwrap();
        assert_eq!(m.intensity_histogram, vec![1, 0, 0, 0]);
    }

    #[test]
    fn build_empty_scan() {
        let m = build_scan_meta("00", 3, [1.0, 2.0, 3.0], &[], &[], 8).unwrap();
        assert_eq!(m.point_count, 0);
        assert!(m.label_counts.is_empty());
        assert_eq!(m.intensity_histogram, vec![0; 8]);
    }

    #[test]
    fn build_length_mismatch_names_both() {
        let err = build_scan_meta("00", 0, [0.0; 3], &[pt(0.1)], &[1, 2], 4).unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch { left_name: "points", left: 1, right_name: "labels", right: 2 }
        );
    }

    #[test]
    fn bin_edges() {
        assert_eq!(intensity_bin(0.0, 256), 0);
        assert_eq!(intensity_bin(1.0, 256), 255);
        assert_eq!(intensity_bin(0.5, 2), 1);
        assert_eq!(intensity_bin(0.499, 2), 0);
    }

    #[test]
    fn manifest_rejects_duplicates_and_disorder() {
        let d = dict(&[1]);
        assert!(DatasetManifest::new(vec![scan("a", 0, &[(1, 1)]), scan("a", 0, &[(1, 1)])], d.clone(), 2).is_err());
        assert!(DatasetManifest::new(vec![scan("a", 2, &[(1, 1)]), scan("a", 1, &[(1, 1)])], d.clone(), 2).is_err());
        assert!(DatasetManifest::new(vec![scan("b", 0, &[(1, 1)]), scan("a", 5, &[(1, 1)])], d.clone(), 2).is_err());
        assert!(DatasetManifest::new(vec![scan("a", 0, &[(2, 1)])], d.clone(), 2).is_err());
        assert!(DatasetManifest::new(vec![scan("a", 0, &[(1, 1)]), scan("b", 0, &[(1, 1)])], d, 2).is_ok());
    }

    #[test]
    fn label_map_merges_counts() {
        let m = DatasetManifest::new(vec![scan("a", 0, &[(10, 5), (11, 3)])], dict(&[10, 11]), 2).unwrap();
        let map = LabelMap::new([(10, 1), (11, 1)].into_iter().collect(), dict(&[1])).unwrap();
        let out = apply_label_map(&m, &map).unwrap();
        assert_eq!(out.scans[0].label_counts, [(1, 8)].into_iter().collect());
        assert_eq!(out.scans[0].point_count, 8);
        out.validate().unwrap();
    }

    #[test]
    fn label_map_identity_is_noop() {
        let m = DatasetManifest::new(vec![scan("a", 0, &[(10, 5), (11, 3)])], dict(&[10, 11]), 2).unwrap();
        assert_eq!(apply_label_map(&m, &LabelMap::identity(&m.label_dictionary)).unwrap(), m);
    }

    #[test]
    fn label_map_reports_missing() {
        let m = DatasetManifest::new(vec![scan("a", 0, &[(10, 5)])], dict(&[10]), 2).unwrap();
        let map = LabelMap::new([(11, 1)].into_iter().collect(), dict(&[1])).unwrap();
        assert_eq!(apply_label_map(&m, &map), Err(Error::UnmappedLabels(vec![10])));
    }

    #[test]
    fn label_map_requires_named_targets() {
        assert!(LabelMap::new([(1, 2)].into_iter().collect(), dict(&[1])).is_err());
    }
}
