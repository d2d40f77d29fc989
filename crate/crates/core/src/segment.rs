//! Grouping consecutive scans into stratification segments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::manifest::DatasetManifest;
use crate::{Error, LabelId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub u32);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of consecutive scans per segment, or whole sequences.
///
/// Serialized as a bare integer or the string `"sequence"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Scans(u32),
    Sequence,
}

impl Serialize for Granularity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Granularity::Scans(n) => s.serialize_u32(*n),
            Granularity::Sequence => s.serialize_str("sequence"),
        }
    }
}

impl<'de> Deserialize<'de> for Granularity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u32),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(0) => Err(serde::de::Error::custom("granularity must be positive")),
            Repr::Count(n) => Ok(Granularity::Scans(n)),
            Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Scans(n) => write!(f, "{n}"),
            Granularity::Sequence => f.write_str("sequence"),
        }
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("sequence") || s.eq_ignore_ascii_case("seq") {
            return Ok(Granularity::Sequence);
        }
        let n: u32 = s
            .parse()
            .map_err(|_| crate::error::invalid(alloc::format!("granularity {s:?} is neither a count nor 'sequence'")))?;
        if n == 0 {
            return Err(crate::error::invalid("granularity must be positive"));
        }
        Ok(Granularity::Scans(n))
    }
}

/// What to do with the `len mod g` scans left at the end of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemainderPolicy {
    /// Keep a short trailing segment.
    #[default]
    Keep,
    /// Fold the remainder into the preceding full segment.
    Merge,
}

impl FromStr for RemainderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "keep" => Ok(RemainderPolicy::Keep),
            "merge" => Ok(RemainderPolicy::Merge),
            other => Err(crate::error::invalid(alloc::format!("unknown remainder policy {other:?}"))),
        }
    }
}

/// Consecutive scans of one sequence treated as a single stratification sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: SegmentId,
    pub sequence_id: String,
    /// Inclusive `[first, last]` frame indices.
    pub frame_span: [u32; 2],
    /// Indices into the manifest's scan list.
    pub scan_ids: Vec<usize>,
    pub label_counts: BTreeMap<LabelId, u64>,
    pub label_presence: BTreeSet<LabelId>,
    pub point_count: u64,
    pub intensity_histogram: Vec<u64>,
}

impl Segment {
    /// Aggregate consecutive manifest scans `range` into a segment.
    pub fn from_scans(segment_id: SegmentId, manifest: &DatasetManifest, range: core::ops::Range<usize>) -> Self {
        let scans = &manifest.scans[range.clone()];
        let mut label_counts = BTreeMap::new();
        let mut intensity_histogram = vec![0u64; manifest.intensity_bins];
        let mut point_count = 0;
        for scan in scans {
            for (&l, &n) in &scan.label_counts {
                *label_counts.entry(l).or_insert(0u64) += n;
            }
            for (acc, &b) in intensity_histogram.iter_mut().zip(&scan.intensity_histogram) {
                *acc += b;
            }
            point_count += scan.point_count;
        }
        let label_presence = label_counts.iter().filter(|(_, &n)| n > 0).map(|(&l, _)| l).collect();
        Segment {
            segment_id,
            sequence_id: scans[0].sequence_id.clone(),
            frame_span: [scans[0].frame_index, scans[scans.len() - 1].frame_index],
            scan_ids: range.collect(),
            label_counts,
            label_presence,
            point_count,
            intensity_histogram,
        }
    }

    pub fn count(&self, label: LabelId) -> u64 {
        self.label_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.label_presence.contains(&label)
    }

    pub fn scan_count(&self) -> usize {
        self.scan_ids.len()
    }
}

/// Partition every sequence of the manifest, left to right, into segments.
///
/// Segments never cross sequence boundaries. Ids are assigned in
/// `(sequence, first frame)` order starting at 0.
pub fn segment_manifest(
    manifest: &DatasetManifest,
    granularity: Granularity,
    remainder: RemainderPolicy,
) -> Result<Vec<Segment>> {
    if manifest.scans.is_empty() {
        return Err(crate::error::invalid("manifest has no scans"));
    }
    if granularity == Granularity::Scans(0) {
        return Err(crate::error::invalid("granularity must be positive"));
    }
    let mut segments = Vec::new();
    let mut start = 0;
    while start < manifest.scans.len() {
        let seq = &manifest.scans[start].sequence_id;
        let end = start + manifest.scans[start..].iter().take_while(|s| &s.sequence_id == seq).count();
        for range in sequence_ranges(start, end, granularity, remainder) {
            let id = SegmentId(segments.len() as u32);
            segments.push(Segment::from_scans(id, manifest, range));
        }
        start = end;
    }
    Ok(segments)
}

fn sequence_ranges(
    start: usize,
    end: usize,
    granularity: Granularity,
    remainder: RemainderPolicy,
) -> Vec<core::ops::Range<usize>> {
    let g = match granularity {
        Granularity::Sequence => return vec![start..end],
        Granularity::Scans(g) => g as usize,
    };
    let mut ranges: Vec<_> = (start..end).step_by(g).map(|s| s..(s + g).min(end)).collect();
    if remainder == RemainderPolicy::Merge && ranges.len() > 1 && ranges[ranges.len() - 1].len() < g {
        let last = ranges.pop().unwrap();
        ranges.last_mut().unwrap().end = last.end;
    }
    ranges
}
