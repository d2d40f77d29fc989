//! Assigning segments to subsets: seeded random split and iterative
//! multi-label stratification in its presence (MSSS) and point-mass (MSegSSS)
//! flavours.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::rng::{seeded, SplitRng, RNG_ALGORITHM};
use crate::segment::{Granularity, Segment, SegmentId};
use crate::{Error, LabelId, Result};

const RATIO_TOLERANCE: f64 = 1e-9;

/// Number of subsets and their target proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub ratios: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl SubsetSpec {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        Self::named(ratios, Vec::new())
    }

    pub fn named(ratios: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let spec = SubsetSpec { ratios, names };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(invalid("at least one subset ratio is required"));
        }
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(invalid(format!("ratios must be finite and non-negative: {:?}", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > RATIO_TOLERANCE {
            return Err(invalid(format!("ratios sum to {sum}, expected 1")));
        }
        if !self.names.is_empty() && self.names.len() != self.ratios.len() {
            return Err(invalid("subset names must match the number of ratios"));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.ratios.len()
    }

    /// Desired sizes `n * r_j`, unrounded.
    pub fn desired_sizes(&self, n: f64) -> Vec<f64> {
        self.ratios.iter().map(|r| n * r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Msss,
    Msegsss,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Random, Method::Msss, Method::Msegsss];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Msss => "msss",
            Method::Msegsss => "msegsss",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Method::Random),
            "msss" => Ok(Method::Msss),
            "msegsss" => Ok(Method::Msegsss),
            other => Err(invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// What a segment contributes to the per-label demand counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratifyMode {
    /// Binary presence: a segment counts once for every label it contains.
    Msss,
    /// Point mass: a segment counts with its number of points of the label.
    Msegsss,
}

impl StratifyMode {
    pub fn method(self) -> Method {
        match self {
            StratifyMode::Msss => Method::Msss,
            StratifyMode::Msegsss => Method::Msegsss,
        }
    }
}

/// Rule for choosing between labels tied for the fewest remaining samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Label whose per-segment mass distribution is furthest (L1) from uniform.
    #[default]
    UniformDistance,
    /// Label carried by the sequence with the fewest segments assigned so far.
    LeastPresentSequence,
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniform_distance" => Ok(TieBreak::UniformDistance),
            "sequence" | "least_present_sequence" => Ok(TieBreak::LeastPresentSequence),
            other => Err(invalid(format!("unknown tie-break rule {other:?}"))),
        }
    }
}

/// Disjoint subsets of segment ids (each sorted ascending) plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub method: Method,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<TieBreak>,
    pub rng: String,
    pub spec: SubsetSpec,
    pub subsets: Vec<Vec<SegmentId>>,
}

impl SplitAssignment {
    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = Some(granularity);
        self
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.subsets.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.subsets.iter().map(Vec::len).sum()
    }

    /// Check that the subsets are a disjoint cover of `segments` and resolve
    /// every id to its index in `segments`.
    pub fn resolve(&self, segments: &[Segment]) -> Result<Vec<Vec<usize>>> {
        let index: BTreeMap<SegmentId, usize> =
            segments.iter().enumerate().map(|(i, s)| (s.segment_id, i)).collect();
        if index.len() != segments.len() {
            return Err(Error::SplitMismatch("duplicate segment ids".into()));
        }
        let mut seen = vec![false; segments.len()];
        let mut out = Vec::with_capacity(self.subsets.len());
        for subset in &self.subsets {
            let mut members = Vec::with_capacity(subset.len());
            for id in subset {
                let &i = index
                    .get(id)
                    .ok_or_else(|| Error::SplitMismatch(format!("segment {id} is not in the segment table")))?;
                if core::mem::replace(&mut seen[i], true) {
                    return Err(Error::SplitMismatch(format!("segment {id} appears twice")));
                }
                members.push(i);
            }
            out.push(members);
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::SplitMismatch(format!(
                "segment {} is not assigned to any subset",
                segments[i].segment_id
            )));
        }
        Ok(out)
    }
}

fn sorted_ids(segments: &[Segment]) -> Result<Vec<SegmentId>> {
    let mut ids: Vec<SegmentId> = segments.iter().map(|s| s.segment_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("duplicate segment ids"));
    }
    Ok(ids)
}

/// Shuffle segments with a seeded generator and cut at `floor(|D| * cumulative ratio)`.
pub fn random_split(segments: &[Segment], spec: &SubsetSpec, seed: u64) -> Result<SplitAssignment> {
    spec.validate()?;
    let n = segments.len();
    if n < spec.k() {
        return Err(invalid(format!("{n} segments cannot fill {} subsets", spec.k())));
    }
    let mut ids = sorted_ids(segments)?;
    ids.shuffle(&mut seeded(seed));
    let mut subsets = Vec::with_capacity(spec.k());
    let mut start = 0usize;
    let mut cumulative = 0.0;
    for (j, r) in spec.ratios.iter().enumerate() {
        cumulative += r;
        let end = if j + 1 == spec.k() {
            n
        } else {
            // the epsilon absorbs ratio sums such as 0.7 + 0.1 = 0.7999...
            (libm::floor(n as f64 * cumulative + 1e-9) as usize).clamp(start, n)
        };
        let mut subset = ids[start..end].to_vec();
        subset.sort_unstable();
        subsets.push(subset);
        start = end;
    }
    Ok(SplitAssignment {
        method: Method::Random,
        seed,
        granularity: None,
        tie_break: None,
        rng: RNG_ALGORITHM.into(),
        spec: spec.clone(),
        subsets,
    })
}

/// How the subset of one assignment step was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetChoice {
    /// Unique largest desired count for the label.
    LabelDemand,
    /// Label demand tied; unique largest desired subset size.
    SizeDemand,
    /// Both tied; drawn from the generator.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifyStep {
    pub label: LabelId,
    pub segment: SegmentId,
    pub subset: usize,
    pub choice: SubsetChoice,
}

/// Full record of a stratification run, including the desired counters
/// before and after.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifyTrace {
    pub labels: Vec<LabelId>,
    pub initial_sizes: Vec<f64>,
    pub final_sizes: Vec<f64>,
    /// `[label][subset]`, labels in `labels` order.
    pub initial_label_demand: Vec<Vec<f64>>,
    pub final_label_demand: Vec<Vec<f64>>,
    pub steps: Vec<StratifyStep>,
}

/// Iterative stratification: repeatedly take the label carried by the fewest
/// remaining segments and deal those segments to the subsets that want that
/// label most, then the subsets that want samples most, then at random.
///
/// The mode decides what a segment subtracts from the per-label demand: one
/// unit per carried label (MSSS) or its point count of the label (MSegSSS).
/// Labels tied on carrier count are resolved by `tie_break`, which looks at
/// the point-mass distribution in both modes.
pub fn iterative_stratification(
    segments: &[Segment],
    spec: &SubsetSpec,
    seed: u64,
    mode: StratifyMode,
    tie_break: TieBreak,
) -> Result<SplitAssignment> {
    stratify_with_trace(segments, spec, seed, mode, tie_break).map(|(a, _)| a)
}

pub fn stratify_with_trace(
    segments: &[Segment],
    spec: &SubsetSpec,
    seed: u64,
    mode: StratifyMode,
    tie_break: TieBreak,
) -> Result<(SplitAssignment, StratifyTrace)> {
    spec.validate()?;
    sorted_ids(segments)?;
    for s in segments {
        let empty = match mode {
            StratifyMode::Msss => s.label_presence.is_empty(),
            StratifyMode::Msegsss => s.point_count == 0,
        };
        if empty {
            return Err(invalid(format!("segment {} carries no labels", s.segment_id)));
        }
    }
    let mut state = Stratifier::new(segments, spec, mode, seeded(seed));
    let initial_sizes = state.desired.clone();
    let initial_label_demand = state.label_demand.clone();
    let steps = state.run(tie_break);

    let mut subsets = vec![Vec::new(); spec.k()];
    for step in &steps {
        subsets[step.subset].push(step.segment);
    }
    for s in &mut subsets {
        s.sort_unstable();
    }
    let trace = StratifyTrace {
        labels: state.labels.clone(),
        initial_sizes,
        final_sizes: state.desired,
        initial_label_demand,
        final_label_demand: state.label_demand,
        steps,
    };
    let assignment = SplitAssignment {
        method: mode.method(),
        seed,
        granularity: None,
        tie_break: Some(tie_break),
        rng: RNG_ALGORITHM.into(),
        spec: spec.clone(),
        subsets,
    };
    Ok((assignment, trace))
}

struct Stratifier<'a> {
    /// Segments sorted by id.
    segments: Vec<&'a Segment>,
    labels: Vec<LabelId>,
    /// Per segment: `(label index, mass)` for every label it carries.
    mass: Vec<Vec<(usize, u64)>>,
    /// Per label: number of unassigned segments carrying it.
    remaining_carriers: Vec<usize>,
    /// Per label: segment positions carrying it, ascending.
    carriers: Vec<Vec<usize>>,
    remaining: Vec<bool>,
    remaining_count: usize,
    desired: Vec<f64>,
    label_demand: Vec<Vec<f64>>,
    assigned_per_sequence: BTreeMap<&'a str, usize>,
    rng: SplitRng,
}

impl<'a> Stratifier<'a> {
    fn new(segments: &'a [Segment], spec: &SubsetSpec, mode: StratifyMode, rng: SplitRng) -> Self {
        let mut segments: Vec<&Segment> = segments.iter().collect();
        segments.sort_unstable_by_key(|s| s.segment_id);
        let mut labels: Vec<LabelId> = segments.iter().flat_map(|s| s.label_presence.iter().copied()).collect();
        labels.sort_unstable();
        labels.dedup();
        let label_pos: BTreeMap<LabelId, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();

        let mass: Vec<Vec<(usize, u64)>> = segments
            .iter()
            .map(|s| {
                s.label_presence
                    .iter()
                    .map(|l| {
                        let w = match mode {
                            StratifyMode::Msss => 1,
                            StratifyMode::Msegsss => s.count(*l),
                        };
                        (label_pos[l], w)
                    })
                    .collect()
            })
            .collect();
        let mut total_mass = vec![0u64; labels.len()];
        let mut carriers = vec![Vec::new(); labels.len()];
        for (pos, m) in mass.iter().enumerate() {
            for &(li, w) in m {
                total_mass[li] += w;
                carriers[li].push(pos);
            }
        }
        let remaining_carriers = carriers.iter().map(Vec::len).collect();
        let desired = spec.desired_sizes(segments.len() as f64);
        let label_demand = total_mass.iter().map(|&t| spec.desired_sizes(t as f64)).collect();
        Stratifier {
            remaining: vec![true; segments.len()],
            remaining_count: segments.len(),
            segments,
            labels,
            mass,
            remaining_carriers,
            carriers,
            desired,
            label_demand,
            assigned_per_sequence: BTreeMap::new(),
            rng,
        }
    }

    fn run(&mut self, tie_break: TieBreak) -> Vec<StratifyStep> {
        let mut steps = Vec::with_capacity(self.segments.len());
        while self.remaining_count > 0 {
            let Some(li) = self.next_label(tie_break) else {
                // every remaining segment carries a label, so this is unreachable
                // for validated input
                break;
            };
            let carriers = core::mem::take(&mut self.carriers[li]);
            for &pos in &carriers {
                if !self.remaining[pos] {
                    continue;
                }
                let (subset, choice) = self.choose_subset(li);
                self.assign(pos, subset);
                steps.push(StratifyStep {
                    label: self.labels[li],
                    segment: self.segments[pos].segment_id,
                    subset,
                    choice,
                });
            }
        }
        steps
    }

    fn next_label(&self, tie_break: TieBreak) -> Option<usize> {
        let min = self.remaining_carriers.iter().copied().filter(|&m| m > 0).min()?;
        let candidates: Vec<usize> = (0..self.labels.len()).filter(|&i| self.remaining_carriers[i] == min).collect();
        if candidates.len() == 1 {
            return Some(candidates[0]);
        }
        // candidates are in ascending label id order, so strict improvement
        // keeps the smallest id on residual ties
        let best = match tie_break {
            TieBreak::UniformDistance => {
                let n = self.remaining_count;
                let mut best = (candidates[0], f64::NEG_INFINITY);
                for &li in &candidates {
                    let masses = self.carriers[li]
                        .iter()
                        .filter(|&&p| self.remaining[p])
                        .map(|&p| self.segments[p].count(self.labels[li]));
                    let d = uniform_l1_distance(masses, n);
                    if d > best.1 + 1e-12 {
                        best = (li, d);
                    }
                }
                best.0
            }
            TieBreak::LeastPresentSequence => {
                let mut best = (candidates[0], usize::MAX);
                for &li in &candidates {
                    let score = self.carriers[li]
                        .iter()
                        .filter(|&&p| self.remaining[p])
                        .map(|&p| {
                            self.assigned_per_sequence
                                .get(self.segments[p].sequence_id.as_str())
                                .copied()
                                .unwrap_or(0)
                        })
                        .min()
                        .unwrap_or(usize::MAX);
                    if score < best.1 {
                        best = (li, score);
                    }
                }
                best.0
            }
        };
        Some(best)
    }

    fn choose_subset(&mut self, li: usize) -> (usize, SubsetChoice) {
        let by_label = argmax_set(&self.label_demand[li], 0..self.desired.len());
        if by_label.len() == 1 {
            return (by_label[0], SubsetChoice::LabelDemand);
        }
        let by_size = argmax_set(&self.desired, by_label.into_iter());
        if by_size.len() == 1 {
            return (by_size[0], SubsetChoice::SizeDemand);
        }
        let pick = by_size[self.rng.gen_range(0..by_size.len())];
        (pick, SubsetChoice::Random)
    }

    fn assign(&mut self, pos: usize, subset: usize) {
        self.remaining[pos] = false;
        self.remaining_count -= 1;
        for &(li, w) in &self.mass[pos] {
            self.label_demand[li][subset] -= w as f64;
            self.remaining_carriers[li] -= 1;
        }
        self.desired[subset] -= 1.0;
        *self
            .assigned_per_sequence
            .entry(self.segments[pos].sequence_id.as_str())
            .or_insert(0) += 1;
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Indices (from `among`) whose value ties the maximum.
fn argmax_set(values: &[f64], among: impl Iterator<Item = usize> + Clone) -> Vec<usize> {
    let max = among.clone().map(|j| values[j]).fold(f64::NEG_INFINITY, f64::max);
    among.filter(|&j| nearly_equal(values[j], max)).collect()
}

/// L1 distance between the normalized mass vector (over `n` slots, the
/// unlisted ones zero) and the uniform vector of length `n`.
fn uniform_l1_distance(masses: impl Iterator<Item = u64> + Clone, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let total: u64 = masses.clone().sum();
    if total == 0 {
        return 0.0;
    }
    let u = 1.0 / n as f64;
    let mut listed = 0usize;
    let mut d = 0.0;
    for m in masses {
        listed += 1;
        d += (m as f64 / total as f64 - u).abs();
    }
    d + n.saturating_sub(listed) as f64 * u
}

/// Choose one label among `candidates` tied for the fewest remaining samples.
///
/// `remaining` are the unassigned segments; `assigned_per_sequence` counts
/// segments already assigned per sequence id. Residual ties resolve to the
/// smallest label id.
pub fn tie_break_labels(
    candidates: &[LabelId],
    remaining: &[&Segment],
    assigned_per_sequence: &BTreeMap<String, usize>,
    rule: TieBreak,
) -> Result<LabelId> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let Some(&first) = sorted.first() else {
        return Err(invalid("no candidate labels to break a tie between"));
    };
    let mut best = first;
    match rule {
        TieBreak::UniformDistance => {
            let mut best_d = f64::NEG_INFINITY;
            for &l in &sorted {
                let d = uniform_l1_distance(remaining.iter().map(|s| s.count(l)), remaining.len());
                if d > best_d + 1e-12 {
                    best = l;
                    best_d = d;
                }
            }
        }
        TieBreak::LeastPresentSequence => {
            let mut best_score = usize::MAX;
            for &l in &sorted {
                let score = remaining
                    .iter()
                    .filter(|s| s.contains(l))
                    .map(|s| assigned_per_sequence.get(&s.sequence_id).copied().unwrap_or(0))
                    .min()
                    .unwrap_or(usize::MAX);
                if score < best_score {
                    best = l;
                    best_score = score;
                }
            }
        }
    }
    Ok(best)
}
