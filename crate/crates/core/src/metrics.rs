//! Split quality metrics.
//!
//! * LD and IFWLD compare per-label odds `x / (n - x)` of every subset to
//!   those of the whole dataset.
//! * ED is the mean absolute deviation of subset sizes from their targets.
//! * KL compares each subset's label histogram to the dataset's.
//! * IDS averages 1-D Wasserstein distances between intensity histograms.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::segment::{Granularity, Segment};
use crate::stratify::{Method, SplitAssignment};
use crate::{Error, LabelId, Result};

/// Guard added to the odds denominator when a subset is made only of one label.
pub const ODDS_EPSILON: f64 = 1e-9;

/// Additive smoothing, in points per class, applied before KL normalization.
pub const KL_SMOOTHING: f64 = 1.0;

/// How "samples of label i" are counted by LD and IFWLD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Number of segments containing the label; subset size in segments.
    #[default]
    Containment,
    /// Number of points of the label; subset size in points.
    PointMass,
}

impl FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "containment" => Ok(CountMode::Containment),
            "points" | "point_mass" => Ok(CountMode::PointMass),
            other => Err(invalid(format!("unknown count mode {other:?}"))),
        }
    }
}

/// Which pairs of intensity histograms IDS averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdsMode {
    /// All unordered pairs of subsets.
    #[default]
    Pairwise,
    /// Each subset against the full dataset.
    VsDataset,
}

impl FromStr for IdsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pairwise" => Ok(IdsMode::Pairwise),
            "dataset" | "vs_dataset" => Ok(IdsMode::VsDataset),
            other => Err(invalid(format!("unknown IDS mode {other:?}"))),
        }
    }
}

fn odds(x: f64, n: f64) -> f64 {
    x / (n - x + ODDS_EPSILON)
}

/// Per-label masses of the dataset and of every subset.
struct LabelTable {
    labels: Vec<LabelId>,
    dataset: Vec<f64>,
    dataset_size: f64,
    subsets: Vec<(f64, Vec<f64>)>,
}

impl LabelTable {
    fn build(assignment: &SplitAssignment, segments: &[Segment], mode: CountMode) -> Result<Self> {
        let members = assignment.resolve(segments)?;
        let labels: Vec<LabelId> = segments
            .iter()
            .flat_map(|s| s.label_counts.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if labels.is_empty() {
            return Err(invalid("segments carry no labels"));
        }
        let contribution = |s: &Segment, l: LabelId| -> f64 {
            match mode {
                CountMode::Containment => s.contains(l) as u8 as f64,
                CountMode::PointMass => s.count(l) as f64,
            }
        };
        let size = |s: &Segment| -> f64 {
            match mode {
                CountMode::Containment => 1.0,
                CountMode::PointMass => s.point_count as f64,
            }
        };
        let mut subsets = Vec::with_capacity(members.len());
        for (j, m) in members.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::EmptySubset(j));
            }
            let total = m.iter().map(|&i| size(&segments[i])).sum();
            let per_label = labels
                .iter()
                .map(|&l| m.iter().map(|&i| contribution(&segments[i], l)).sum())
                .collect();
            subsets.push((total, per_label));
        }
        let dataset = labels
            .iter()
            .map(|&l| segments.iter().map(|s| contribution(s, l)).sum())
            .collect();
        let dataset_size = segments.iter().map(size).sum();
        Ok(LabelTable { labels, dataset, dataset_size, subsets })
    }

    /// `(1/k) Σ_j |odds(S_j^i, |S_j|) - odds(D^i, |D|)|` for label index `i`.
    fn mean_odds_deviation(&self, i: usize) -> f64 {
        let reference = odds(self.dataset[i], self.dataset_size);
        let k = self.subsets.len() as f64;
        self.subsets
            .iter()
            .map(|(size, per_label)| (odds(per_label[i], *size) - reference).abs())
            .sum::<f64>()
            / k
    }
}

/// Label Distribution: mean over labels of the mean absolute odds deviation.
pub fn label_distribution(assignment: &SplitAssignment, segments: &[Segment], mode: CountMode) -> Result<f64> {
    let table = LabelTable::build(assignment, segments, mode)?;
    let c = table.labels.len() as f64;
    Ok((0..table.labels.len()).map(|i| table.mean_odds_deviation(i)).sum::<f64>() / c)
}

/// Inverse-frequency weighted LD: each label's odds deviation weighted by
/// `|D| / D_i`, summed rather than averaged over labels.
pub fn ifw_label_distribution(assignment: &SplitAssignment, segments: &[Segment], mode: CountMode) -> Result<f64> {
    let table = LabelTable::build(assignment, segments, mode)?;
    let zero: Vec<LabelId> = table
        .labels
        .iter()
        .zip(&table.dataset)
        .filter(|(_, &d)| d == 0.0)
        .map(|(&l, _)| l)
        .collect();
    if !zero.is_empty() {
        return Err(Error::ZeroMassLabels(zero));
    }
    Ok((0..table.labels.len())
        .map(|i| table.dataset_size / table.dataset[i] * table.mean_odds_deviation(i))
        .sum())
}

/// Examples Distribution: mean absolute deviation of subset sizes (in
/// segments) from `|D| * r_j`.
pub fn examples_distribution(assignment: &SplitAssignment) -> f64 {
    let n = assignment.total() as f64;
    let desired = assignment.spec.desired_sizes(n);
    let k = assignment.subsets.len() as f64;
    assignment
        .subsets
        .iter()
        .zip(desired)
        .map(|(s, c)| (s.len() as f64 - c).abs())
        .sum::<f64>()
        / k
}

/// `KL(P || Q)` in nats between two histograms, each normalized to sum 1.
/// Terms with `p(c) = 0` contribute 0.
pub fn kl_histograms(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid(format!("histograms have {} and {} classes", p.len(), q.len())));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0 && sq > 0.0) {
        return Err(invalid("histogram with zero total"));
    }
    let mut kl = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        let (pa, qb) = (a / sp, b / sq);
        if qb <= 0.0 {
            return Err(invalid("subset mass on a class the reference never sees"));
        }
        kl += pa * libm::log(pa / qb);
    }
    Ok(kl.max(0.0))
}

/// Mean over subsets of `KL(subset || dataset)` on point-mass label
/// histograms, with [`KL_SMOOTHING`] points added to every class.
pub fn kl_divergence(assignment: &SplitAssignment, segments: &[Segment]) -> Result<f64> {
    kl_divergence_smoothed(assignment, segments, KL_SMOOTHING)
}

pub fn kl_divergence_smoothed(assignment: &SplitAssignment, segments: &[Segment], smoothing: f64) -> Result<f64> {
    let table = LabelTable::build(assignment, segments, CountMode::PointMass)?;
    let q: Vec<f64> = table.dataset.iter().map(|v| v + smoothing).collect();
    let mut total = 0.0;
    for (_, per_label) in &table.subsets {
        let p: Vec<f64> = per_label.iter().map(|v| v + smoothing).collect();
        total += kl_histograms(&p, &q)?;
    }
    Ok(total / table.subsets.len() as f64)
}

/// 1-D Wasserstein distance between two histograms on identical uniform bins:
/// `Σ_b |CDF_p(b) - CDF_q(b)| * bin_width` after normalizing both.
pub fn wasserstein_1d(p: &[f64], q: &[f64], bin_width: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid(format!("histograms have {} and {} bins", p.len(), q.len())));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(invalid("bin width must be positive"));
    }
    if p.iter().chain(q).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(invalid("histogram weights must be finite and non-negative"));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp == 0.0 || sq == 0.0 {
        return Err(invalid("histogram with zero total"));
    }
    let (mut cp, mut cq, mut w) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        cp += a / sp;
        cq += b / sq;
        w += (cp - cq).abs();
    }
    Ok(w * bin_width)
}

fn subset_histograms(members: &[Vec<usize>], segments: &[Segment]) -> Result<Vec<Vec<f64>>> {
    let bins = segments.first().map_or(0, |s| s.intensity_histogram.len());
    if bins == 0 || segments.iter().any(|s| s.intensity_histogram.len() != bins) {
        return Err(invalid("segments have inconsistent intensity binning"));
    }
    Ok(members
        .iter()
        .map(|m| {
            let mut h = vec![0.0; bins];
            for &i in m {
                for (acc, &b) in h.iter_mut().zip(&segments[i].intensity_histogram) {
                    *acc += b as f64;
                }
            }
            h
        })
        .collect())
}

/// Intensity Drift Score: mean W1 between subset intensity histograms
/// (every unordered pair, or each subset against the dataset).
pub fn intensity_drift_score(assignment: &SplitAssignment, segments: &[Segment], mode: IdsMode) -> Result<f64> {
    let members = assignment.resolve(segments)?;
    let hists = subset_histograms(&members, segments)?;
    let width = 1.0 / hists[0].len() as f64;
    let mut total = 0.0;
    let mut pairs = 0usize;
    match mode {
        IdsMode::Pairwise => {
            for a in 0..hists.len() {
                for b in a + 1..hists.len() {
                    total += wasserstein_1d(&hists[a], &hists[b], width)?;
                    pairs += 1;
                }
            }
        }
        IdsMode::VsDataset => {
            let all: Vec<usize> = (0..segments.len()).collect();
            let dataset = &subset_histograms(&[all], segments)?[0];
            for h in &hists {
                total += wasserstein_1d(h, dataset, width)?;
                pairs += 1;
            }
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}

/// Options controlling how [`evaluate_split`] computes metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    pub ld_mode: CountMode,
    pub ids_mode: IdsMode,
}

/// All split metrics for one assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub ld: f64,
    pub ifwld: f64,
    pub ed: f64,
    pub kl: f64,
    pub ids: f64,
    /// Fraction of scans per subset.
    pub obtained_ratios: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
    pub options: MetricOptions,
}

pub fn evaluate_split(assignment: &SplitAssignment, segments: &[Segment], options: MetricOptions) -> Result<SplitReport> {
    let members = assignment.resolve(segments)?;
    let scans: Vec<f64> = members
        .iter()
        .map(|m| m.iter().map(|&i| segments[i].scan_count() as f64).sum())
        .collect();
    let total_scans: f64 = scans.iter().sum();
    Ok(SplitReport {
        ld: label_distribution(assignment, segments, options.ld_mode)?,
        ifwld: ifw_label_distribution(assignment, segments, options.ld_mode)?,
        ed: examples_distribution(assignment),
        kl: kl_divergence(assignment, segments)?,
        ids: intensity_drift_score(assignment, segments, options.ids_mode)?,
        obtained_ratios: scans.iter().map(|s| s / total_scans).collect(),
        method: assignment.method,
        seed: assignment.seed,
        granularity: assignment.granularity,
        options,
    })
}

/// Model quality (mIoU) as a function of the number of labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    points: Vec<(u64, f64)>,
}

impl LearningCurve {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("learning curve has no points"));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("labeled counts must be strictly increasing"));
        }
        if points.iter().any(|(_, m)| !(0.0..=1.0).contains(m)) {
            return Err(invalid("mIoU values must lie in [0, 1]"));
        }
        Ok(LearningCurve { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    /// Interpolated number of labels at which the curve first reaches `target`.
    pub fn labels_to_reach(&self, target: f64) -> Option<f64> {
        let (n0, m0) = self.points[0];
        if m0 >= target {
            return Some(n0 as f64);
        }
        self.points.windows(2).find_map(|w| {
            let ((na, ma), (nb, mb)) = (w[0], w[1]);
            (mb >= target).then(|| na as f64 + (target - ma) / (mb - ma) * (nb - na) as f64)
        })
    }
}

/// Labeling efficiency of `other` relative to `baseline` at mIoU `target`:
/// labels the baseline needs divided by labels `other` needs, so values
/// above 1 favour `other`.
pub fn labeling_efficiency(baseline: &LearningCurve, other: &LearningCurve, target: f64) -> Result<f64> {
    let nb = baseline
        .labels_to_reach(target)
        .ok_or(Error::UnreachableTarget { curve: "baseline", target })?;
    let no = other
        .labels_to_reach(target)
        .ok_or(Error::UnreachableTarget { curve: "other", target })?;
    if no <= 0.0 {
        return Err(invalid("the other curve reaches the target with zero labels"));
    }
    Ok(nb / no)
}
