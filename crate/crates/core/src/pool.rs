//! Generate many candidate splits, score them and rank by a weighted,
//! min-max normalized objective.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::metrics::{evaluate_split, MetricOptions, SplitReport};
use crate::segment::{Granularity, Segment, SegmentId};
use crate::stratify::{iterative_stratification, random_split, Method, SplitAssignment, StratifyMode, SubsetSpec, TieBreak};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Ld,
    Ifwld,
    Ids,
    Ed,
    Kl,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [MetricName::Ld, MetricName::Ifwld, MetricName::Ids, MetricName::Ed, MetricName::Kl];

    pub fn of(self, report: &SplitReport) -> f64 {
        match self {
            MetricName::Ld => report.ld,
            MetricName::Ifwld => report.ifwld,
            MetricName::Ids => report.ids,
            MetricName::Ed => report.ed,
            MetricName::Kl => report.kl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Ld => "ld",
            MetricName::Ifwld => "ifwld",
            MetricName::Ids => "ids",
            MetricName::Ed => "ed",
            MetricName::Kl => "kl",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown metric {s:?}")))
    }
}

/// Non-negative metric weights; metrics absent from the map weigh 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(pub BTreeMap<MetricName, f64>);

impl Default for Weights {
    /// Equal weights over LD, IFWLD, IDS and ED.
    fn default() -> Self {
        Weights(
            [MetricName::Ld, MetricName::Ifwld, MetricName::Ids, MetricName::Ed]
                .into_iter()
                .map(|m| (m, 1.0))
                .collect(),
        )
    }
}

impl Weights {
    pub fn get(&self, m: MetricName) -> f64 {
        self.0.get(&m).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and non-negative"));
        }
        if self.0.values().all(|&w| w == 0.0) {
            return Err(invalid("at least one weight must be positive"));
        }
        Ok(())
    }
}

impl FromStr for Weights {
    type Err = Error;

    /// `ld=1,ifwld=0.5`
    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| invalid(format!("weight {part:?} is not name=value")))?;
            let w: f64 = value
                .trim()
                .parse()
                .map_err(|_| invalid(format!("weight {part:?} has a non-numeric value")))?;
            map.insert(name.trim().parse()?, w);
        }
        let w = Weights(map);
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub methods: Vec<Method>,
    /// Splits per method; seeds `seed_base .. seed_base + n`.
    pub n: usize,
    pub seed_base: u64,
    pub spec: SubsetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
    pub weights: Weights,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Sequences carved out as a fixed test subset before splitting the rest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_test: Vec<String>,
}

impl PoolConfig {
    pub fn new(methods: Vec<Method>, n: usize, spec: SubsetSpec) -> Self {
        PoolConfig {
            methods,
            n,
            seed_base: 0,
            spec,
            granularity: None,
            weights: Weights::default(),
            metrics: MetricOptions::default(),
            tie_break: TieBreak::default(),
            frozen_test: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return Err(invalid("methods are listed twice"));
        }
        if self.n == 0 {
            return Err(invalid("pool size per method must be at least 1"));
        }
        self.spec.validate()?;
        self.weights.validate()
    }

    /// `(method, seed)` of every candidate, in generation order.
    pub fn candidate_keys(&self) -> Vec<(Method, u64)> {
        self.methods
            .iter()
            .flat_map(|&m| (0..self.n as u64).map(move |i| (m, self.seed_base.wrapping_add(i))))
            .collect()
    }
}

/// A scored split before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub assignment: SplitAssignment,
    pub report: SplitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub objective: f64,
    pub normalized: BTreeMap<MetricName, f64>,
    pub assignment: SplitAssignment,
    pub report: SplitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPool {
    pub config: PoolConfig,
    /// Segments of the frozen test sequences, excluded from every candidate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_test: Vec<SegmentId>,
    /// True when every candidate produced the same assignment.
    pub degenerate: bool,
    pub entries: Vec<PoolEntry>,
}

/// Split the segments of `sequences` off as a fixed test subset.
/// Returns the test segment ids and the remaining segments.
pub fn carve_frozen_test(segments: &[Segment], sequences: &[String]) -> Result<(Vec<SegmentId>, Vec<Segment>)> {
    let wanted: BTreeSet<&str> = sequences.iter().map(String::as_str).collect();
    let present: BTreeSet<&str> = segments.iter().map(|s| s.sequence_id.as_str()).collect();
    let unknown: Vec<&&str> = wanted.iter().filter(|s| !present.contains(**s)).collect();
    if !unknown.is_empty() {
        return Err(invalid(format!("frozen test sequences {unknown:?} are not in the segment table")));
    }
    let (test, rest): (Vec<&Segment>, Vec<&Segment>) =
        segments.iter().partition(|s| wanted.contains(s.sequence_id.as_str()));
    if rest.is_empty() {
        return Err(invalid("the frozen test set leaves no segments to split"));
    }
    Ok((test.iter().map(|s| s.segment_id).collect(), rest.into_iter().cloned().collect()))
}

/// Generate and score one candidate split.
pub fn generate_candidate(segments: &[Segment], config: &PoolConfig, method: Method, seed: u64) -> Result<Candidate> {
    let mut assignment = match method {
        Method::Random => random_split(segments, &config.spec, seed)?,
        Method::Msss => iterative_stratification(segments, &config.spec, seed, StratifyMode::Msss, config.tie_break)?,
        Method::Msegsss => {
            iterative_stratification(segments, &config.spec, seed, StratifyMode::Msegsss, config.tie_break)?
        }
    };
    assignment.granularity = config.granularity;
    let report = evaluate_split(&assignment, segments, config.metrics)?;
    Ok(Candidate { assignment, report })
}

/// Normalize every metric over the pool, weight, and sort ascending by
/// objective, then method, then seed.
pub fn rank_candidates(candidates: Vec<Candidate>, config: &PoolConfig, frozen_test: Vec<SegmentId>) -> Result<RankedPool> {
    config.validate()?;
    let mut bounds = BTreeMap::new();
    for m in MetricName::ALL {
        let (lo, hi) = candidates
            .iter()
            .map(|c| m.of(&c.report))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        bounds.insert(m, (lo, hi));
    }
    let degenerate = candidates.windows(2).all(|w| w[0].assignment.subsets == w[1].assignment.subsets);
    let mut entries: Vec<PoolEntry> = candidates
        .into_iter()
        .map(|c| {
            let normalized: BTreeMap<MetricName, f64> = MetricName::ALL
                .into_iter()
                .map(|m| {
                    let (lo, hi) = bounds[&m];
                    let v = m.of(&c.report);
                    let n = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
                    (m, n)
                })
                .collect();
            let objective = normalized.iter().map(|(m, n)| config.weights.get(*m) * n).sum();
            PoolEntry { objective, normalized, assignment: c.assignment, report: c.report }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then(a.assignment.method.cmp(&b.assignment.method))
            .then(a.assignment.seed.cmp(&b.assignment.seed))
    });
    Ok(RankedPool { config: config.clone(), frozen_test, degenerate, entries })
}

/// Sequential pool generation. The `seqstrat` crate offers a parallel
/// variant producing the identical pool.
pub fn generate_pool(segments: &[Segment], config: &PoolConfig) -> Result<RankedPool> {
    config.validate()?;
    let (frozen, owned);
    let working: &[Segment] = if config.frozen_test.is_empty() {
        frozen = Vec::new();
        segments
    } else {
        let carved = carve_frozen_test(segments, &config.frozen_test)?;
        frozen = carved.0;
        owned = carved.1;
        &owned
    };
    let candidates = config
        .candidate_keys()
        .into_iter()
        .map(|(m, s)| generate_candidate(working, config, m, s))
        .collect::<Result<Vec<_>>>()?;
    rank_candidates(candidates, config, frozen)
}

pub fn select_best(pool: &RankedPool) -> Result<&SplitAssignment> {
    pool.entries
        .first()
        .map(|e| &e.assignment)
        .ok_or_else(|| invalid("the pool is empty"))
}

/// Per-method arithmetic means of the raw metrics.
pub fn mean_metric_summary(pool: &RankedPool) -> BTreeMap<Method, BTreeMap<MetricName, f64>> {
    let mut sums: BTreeMap<Method, (usize, BTreeMap<MetricName, f64>)> = BTreeMap::new();
    for e in &pool.entries {
        let slot = sums.entry(e.assignment.method).or_default();
        slot.0 += 1;
        for m in MetricName::ALL {
            *slot.1.entry(m).or_insert(0.0) += m.of(&e.report);
        }
    }
    sums.into_iter()
        .map(|(method, (n, totals))| (method, totals.into_iter().map(|(m, t)| (m, t / n as f64)).collect()))
        .collect()
}
