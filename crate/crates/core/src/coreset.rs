//! Ego-pose distance sampling for active learning.
//!
//! Scans are chosen so that their ego-poses are far from every labeled pose
//! and from each other. A distance threshold starts at the largest pose
//! distance and shrinks geometrically whenever no unlabeled pose clears it,
//! which makes the admitted sets nested as the threshold decreases.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::rng::{derive_seed, seeded};
use crate::spatial::{distance, PoseIndex, Position};
use crate::{Error, Result};

/// Above this many poses the initial threshold uses a bounding-box diagonal
/// instead of the exact maximum pairwise distance.
pub const EXACT_MAX_DISTANCE_LIMIT: usize = 20_000;

pub const DEFAULT_ALPHA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseDim {
    /// Ground plane only (z ignored).
    #[serde(rename = "2d")]
    Planar,
    #[default]
    #[serde(rename = "3d")]
    Spatial,
}

impl PoseDim {
    pub fn project(self, p: Position) -> Position {
        match self {
            PoseDim::Planar => [p[0], p[1], 0.0],
            PoseDim::Spatial => p,
        }
    }
}

impl FromStr for PoseDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "2d" => Ok(PoseDim::Planar),
            "3" | "3d" => Ok(PoseDim::Spatial),
            other => Err(invalid(format!("distance dimension must be 2 or 3, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoresetConfig {
    /// Threshold decay: `d <- alpha * d`. Must lie in `(0, 1)`; 0.5 halves.
    pub alpha: f64,
    pub dim: PoseDim,
    pub seed: u64,
}

impl CoresetConfig {
    pub fn new(seed: u64) -> Self {
        CoresetConfig { alpha: DEFAULT_ALPHA, dim: PoseDim::Spatial, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Why a scan was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickRule {
    /// Farthest from the already selected scans.
    MaxMinSelected,
    /// Farthest from the labeled pool (first pick only).
    MaxMinLabeled,
    /// Seeded random draw (no labeled pool, first pick).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub scan_id: usize,
    /// Distance threshold in effect when the scan was admitted.
    pub threshold: f64,
    pub rule: PickRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetPlan {
    pub picks: Vec<Pick>,
    pub initial_threshold: f64,
    pub config: CoresetConfig,
}

impl CoresetPlan {
    pub fn scan_ids(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.scan_id).collect()
    }
}

fn check_pools(positions: &[Position], unlabeled: &[usize], labeled: &[usize]) -> Result<()> {
    let n = positions.len();
    if let Some(&bad) = unlabeled.iter().chain(labeled).find(|&&i| i >= n) {
        return Err(invalid(format!("scan id {bad} has no pose ({n} poses)")));
    }
    let u: BTreeSet<usize> = unlabeled.iter().copied().collect();
    if u.len() != unlabeled.len() {
        return Err(invalid("unlabeled pool contains duplicates"));
    }
    if let Some(both) = labeled.iter().find(|l| u.contains(l)) {
        return Err(invalid(format!("scan {both} is both labeled and unlabeled")));
    }
    if let Some(p) = unlabeled.iter().chain(labeled).find(|&&i| positions[i].iter().any(|v| !v.is_finite())) {
        return Err(invalid(format!("scan {p} has a non-finite pose")));
    }
    Ok(())
}

fn index_of(positions: &[Position], ids: &[usize], dim: PoseDim) -> PoseIndex {
    PoseIndex::new(ids.iter().map(|&i| (i, dim.project(positions[i]))).collect())
}

/// `{x in U : dist(x, y) > d for every y in L}`, ascending. With `L` empty
/// every unlabeled scan qualifies.
pub fn threshold_subset(positions: &[Position], unlabeled: &[usize], labeled: &[usize], d: f64, dim: PoseDim) -> Result<Vec<usize>> {
    check_pools(positions, unlabeled, labeled)?;
    if d < 0.0 || d.is_nan() {
        return Err(invalid("distance threshold must be non-negative"));
    }
    let index = index_of(positions, labeled, dim);
    let mut out: Vec<usize> = unlabeled
        .iter()
        .copied()
        .filter(|&x| index.nearest(&dim.project(positions[x])).map_or(true, |(_, dist)| dist > d))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Largest distance between a pose of `a` and a pose of `b`. Exact up to
/// [`EXACT_MAX_DISTANCE_LIMIT`] poses, otherwise the bounding-box diagonal
/// of both sets (an upper bound).
pub fn max_distance(positions: &[Position], a: &[usize], b: &[usize], dim: PoseDim) -> f64 {
    if a.len() + b.len() <= EXACT_MAX_DISTANCE_LIMIT {
        let mut best: f64 = 0.0;
        for &i in a {
            let p = dim.project(positions[i]);
            for &j in b {
                best = best.max(distance(&p, &dim.project(positions[j])));
            }
        }
        return best;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in a.iter().chain(b) {
        let p = dim.project(positions[i]);
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    distance(&lo, &hi)
}

/// Select `budget` unlabeled scans by ego-pose distance.
///
/// Per pick, the admissible set holds the unselected unlabeled scans farther
/// than `d` from every labeled and selected pose; `d` decays by `alpha` until
/// it is non-empty. The pick maximizes the distance to the closest selected
/// scan, or to the closest labeled scan for the first pick, or is drawn at
/// random when nothing is labeled. Ties go to the smallest scan id.
pub fn ego_pose_sample(
    positions: &[Position],
    unlabeled: &[usize],
    labeled: &[usize],
    budget: usize,
    config: &CoresetConfig,
) -> Result<CoresetPlan> {
    config.validate()?;
    check_pools(positions, unlabeled, labeled)?;
    if budget > unlabeled.len() {
        return Err(invalid(format!(
            "budget {budget} exceeds the {} unlabeled scans",
            unlabeled.len()
        )));
    }
    let dim = config.dim;
    let mut candidates = unlabeled.to_vec();
    candidates.sort_unstable();
    let pos: Vec<Position> = candidates.iter().map(|&i| dim.project(positions[i])).collect();

    let labeled_index = index_of(positions, labeled, dim);
    let to_labeled: Vec<f64> = pos
        .iter()
        .map(|p| labeled_index.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
        .collect();
    let mut to_selected = vec![f64::INFINITY; candidates.len()];
    let mut taken = vec![false; candidates.len()];

    let mut d = if labeled.is_empty() {
        max_distance(positions, unlabeled, unlabeled, dim)
    } else {
        max_distance(positions, labeled, unlabeled, dim)
    };
    let initial_threshold = d;
    let mut rng = seeded(config.seed);
    let mut picks = Vec::with_capacity(budget);

    for _ in 0..budget {
        let gate = |i: usize| to_labeled[i].min(to_selected[i]);
        let best_gate = (0..candidates.len())
            .filter(|&i| !taken[i])
            .map(gate)
            .fold(f64::NEG_INFINITY, f64::max);
        let admissible: Vec<usize> = if best_gate > 0.0 {
            while best_gate <= d {
                d *= config.alpha;
            }
            (0..candidates.len()).filter(|&i| !taken[i] && gate(i) > d).collect()
        } else {
            // every remaining pose coincides with a labeled or selected one
            d = 0.0;
            (0..candidates.len()).filter(|&i| !taken[i]).collect()
        };

        let (chosen, rule) = if !picks.is_empty() {
            (argmax_first(&admissible, &to_selected), PickRule::MaxMinSelected)
        } else if !labeled.is_empty() {
            (argmax_first(&admissible, &to_labeled), PickRule::MaxMinLabeled)
        } else {
            (admissible[rng.gen_range(0..admissible.len())], PickRule::Random)
        };

        taken[chosen] = true;
        picks.push(Pick { scan_id: candidates[chosen], threshold: d, rule });
        let p = pos[chosen];
        for (i, q) in pos.iter().enumerate() {
            if !taken[i] {
                to_selected[i] = to_selected[i].min(distance(&p, q));
            }
        }
    }
    Ok(CoresetPlan { picks, initial_threshold, config: *config })
}

/// First index (ascending, hence smallest scan id) maximizing `score`.
fn argmax_first(admissible: &[usize], score: &[f64]) -> usize {
    let mut best = admissible[0];
    for &i in &admissible[1..] {
        if score[i] > score[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsample {
    /// Uniform random subset.
    Rss,
    /// Ego-pose distance subset.
    Dss,
}

impl FromStr for Subsample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rss" => Ok(Subsample::Rss),
            "dss" => Ok(Subsample::Dss),
            other => Err(invalid(format!("unknown subsampling strategy {other:?}"))),
        }
    }
}

/// Reduce the unlabeled pool to `m` scans before scoring. Ascending ids.
pub fn subsample_unlabeled(
    positions: &[Position],
    unlabeled: &[usize],
    labeled: &[usize],
    m: usize,
    strategy: Subsample,
    config: &CoresetConfig,
) -> Result<Vec<usize>> {
    check_pools(positions, unlabeled, labeled)?;
    if m > unlabeled.len() {
        return Err(invalid(format!("subsample size {m} exceeds the {} unlabeled scans", unlabeled.len())));
    }
    let mut out = match strategy {
        Subsample::Rss => {
            let mut pool = unlabeled.to_vec();
            pool.sort_unstable();
            let mut rng = seeded(config.seed);
            rand::seq::index::sample(&mut rng, pool.len(), m).into_iter().map(|i| pool[i]).collect()
        }
        Subsample::Dss => ego_pose_sample(positions, unlabeled, labeled, m, config)?.scan_ids(),
    };
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlStrategy {
    Random,
    Distance,
    Score,
}

impl FromStr for AlStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(AlStrategy::Random),
            "distance" => Ok(AlStrategy::Distance),
            "score" => Ok(AlStrategy::Score),
            other => Err(invalid(format!("unknown query strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    pub steps: usize,
    pub budget: usize,
    pub strategy: AlStrategy,
    /// Optional pool reduction `(strategy, m)` applied at every step.
    pub subsample: Option<(Subsample, usize)>,
    pub coreset: CoresetConfig,
}

/// One active-learning query round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlStep {
    pub step: usize,
    pub seed: u64,
    /// Candidates considered after subsampling, ascending.
    pub pool: Vec<usize>,
    /// Queried scans in selection order.
    pub picks: Vec<usize>,
    pub labeled_after: usize,
    pub unlabeled_after: usize,
}

/// Plan `steps` query rounds, moving each round's picks from the unlabeled
/// to the labeled pool. Step `i` uses a seed derived from the config seed.
pub fn al_plan(
    positions: &[Position],
    labeled: &[usize],
    unlabeled: &[usize],
    config: &AlConfig,
    scores: Option<&BTreeMap<usize, f64>>,
) -> Result<Vec<AlStep>> {
    config.coreset.validate()?;
    check_pools(positions, unlabeled, labeled)?;
    if config.strategy == AlStrategy::Score && scores.is_none() {
        return Err(invalid("the score strategy needs a score table"));
    }
    let mut labeled = labeled.to_vec();
    let mut unlabeled: BTreeSet<usize> = unlabeled.iter().copied().collect();
    let mut steps = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let seed = derive_seed(config.coreset.seed, step as u64);
        let step_config = CoresetConfig { seed, ..config.coreset };
        let current: Vec<usize> = unlabeled.iter().copied().collect();
        if config.budget > current.len() {
            return Err(invalid(format!(
                "step {step}: budget {} exceeds the {} unlabeled scans",
                config.budget,
                current.len()
            )));
        }
        let pool = match config.subsample {
            Some((strategy, m)) => subsample_unlabeled(positions, &current, &labeled, m, strategy, &step_config)?,
            None => current,
        };
        if config.budget > pool.len() {
            return Err(invalid(format!(
                "step {step}: budget {} exceeds the subsampled pool of {}",
                config.budget,
                pool.len()
            )));
        }
        let picks = match config.strategy {
            AlStrategy::Random => {
                let mut rng = seeded(derive_seed(seed, u64::MAX));
                let mut p: Vec<usize> =
                    rand::seq::index::sample(&mut rng, pool.len(), config.budget).into_iter().map(|i| pool[i]).collect();
                p.sort_unstable();
                p
            }
            AlStrategy::Distance => ego_pose_sample(positions, &pool, &labeled, config.budget, &step_config)?.scan_ids(),
            AlStrategy::Score => top_scored(&pool, scores.unwrap_or(&BTreeMap::new()), config.budget)?,
        };
        for p in &picks {
            unlabeled.remove(p);
            labeled.push(*p);
        }
        steps.push(AlStep {
            step,
            seed,
            pool,
            picks,
            labeled_after: labeled.len(),
            unlabeled_after: unlabeled.len(),
        });
    }
    Ok(steps)
}

/// Highest scores first; equal scores go to the smaller scan id.
fn top_scored(pool: &[usize], scores: &BTreeMap<usize, f64>, budget: usize) -> Result<Vec<usize>> {
    let missing: Vec<usize> = pool.iter().copied().filter(|i| !scores.contains_key(i)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingScores(missing));
    }
    if let Some(bad) = pool.iter().find(|i| scores[i].is_nan()) {
        return Err(invalid(format!("scan {bad} has a NaN score")));
    }
    let mut ranked: Vec<usize> = pool.to_vec();
    ranked.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then(a.cmp(b)));
    ranked.truncate(budget);
    Ok(ranked)
}
