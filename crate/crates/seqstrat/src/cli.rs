//! The `seqstrat` command line.
//!
//! Exit codes: 0 on success, 1 on domain errors (with a JSON error record on
//! standard error), 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use seqstrat_core::coreset::{
    al_plan, ego_pose_sample, AlConfig, AlStrategy, CoresetConfig, PickRule, PoseDim, Subsample, DEFAULT_ALPHA,
};
use seqstrat_core::manifest::DEFAULT_INTENSITY_BINS;
use seqstrat_core::metrics::{evaluate_split, CountMode, IdsMode, MetricOptions, SplitReport};
use seqstrat_core::pool::{mean_metric_summary, select_best, MetricName, PoolConfig, RankedPool, Weights};
use seqstrat_core::segment::{segment_manifest, Granularity, RemainderPolicy, Segment, SegmentId};
use seqstrat_core::spatial::Position;
use seqstrat_core::stratify::{
    iterative_stratification, random_split, Method, SplitAssignment, StratifyMode, SubsetSpec, TieBreak,
};

use crate::formats::{
    output_path, read_json, read_label_map, read_label_names, read_manifest, read_scores, read_segments, write_json,
    write_manifest, write_segments, Document, Provenance, ScanKeys, SegmentTable,
};
use crate::ingest::{ingest_tree, IngestOptions};
use crate::parallel::{generate_pool, resolve_jobs};
use crate::synth::{generate_raw, write_kitti_tree, CorpusConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "seqstrat", version, about = "Sequence-aware stratified dataset splits and ego-pose coresets")]
pub struct Cli {
    /// Seed for every randomized step. Required by split, coreset, al-plan and synth.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to SEQSTRAT_JOBS, then all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file mirroring the flags; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Directory for outputs written under their default names.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from a KITTI-style directory tree.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Group manifest scans into segments.
    #[command(args_override_self = true)]
    Segment(SegmentArgs),
    /// Split segments into subsets.
    #[command(args_override_self = true)]
    Split(SplitArgs),
    /// Compute the quality metrics of a split.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Generate, score and rank a pool of candidate splits.
    #[command(args_override_self = true)]
    Rank(RankArgs),
    /// Select scans by ego-pose distance.
    #[command(args_override_self = true)]
    Coreset(CoresetArgs),
    /// Plan active-learning query rounds.
    #[command(name = "al-plan", args_override_self = true)]
    AlPlan(AlPlanArgs),
    /// Write a synthetic corpus as a manifest and optionally a KITTI-style tree.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
}

pub const SUBCOMMANDS: [&str; 8] = ["ingest", "segment", "split", "evaluate", "rank", "coreset", "al-plan", "synth"];

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub root: PathBuf,
    /// Manifest path [default: <out-dir>/manifest.jsonl]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Remapping table: `source target` lines and a `[names]` section.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Names of source labels: `id name` lines.
    #[arg(long)]
    pub label_names: Option<PathBuf>,
    /// Multiplier applied to stored intensities, e.g. 0.00392 for 0-255 data.
    #[arg(long, default_value_t = 1.0)]
    pub intensity_scale: f32,
    #[arg(long, default_value_t = DEFAULT_INTENSITY_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Scans per segment, or `sequence`.
    #[arg(long)]
    pub granularity: Granularity,
    /// Trailing short segment: `keep` or `merge` into the previous one.
    #[arg(long, default_value = "keep")]
    pub remainder: RemainderPolicy,
    /// [default: <out-dir>/segments.jsonl]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// random, msss or msegsss.
    #[arg(long)]
    pub method: Method,
    /// Comma-separated subset ratios summing to 1, e.g. 0.7,0.1,0.2.
    #[arg(long)]
    pub ratios: String,
    /// Comma-separated subset names.
    #[arg(long)]
    pub names: Option<String>,
    /// Label tie-break: uniform or sequence.
    #[arg(long, default_value = "uniform")]
    pub tie_break: TieBreak,
    /// [default: <out-dir>/split.json]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    /// Label counting for LD/IFWLD: containment or points.
    #[arg(long, default_value = "containment")]
    pub mode: CountMode,
    /// IDS comparison: pairwise or dataset.
    #[arg(long, default_value = "pairwise")]
    pub ids: IdsMode,
    /// [default: <out-dir>/report.json]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value = "random,msss,msegsss")]
    pub methods: String,
    /// Candidate splits per method.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub ratios: String,
    /// Objective weights, e.g. ld=1,ifwld=1,ids=1,ed=1 (the default).
    #[arg(long)]
    pub weights: Option<String>,
    /// First seed of every method's run [default: --seed].
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Comma-separated sequences held out as a fixed test subset.
    #[arg(long)]
    pub frozen_test: Option<String>,
    #[arg(long, default_value = "uniform")]
    pub tie_break: TieBreak,
    #[arg(long, default_value = "containment")]
    pub mode: CountMode,
    #[arg(long, default_value = "pairwise")]
    pub ids: IdsMode,
    /// [default: <out-dir>/pool.json]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Winning split [default: <out-dir>/best_split.json]
    #[arg(long)]
    #[serde(skip)]
    pub best: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CoresetArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Labeled scans: comma-separated `seq:frame` keys or whole sequence ids.
    #[arg(long, default_value = "")]
    pub labeled: String,
    /// Unlabeled scans, same syntax [default: every scan not labeled].
    #[arg(long)]
    pub unlabeled: Option<String>,
    #[arg(long)]
    pub budget: usize,
    /// Threshold decay factor in (0, 1).
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Distance on the ground plane (2) or in space (3).
    #[arg(long, default_value = "3")]
    pub dim: PoseDim,
    /// [default: <out-dir>/plan.json]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlPlanArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "")]
    pub labeled: String,
    #[arg(long)]
    pub unlabeled: Option<String>,
    #[arg(long)]
    pub steps: usize,
    /// Scans queried per step.
    #[arg(long)]
    pub budget: usize,
    /// random, distance or score.
    #[arg(long)]
    pub strategy: AlStrategy,
    /// `seq:frame score` lines, required by the score strategy.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Reduce the unlabeled pool before querying: rss or dss.
    #[arg(long, requires = "m")]
    pub subsample: Option<Subsample>,
    /// Pool size after subsampling.
    #[arg(long, requires = "subsample")]
    pub m: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "3")]
    pub dim: PoseDim,
    /// [default: <out-dir>/al_plan.json]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub sequences: usize,
    #[arg(long, default_value_t = 200)]
    pub scans: usize,
    #[arg(long, default_value_t = 20)]
    pub labels: usize,
    /// Zipf exponent of label point frequencies.
    #[arg(long, default_value_t = 1.2)]
    pub zipf: f64,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = DEFAULT_INTENSITY_BINS)]
    pub bins: usize,
    /// Also write the raw corpus as a KITTI-style tree here.
    #[arg(long)]
    #[serde(skip)]
    pub root: Option<PathBuf>,
    /// [default: <out-dir>/manifest.jsonl]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Split file body; the frozen test ids accompany pool winners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitBody {
    pub split: SplitAssignment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_test: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub report: SplitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolBody {
    pub pool: RankedPool,
    pub summary: BTreeMap<Method, BTreeMap<MetricName, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPick {
    pub scan: String,
    pub threshold: f64,
    pub rule: PickRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBody {
    pub initial_threshold: f64,
    pub alpha: f64,
    pub dim: PoseDim,
    pub seed: u64,
    pub picks: Vec<PlannedPick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub step: usize,
    pub seed: u64,
    pub pool: Vec<String>,
    pub picks: Vec<String>,
    pub labeled_after: usize,
    pub unlabeled_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlPlanBody {
    pub steps: Vec<PlannedStep>,
}

/// Parse `argv`, run the command and return the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match crate::config::expand_args(argv, &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    let record = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{record}");
    match e {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Segment(a) => segment(cli, a),
        Command::Split(a) => split(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Rank(a) => rank(cli, a),
        Command::Coreset(a) => coreset(cli, a),
        Command::AlPlan(a) => plan_al(cli, a),
        Command::Synth(a) => synth(cli, a),
    }
}

fn require_seed(cli: &Cli, command: &str) -> Result<u64> {
    cli.seed.ok_or_else(|| Error::Usage(format!("{command} is randomized and needs an explicit --seed")))
}

/// Provenance echoing the resolved arguments. Worker count, verbosity and
/// output locations are left out so they never change output bytes.
fn provenance<A: Serialize>(cli: &Cli, command: &str, args: &A) -> Result<Provenance> {
    let mut config = serde_json::to_value(args)?;
    if let (Value::Object(map), Some(seed)) = (&mut config, cli.seed) {
        map.insert("seed".into(), seed.into());
    }
    Ok(Provenance::new(command, config))
}

fn written(path: &Path) {
    log::info!("wrote {}", path.display());
}

fn parse_ratios(ratios: &str, names: Option<&str>) -> Result<SubsetSpec> {
    let values = ratios
        .split(',')
        .map(|r| r.trim().parse::<f64>().map_err(|_| Error::Usage(format!("bad ratio {r:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let spec = match names {
        Some(n) => SubsetSpec::named(values, n.split(',').map(|s| s.trim().to_string()).collect()),
        None => SubsetSpec::new(values),
    };
    spec.map_err(|e| Error::Usage(e.to_string()))
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let options = IngestOptions {
        intensity_scale: a.intensity_scale,
        bins: a.bins,
        label_map: a.label_map.as_deref().map(read_label_map).transpose()?,
        label_names: a.label_names.as_deref().map(read_label_names).transpose()?.unwrap_or_default(),
    };
    let manifest = ingest_tree(&a.root, &options, resolve_jobs(cli.jobs))?;
    let out = output_path(a.out.as_deref(), &cli.out_dir, "manifest.jsonl");
    write_manifest(&out, &manifest, Some(&provenance(cli, "ingest", a)?))?;
    written(&out);
    Ok(())
}

fn segment(cli: &Cli, a: &SegmentArgs) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?.manifest;
    let segments = segment_manifest(&manifest, a.granularity, a.remainder)?;
    log::info!("{} scans form {} segments", manifest.scans.len(), segments.len());
    let table = SegmentTable {
        granularity: a.granularity,
        remainder: a.remainder,
        intensity_bins: manifest.intensity_bins,
        segments,
        provenance: Some(provenance(cli, "segment", a)?),
    };
    let out = output_path(a.out.as_deref(), &cli.out_dir, "segments.jsonl");
    write_segments(&out, &table)?;
    written(&out);
    Ok(())
}

fn split(cli: &Cli, a: &SplitArgs) -> Result<()> {
    let seed = require_seed(cli, "split")?;
    let spec = parse_ratios(&a.ratios, a.names.as_deref())?;
    let table = read_segments(&a.segments)?;
    let assignment = match a.method {
        Method::Random => random_split(&table.segments, &spec, seed)?,
        Method::Msss => iterative_stratification(&table.segments, &spec, seed, StratifyMode::Msss, a.tie_break)?,
        Method::Msegsss => iterative_stratification(&table.segments, &spec, seed, StratifyMode::Msegsss, a.tie_break)?,
    }
    .with_granularity(table.granularity);
    let out = output_path(a.out.as_deref(), &cli.out_dir, "split.json");
    let doc = Document {
        provenance: provenance(cli, "split", a)?,
        body: SplitBody { split: assignment, frozen_test: Vec::new() },
    };
    write_json(&out, &doc)?;
    written(&out);
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let doc: Document<SplitBody> = read_json(&a.split)?;
    let table = read_segments(&a.segments)?;
    let frozen: std::collections::BTreeSet<SegmentId> = doc.body.frozen_test.iter().copied().collect();
    let segments: Vec<Segment> = table.segments.into_iter().filter(|s| !frozen.contains(&s.segment_id)).collect();
    let options = MetricOptions { ld_mode: a.mode, ids_mode: a.ids };
    let report = evaluate_split(&doc.body.split, &segments, options)?;
    let out = output_path(a.out.as_deref(), &cli.out_dir, "report.json");
    write_json(&out, &Document { provenance: provenance(cli, "evaluate", a)?, body: ReportBody { report } })?;
    written(&out);
    Ok(())
}

fn rank(cli: &Cli, a: &RankArgs) -> Result<()> {
    let seed_base = a
        .seed_base
        .or(cli.seed)
        .ok_or_else(|| Error::Usage("rank is randomized and needs --seed-base or --seed".into()))?;
    let methods = a
        .methods
        .split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| Error::Usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let table = read_segments(&a.segments)?;
    let mut config = PoolConfig::new(methods, a.n, parse_ratios(&a.ratios, None)?);
    config.seed_base = seed_base;
    config.granularity = Some(table.granularity);
    if let Some(w) = &a.weights {
        config.weights = w.parse::<Weights>().map_err(|e| Error::Usage(e.to_string()))?;
    }
    config.metrics = MetricOptions { ld_mode: a.mode, ids_mode: a.ids };
    config.tie_break = a.tie_break;
    config.frozen_test = a
        .frozen_test
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;

    let pool = generate_pool(&table.segments, &config, resolve_jobs(cli.jobs))?;
    let best = select_best(&pool)?.clone();
    let prov = provenance(cli, "rank", a)?;
    let summary = mean_metric_summary(&pool);
    let frozen_test = pool.frozen_test.clone();

    let out = output_path(a.out.as_deref(), &cli.out_dir, "pool.json");
    write_json(&out, &Document { provenance: prov.clone(), body: PoolBody { pool, summary } })?;
    written(&out);
    let best_out = output_path(a.best.as_deref(), &cli.out_dir, "best_split.json");
    write_json(&best_out, &Document { provenance: prov, body: SplitBody { split: best, frozen_test } })?;
    written(&best_out);
    Ok(())
}

struct Pools {
    positions: Vec<Position>,
    keys: ScanKeys,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

fn pools(manifest_path: &Path, labeled: &str, unlabeled: Option<&str>) -> Result<Pools> {
    let manifest = read_manifest(manifest_path)?.manifest;
    let keys = ScanKeys::new(&manifest);
    let labeled = keys.parse_list(labeled)?;
    let unlabeled = match unlabeled {
        Some(list) => keys.parse_list(list)?,
        None => (0..manifest.scans.len()).filter(|i| labeled.binary_search(i).is_err()).collect(),
    };
    let positions = manifest.scans.iter().map(|s| s.position).collect();
    Ok(Pools { positions, keys, labeled, unlabeled })
}

fn coreset(cli: &Cli, a: &CoresetArgs) -> Result<()> {
    let seed = require_seed(cli, "coreset")?;
    let p = pools(&a.manifest, &a.labeled, a.unlabeled.as_deref())?;
    let config = CoresetConfig { alpha: a.alpha, dim: a.dim, seed };
    let plan = ego_pose_sample(&p.positions, &p.unlabeled, &p.labeled, a.budget, &config)?;
    let body = PlanBody {
        initial_threshold: plan.initial_threshold,
        alpha: a.alpha,
        dim: a.dim,
        seed,
        picks: plan
            .picks
            .iter()
            .map(|pick| PlannedPick { scan: p.keys.key(pick.scan_id).to_string(), threshold: pick.threshold, rule: pick.rule })
            .collect(),
    };
    let out = output_path(a.out.as_deref(), &cli.out_dir, "plan.json");
    write_json(&out, &Document { provenance: provenance(cli, "coreset", a)?, body })?;
    written(&out);
    Ok(())
}

fn plan_al(cli: &Cli, a: &AlPlanArgs) -> Result<()> {
    let seed = require_seed(cli, "al-plan")?;
    let p = pools(&a.manifest, &a.labeled, a.unlabeled.as_deref())?;
    let scores = a.scores.as_deref().map(|path| read_scores(path, &p.keys)).transpose()?;
    if a.strategy == AlStrategy::Score && scores.is_none() {
        return Err(Error::Usage("--strategy score needs --scores".into()));
    }
    let config = AlConfig {
        steps: a.steps,
        budget: a.budget,
        strategy: a.strategy,
        subsample: a.subsample.zip(a.m),
        coreset: CoresetConfig { alpha: a.alpha, dim: a.dim, seed },
    };
    let steps = al_plan(&p.positions, &p.labeled, &p.unlabeled, &config, scores.as_ref())?;
    let body = AlPlanBody {
        steps: steps
            .into_iter()
            .map(|s| PlannedStep {
                step: s.step,
                seed: s.seed,
                pool: p.keys.keys(&s.pool),
                picks: p.keys.keys(&s.picks),
                labeled_after: s.labeled_after,
                unlabeled_after: s.unlabeled_after,
            })
            .collect(),
    };
    let out = output_path(a.out.as_deref(), &cli.out_dir, "al_plan.json");
    write_json(&out, &Document { provenance: provenance(cli, "al-plan", a)?, body })?;
    written(&out);
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let seed = require_seed(cli, "synth")?;
    if a.sequences == 0 || a.scans == 0 || a.labels == 0 || a.bins == 0 {
        return Err(Error::Usage("synth sizes must be positive".into()));
    }
    let config = CorpusConfig {
        sequences: a.sequences,
        scans_per_sequence: a.scans,
        labels: a.labels,
        zipf_exponent: a.zipf,
        points_per_scan: a.points,
        intensity_bins: a.bins,
        seed,
    };
    let raw = generate_raw(&config);
    if let Some(root) = &a.root {
        write_kitti_tree(root, &raw)?;
        written(root);
    }
    let manifest = crate::synth::manifest_from_raw(&raw, &config)?;
    let out = output_path(a.out.as_deref(), &cli.out_dir, "manifest.jsonl");
    write_manifest(&out, &manifest, Some(&provenance(cli, "synth", a)?))?;
    written(&out);
    Ok(())
}
