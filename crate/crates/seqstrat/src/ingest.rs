//! KITTI-style directory ingestion:
//! `<root>/<seq>/poses.txt`, `<root>/<seq>/labels/NNNNNN.label`,
//! `<root>/<seq>/velodyne/NNNNNN.bin`, frame files matched to pose lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use seqstrat_core::manifest::{apply_label_map, build_scan_meta, DatasetManifest, LabelMap, ScanMeta};
use seqstrat_core::parse::{parse_label_bytes, parse_point_bytes, parse_pose_text};
use seqstrat_core::LabelId;

use crate::parallel::thread_pool;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Multiplier applied to stored intensities before clamping to `[0, 1]`.
    pub intensity_scale: f32,
    pub bins: usize,
    pub label_map: Option<LabelMap>,
    /// Names for source label ids; unnamed ids get `label_<id>`.
    pub label_names: BTreeMap<LabelId, String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            intensity_scale: 1.0,
            bins: seqstrat_core::manifest::DEFAULT_INTENSITY_BINS,
            label_map: None,
            label_names: BTreeMap::new(),
        }
    }
}

struct Frame {
    sequence: String,
    index: u32,
    position: [f64; 3],
    dir: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn sequences(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().join("poses.txt").is_file() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Usage(format!("{}: no sequence directories with poses.txt", root.display())));
    }
    Ok(out)
}

fn frames(root: &Path) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    for seq in sequences(root)? {
        let dir = root.join(&seq);
        let pose_path = dir.join("poses.txt");
        let text = fs::read_to_string(&pose_path).map_err(|e| Error::io(&pose_path, e))?;
        let poses = parse_pose_text(&text).map_err(|e| match e {
            seqstrat_core::Error::Parse { line, message } => Error::format(&pose_path, line, "pose", message),
            other => other.into(),
        })?;
        for (i, position) in poses.into_iter().enumerate() {
            frames.push(Frame { sequence: seq.clone(), index: i as u32, position, dir: dir.clone() });
        }
    }
    Ok(frames)
}

fn scan(frame: &Frame, options: &IngestOptions) -> Result<(ScanMeta, usize)> {
    let name = format!("{:06}", frame.index);
    let point_path = frame.dir.join("velodyne").join(format!("{name}.bin"));
    let label_path = frame.dir.join("labels").join(format!("{name}.label"));
    let cloud = parse_point_bytes(&read(&point_path)?, options.intensity_scale)
        .map_err(|e| Error::format(&point_path, 0, "points", e.to_string()))?;
    let labels =
        parse_label_bytes(&read(&label_path)?).map_err(|e| Error::format(&label_path, 0, "labels", e.to_string()))?;
    let meta = build_scan_meta(frame.sequence.clone(), frame.index, frame.position, &cloud.points, &labels, options.bins)
        .map_err(|e| Error::format(&label_path, 0, "labels", e.to_string()))?;
    Ok((meta, cloud.clamped))
}

/// Build a manifest from a KITTI-style tree, parsing frames on `jobs` workers.
pub fn ingest_tree(root: &Path, options: &IngestOptions, jobs: usize) -> Result<DatasetManifest> {
    if options.bins == 0 {
        return Err(Error::Usage("--bins must be positive".into()));
    }
    if !(options.intensity_scale > 0.0 && options.intensity_scale.is_finite()) {
        return Err(Error::Usage("--intensity-scale must be positive".into()));
    }
    let frames = frames(root)?;
    let parsed = thread_pool(jobs)?.install(|| frames.par_iter().map(|f| scan(f, options)).collect::<Result<Vec<_>>>())?;
    let clamped: usize = parsed.iter().map(|(_, c)| c).sum();
    if clamped > 0 {
        log::warn!("{clamped} intensities fell outside [0, 1] after scaling and were clamped");
    }
    let scans: Vec<ScanMeta> = parsed.into_iter().map(|(s, _)| s).collect();

    let mut dictionary = options.label_names.clone();
    for s in &scans {
        for &l in s.label_counts.keys() {
            dictionary.entry(l).or_insert_with(|| format!("label_{l}"));
        }
    }
    log::info!("ingested {} scans with {} labels", scans.len(), dictionary.len());
    let manifest = DatasetManifest::new(scans, dictionary, options.bins)?;
    match &options.label_map {
        Some(map) => Ok(apply_label_map(&manifest, map)?),
        None => Ok(manifest),
    }
}
