//! On-disk formats: line-delimited manifest and segment tables, JSON
//! documents for splits, reports, pools and plans, and plain-text score and
//! label-map files. Every writer goes through a temporary file and a rename.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use seqstrat_core::manifest::{DatasetManifest, LabelMap, ScanMeta};
use seqstrat_core::segment::{Granularity, RemainderPolicy, Segment};
use seqstrat_core::LabelId;

use crate::{Error, Result};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool identity and the resolved configuration that produced a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, config: Value) -> Self {
        Provenance { tool: TOOL.into(), version: VERSION.into(), command: command.into(), config }
    }
}

/// Write `bytes` to `path` atomically: a sibling temporary file is filled,
/// flushed and renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        let field = backticked(&e.to_string()).unwrap_or_else(|| "<document>".into());
        Error::format(path, e.line(), field, e.to_string())
    })
}

/// First backtick-quoted name in a serde message, e.g. the field of
/// "missing field `hist`".
fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// One record of a line-delimited file, with its fields taken one at a time
/// so errors can name them.
struct Record<'a> {
    path: &'a Path,
    line: usize,
    fields: Map<String, Value>,
}

impl<'a> Record<'a> {
    fn parse(path: &'a Path, line: usize, text: &str) -> Result<Self> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(fields)) => Ok(Record { path, line, fields }),
            Ok(_) => Err(Error::format(path, line, "<record>", "expected a JSON object")),
            Err(e) => Err(Error::format(path, line, "<record>", e.to_string())),
        }
    }

    fn take<T: DeserializeOwned>(&mut self, field: &str) -> Result<T> {
        let value = self
            .fields
            .remove(field)
            .ok_or_else(|| Error::format(self.path, self.line, field, "missing"))?;
        serde_json::from_value(value).map_err(|e| Error::format(self.path, self.line, field, e.to_string()))
    }

    fn take_opt<T: DeserializeOwned>(&mut self, field: &str) -> Result<Option<T>> {
        if self.fields.contains_key(field) {
            self.take(field).map(Some)
        } else {
            Ok(None)
        }
    }

    fn finish(self) -> Result<()> {
        match self.fields.keys().next() {
            Some(extra) => Err(Error::format(self.path, self.line, extra.clone(), "unknown field")),
            None => Ok(()),
        }
    }
}

/// Non-blank lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

fn to_line<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.push(b'\n');
    Ok(())
}

#[derive(Serialize)]
struct ManifestHeader<'a> {
    intensity_bins: usize,
    labels: &'a BTreeMap<LabelId, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<&'a Provenance>,
}

#[derive(Serialize)]
struct ScanRecord<'a> {
    seq: &'a str,
    frame: u32,
    pos: [f64; 3],
    counts: &'a BTreeMap<LabelId, u64>,
    hist: &'a [u64],
}

/// A manifest together with the provenance of the run that wrote it.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestFile {
    pub manifest: DatasetManifest,
    pub provenance: Option<Provenance>,
}

pub fn encode_manifest(manifest: &DatasetManifest, provenance: Option<&Provenance>) -> Result<Vec<u8>> {
    manifest.validate()?;
    let mut out = Vec::new();
    to_line(
        &mut out,
        &ManifestHeader { intensity_bins: manifest.intensity_bins, labels: &manifest.label_dictionary, provenance },
    )?;
    for s in &manifest.scans {
        to_line(
            &mut out,
            &ScanRecord {
                seq: &s.sequence_id,
                frame: s.frame_index,
                pos: s.position,
                counts: &s.label_counts,
                hist: &s.intensity_histogram,
            },
        )?;
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest, provenance: Option<&Provenance>) -> Result<()> {
    write_atomic(path, &encode_manifest(manifest, provenance)?)
}

pub fn decode_manifest(path: &Path, text: &str) -> Result<ManifestFile> {
    let mut lines = lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "intensity_bins", "missing header record"))?;
    let mut header = Record::parse(path, line, header)?;
    let intensity_bins: usize = header.take("intensity_bins")?;
    if intensity_bins == 0 {
        return Err(Error::format(path, line, "intensity_bins", "must be positive"));
    }
    let labels: BTreeMap<LabelId, String> = header.take("labels")?;
    let provenance = header.take_opt("provenance")?;
    header.finish()?;

    let mut scans: Vec<ScanMeta> = Vec::new();
    for (line, text) in lines {
        let mut r = Record::parse(path, line, text)?;
        let sequence_id: String = r.take("seq")?;
        let frame_index: u32 = r.take("frame")?;
        let position: [f64; 3] = r.take("pos")?;
        let label_counts: BTreeMap<LabelId, u64> = r.take("counts")?;
        let intensity_histogram: Vec<u64> = r.take("hist")?;
        r.finish()?;
        if intensity_histogram.len() != intensity_bins {
            return Err(Error::format(
                path,
                line,
                "hist",
                format!("{} bins, header declares {intensity_bins}", intensity_histogram.len()),
            ));
        }
        if let Some(unknown) = label_counts.keys().find(|l| !labels.contains_key(l)) {
            return Err(Error::format(path, line, "counts", format!("label {unknown} is not in the dictionary")));
        }
        if let Some(prev) = scans.last() {
            let order = (prev.sequence_id.as_str(), prev.frame_index).cmp(&(sequence_id.as_str(), frame_index));
            if order != std::cmp::Ordering::Less {
                let what = if order.is_eq() { "duplicate" } else { "out-of-order" };
                return Err(Error::format(path, line, "frame", format!("{what} scan {sequence_id}:{frame_index}")));
            }
        }
        let point_count = label_counts.values().sum();
        let hist_total: u64 = intensity_histogram.iter().sum();
        if hist_total != point_count {
            return Err(Error::format(
                path,
                line,
                "hist",
                format!("histogram holds {hist_total} points, counts hold {point_count}"),
            ));
        }
        scans.push(ScanMeta { sequence_id, frame_index, position, label_counts, intensity_histogram, point_count });
    }
    let manifest = DatasetManifest::new(scans, labels, intensity_bins)?;
    Ok(ManifestFile { manifest, provenance })
}

pub fn read_manifest(path: &Path) -> Result<ManifestFile> {
    decode_manifest(path, &read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SegmentHeader {
    granularity: Granularity,
    remainder: RemainderPolicy,
    intensity_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// Segments of one manifest at one granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTable {
    pub granularity: Granularity,
    pub remainder: RemainderPolicy,
    pub intensity_bins: usize,
    pub segments: Vec<Segment>,
    pub provenance: Option<Provenance>,
}

pub fn write_segments(path: &Path, table: &SegmentTable) -> Result<()> {
    let mut out = Vec::new();
    to_line(
        &mut out,
        &SegmentHeader {
            granularity: table.granularity,
            remainder: table.remainder,
            intensity_bins: table.intensity_bins,
            provenance: table.provenance.clone(),
        },
    )?;
    for s in &table.segments {
        to_line(&mut out, s)?;
    }
    write_atomic(path, &out)
}

pub fn read_segments(path: &Path) -> Result<SegmentTable> {
    let text = read_text(path)?;
    let mut lines = lines(&text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "granularity", "missing header record"))?;
    let mut h = Record::parse(path, line, header)?;
    let granularity = h.take("granularity")?;
    let remainder = h.take("remainder")?;
    let intensity_bins: usize = h.take("intensity_bins")?;
    let provenance = h.take_opt("provenance")?;
    h.finish()?;

    let mut segments: Vec<Segment> = Vec::new();
    for (line, text) in lines {
        let segment: Segment = serde_json::from_str(text).map_err(|e| {
            let field = backticked(&e.to_string()).unwrap_or_else(|| "<record>".into());
            Error::format(path, line, field, e.to_string())
        })?;
        let expected = segments.len() as u32;
        if segment.segment_id.0 != expected {
            return Err(Error::format(
                path,
                line,
                "segment_id",
                format!("expected {expected}, found {}", segment.segment_id),
            ));
        }
        let support: BTreeSet<LabelId> = segment.label_counts.iter().filter(|(_, &n)| n > 0).map(|(&l, _)| l).collect();
        if support != segment.label_presence {
            return Err(Error::format(path, line, "label_presence", "differs from the support of label_counts"));
        }
        if segment.label_counts.values().sum::<u64>() != segment.point_count {
            return Err(Error::format(path, line, "point_count", "differs from the sum of label_counts"));
        }
        if segment.intensity_histogram.len() != intensity_bins {
            return Err(Error::format(path, line, "intensity_histogram", "bin count differs from the header"));
        }
        segments.push(segment);
    }
    if segments.is_empty() {
        return Err(Error::format(path, line, "<records>", "segment table has no segments"));
    }
    Ok(SegmentTable { granularity, remainder, intensity_bins, segments, provenance })
}

/// A JSON document: provenance plus one payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

/// `seq:frame` key of a manifest scan.
pub fn scan_key(scan: &ScanMeta) -> String {
    format!("{}:{}", scan.sequence_id, scan.frame_index)
}

/// Lookup from `seq:frame` keys to manifest scan positions.
pub struct ScanKeys {
    by_key: BTreeMap<String, usize>,
    keys: Vec<String>,
}

impl ScanKeys {
    pub fn new(manifest: &DatasetManifest) -> Self {
        let keys: Vec<String> = manifest.scans.iter().map(scan_key).collect();
        let by_key = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        ScanKeys { by_key, keys }
    }

    pub fn index(&self, key: &str) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn key(&self, index: usize) -> &str {
        &self.keys[index]
    }

    pub fn keys(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.keys[i].clone()).collect()
    }

    /// Resolve a comma-separated list of keys. A bare sequence id selects
    /// every scan of that sequence.
    pub fn parse_list(&self, list: &str) -> Result<Vec<usize>> {
        let mut out = BTreeSet::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(i) = self.index(item) {
                out.insert(i);
                continue;
            }
            let prefix = format!("{item}:");
            let before = out.len();
            out.extend(self.keys.iter().enumerate().filter(|(_, k)| k.starts_with(&prefix)).map(|(i, _)| i));
            if out.len() == before {
                return Err(Error::Usage(format!("unknown scan or sequence {item:?}")));
            }
        }
        Ok(out.into_iter().collect())
    }
}

/// Score file: one `seq:frame score` pair per line; `#` starts a comment.
pub fn read_scores(path: &Path, keys: &ScanKeys) -> Result<BTreeMap<usize, f64>> {
    let text = read_text(path)?;
    let mut scores = BTreeMap::new();
    for (line, raw) in lines(&text) {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(path, line, "<record>", "expected `scan_id score`"));
        };
        let index = keys
            .index(key)
            .ok_or_else(|| Error::format(path, line, "scan_id", format!("unknown scan {key:?}")))?;
        let score: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::format(path, line, "score", format!("not a finite number: {value:?}")))?;
        if scores.insert(index, score).is_some() {
            return Err(Error::format(path, line, "scan_id", format!("duplicate scan {key:?}")));
        }
    }
    Ok(scores)
}

/// Label map file: `source target` pairs, then a `[names]` section of
/// `id name` pairs for the target dictionary. An optional `[map]` line may
/// open the first section; `#` starts a comment.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let text = read_text(path)?;
    let mut entries = BTreeMap::new();
    let mut names = BTreeMap::new();
    let mut in_names = false;
    for (line, raw) in lines(&text) {
        let content = raw.split('#').next().unwrap_or("").trim();
        match content {
            "" => continue,
            "[map]" => {
                in_names = false;
                continue;
            }
            "[names]" => {
                in_names = true;
                continue;
            }
            _ => {}
        }
        let (first, rest) = content
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format(path, line, "<record>", "expected two columns"))?;
        let id: LabelId = first
            .parse()
            .map_err(|_| Error::format(path, line, if in_names { "id" } else { "source" }, format!("bad label id {first:?}")))?;
        let rest = rest.trim();
        if in_names {
            if names.insert(id, rest.to_string()).is_some() {
                return Err(Error::format(path, line, "id", format!("label {id} named twice")));
            }
        } else {
            let target: LabelId = rest
                .parse()
                .map_err(|_| Error::format(path, line, "target", format!("bad label id {rest:?}")))?;
            if entries.insert(id, target).is_some() {
                return Err(Error::format(path, line, "source", format!("label {id} mapped twice")));
            }
        }
    }
    Ok(LabelMap::new(entries, names)?)
}

/// Label names file: `id name` per line.
pub fn read_label_names(path: &Path) -> Result<BTreeMap<LabelId, String>> {
    let text = read_text(path)?;
    let mut names = BTreeMap::new();
    for (line, raw) in lines(&text) {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (id, name) = content
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format(path, line, "<record>", "expected `id name`"))?;
        let id: LabelId = id.parse().map_err(|_| Error::format(path, line, "id", format!("bad label id {id:?}")))?;
        names.insert(id, name.trim().to_string());
    }
    Ok(names)
}

/// `dir/name` unless an explicit path was given.
pub fn output_path(explicit: Option<&Path>, dir: &Path, name: &str) -> PathBuf {
    explicit.map_or_else(|| dir.join(name), Path::to_path_buf)
}
