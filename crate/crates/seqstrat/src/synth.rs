//! Synthetic sequential datasets for tests, benchmarks and demos.
//!
//! Labels follow Zipf-distributed point frequencies and appear in bursts
//! along each sequence, so rare classes cluster in a few sequences the way
//! they do in real driving logs. Intensities drift per sequence.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use seqstrat_core::manifest::{build_scan_meta, DatasetManifest};
use seqstrat_core::parse::Point;
use seqstrat_core::LabelId;

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub sequences: usize,
    pub scans_per_sequence: usize,
    pub labels: usize,
    pub zipf_exponent: f64,
    pub points_per_scan: usize,
    pub intensity_bins: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            sequences: 20,
            scans_per_sequence: 200,
            labels: 20,
            zipf_exponent: 1.2,
            points_per_scan: 1000,
            intensity_bins: 256,
            seed: 0,
        }
    }
}

/// Raw per-point content of one synthetic scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScan {
    pub sequence_id: String,
    pub frame_index: u32,
    /// Row-major 3x4 pose.
    pub pose: [f64; 12],
    pub points: Vec<Point>,
    pub labels: Vec<LabelId>,
}

impl RawScan {
    pub fn position(&self) -> [f64; 3] {
        [self.pose[3], self.pose[7], self.pose[11]]
    }
}

fn zipf_weights(labels: usize, exponent: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..labels).map(|i| 1.0 / ((i + 1) as f64).powf(exponent)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Generate raw scans for every sequence, in `(sequence, frame)` order.
pub fn generate_raw(config: &CorpusConfig) -> Vec<RawScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weights = zipf_weights(config.labels, config.zipf_exponent);
    let top = weights[0];
    let noise = Normal::<f64>::new(0.0, 0.5).expect("valid normal");
    let spread = Normal::<f64>::new(0.0, 0.08).expect("valid normal");
    let mut scans = Vec::with_capacity(config.sequences * config.scans_per_sequence);

    for s in 0..config.sequences {
        let sequence_id = format!("{s:02}");
        // which labels this sequence can show at all, and how often
        let availability: Vec<f64> = weights
            .iter()
            .map(|w| {
                let reach = (w / top).powf(0.35);
                if rng.gen::<f64>() < 0.25 + 0.7 * reach {
                    (0.2 + 0.75 * reach) * rng.gen_range(0.5..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut active: Vec<bool> = availability.iter().map(|&a| rng.gen::<f64>() < a).collect();
        let seq_intensity = rng.gen_range(0.3..0.6);
        let origin = [rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0), rng.gen_range(-5.0..5.0)];
        let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut position = origin;

        for f in 0..config.scans_per_sequence {
            // bursty presence: two-state chain per label with mean run ~25 scans
            for (i, a) in availability.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let flip = if active[i] { (1.0 - a) / 25.0 } else { a / 25.0 };
                if rng.gen::<f64>() < flip {
                    active[i] = !active[i];
                }
            }
            if !active.iter().any(|&x| x) {
                let most = (0..config.labels).find(|&i| availability[i] > 0.0).unwrap_or(0);
                active[most] = true;
            }

            let raw: Vec<f64> = (0..config.labels)
                .map(|i| if active[i] { weights[i] * noise.sample(&mut rng).exp() } else { 0.0 })
                .collect();
            let total: f64 = raw.iter().sum();
            let mut counts: Vec<usize> = raw
                .iter()
                .map(|r| if *r > 0.0 { ((r / total) * config.points_per_scan as f64).floor().max(1.0) as usize } else { 0 })
                .collect();
            let assigned: usize = counts.iter().sum();
            let biggest = (0..config.labels).max_by(|&a, &b| raw[a].total_cmp(&raw[b])).unwrap_or(0);
            if assigned < config.points_per_scan {
                counts[biggest] += config.points_per_scan - assigned;
            }

            let mut points = Vec::new();
            let mut labels = Vec::new();
            for (i, &n) in counts.iter().enumerate() {
                let mean = seq_intensity + 0.015 * (i as f64) - 0.1;
                for _ in 0..n {
                    let intensity = (mean + spread.sample(&mut rng)).clamp(0.0, 1.0) as f32;
                    let r: f32 = rng.gen_range(1.0..50.0);
                    let theta: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
                    points.push(Point { x: r * theta.cos(), y: r * theta.sin(), z: rng.gen_range(-2.0..1.0), intensity });
                    labels.push(i as LabelId);
                }
            }

            heading += rng.gen_range(-0.05..0.05);
            let step = rng.gen_range(0.8..1.2);
            position[0] += step * heading.cos();
            position[1] += step * heading.sin();
            let (c, sn) = (heading.cos(), heading.sin());
            let pose = [c, -sn, 0.0, position[0], sn, c, 0.0, position[1], 0.0, 0.0, 1.0, position[2]];

            scans.push(RawScan { sequence_id: sequence_id.clone(), frame_index: f as u32, pose, points, labels });
        }
    }
    scans
}

pub fn label_dictionary(labels: usize) -> BTreeMap<LabelId, String> {
    (0..labels as LabelId).map(|l| (l, format!("class_{l:02}"))).collect()
}

/// Generate the corpus directly as a manifest.
pub fn generate_manifest(config: &CorpusConfig) -> Result<DatasetManifest> {
    manifest_from_raw(&generate_raw(config), config)
}

/// Summarize raw scans into a manifest, as ingestion of their tree would.
pub fn manifest_from_raw(raw: &[RawScan], config: &CorpusConfig) -> Result<DatasetManifest> {
    let scans = raw
        .iter()
        .map(|r| {
            build_scan_meta(
                r.sequence_id.clone(),
                r.frame_index,
                r.position(),
                &r.points,
                &r.labels,
                config.intensity_bins,
            )
        })
        .collect::<seqstrat_core::Result<Vec<_>>>()?;
    Ok(DatasetManifest::new(scans, label_dictionary(config.labels), config.intensity_bins)?)
}

/// Write raw scans as a KITTI-style tree:
/// `<root>/<seq>/poses.txt`, `labels/<frame>.label`, `velodyne/<frame>.bin`.
pub fn write_kitti_tree(root: &Path, scans: &[RawScan]) -> Result<()> {
    let mut poses: BTreeMap<&str, String> = BTreeMap::new();
    for scan in scans {
        let dir = root.join(&scan.sequence_id);
        fs::create_dir_all(dir.join("labels"))?;
        fs::create_dir_all(dir.join("velodyne"))?;
        let line = scan.pose.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
        let text = poses.entry(&scan.sequence_id).or_default();
        text.push_str(&line);
        text.push('\n');

        // upper 16 bits carry an instance id that ingestion must drop
        let label_bytes: Vec<u8> = scan
            .labels
            .iter()
            .enumerate()
            .flat_map(|(i, &l)| (((i as u32 % 7) << 16) | l).to_le_bytes())
            .collect();
        fs::write(dir.join("labels").join(format!("{:06}.label", scan.frame_index)), label_bytes)?;
        let point_bytes: Vec<u8> = scan
            .points
            .iter()
            .flat_map(|p| [p.x, p.y, p.z, p.intensity])
            .flat_map(f32::to_le_bytes)
            .collect();
        fs::write(dir.join("velodyne").join(format!("{:06}.bin", scan.frame_index)), point_bytes)?;
    }
    for (seq, text) in poses {
        fs::write(root.join(seq).join("poses.txt"), text)?;
    }
    Ok(())
}
