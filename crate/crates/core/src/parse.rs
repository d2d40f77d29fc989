//! Decoders for KITTI-style pose text and SemanticKITTI-style binary scan files.
//!
//! All decoders work on in-memory buffers and preserve record order, so
//! decoding the concatenation of two buffers equals concatenating the results.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, LabelId, Result};

/// One point of a scan: `x, y, z` in meters plus intensity clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

/// Result of decoding a point file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Number of intensities that fell outside `[0, 1]` and were clamped.
    pub clamped: usize,
}

/// Parse a poses file: one row-major 3x4 rigid transform per line, twelve
/// whitespace separated decimals. Only the translation column is kept.
///
/// Blank lines are skipped; line numbers in errors are 1-based file lines.
pub fn parse_pose_text(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = [0.0f64; 12];
        let mut count = 0usize;
        for field in line.split_whitespace() {
            if count == 12 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected 12 fields, found more".into(),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse {field:?} as a decimal"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values[count] = v;
            count += 1;
        }
        if count != 12 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 12 fields, found {count}"),
            });
        }
        out.push([values[3], values[7], values[11]]);
    }
    Ok(out)
}

/// Parse a label file of little-endian `u32` words. The semantic id is the
/// lower 16 bits; the instance id in the upper half is dropped.
pub fn parse_label_bytes(bytes: &[u8]) -> Result<Vec<LabelId>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Truncated { len: bytes.len(), record: 4 });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]) & 0xFFFF)
        .collect())
}

/// Parse a point file of little-endian `f32` quadruples `(x, y, z, intensity)`.
///
/// `intensity_scale` multiplies raw intensities before clamping, for sensors
/// that store 0..255 values (pass `1.0 / 255.0`).
pub fn parse_point_bytes(bytes: &[u8], intensity_scale: f32) -> Result<PointCloud> {
    if bytes.len() % 16 != 0 {
        return Err(Error::Truncated { len: bytes.len(), record: 16 });
    }
    let mut cloud = PointCloud {
        points: Vec::with_capacity(bytes.len() / 16),
        clamped: 0,
    };
    for (index, rec) in bytes.chunks_exact(16).enumerate() {
        let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
        let (x, y, z) = (f(0), f(4), f(8));
        if x.is_nan() || y.is_nan() || z.is_nan() {
            return Err(Error::Record {
                index,
                message: format!("NaN coordinate ({x}, {y}, {z})"),
            });
        }
        let raw = f(12) * intensity_scale;
        let intensity = if raw.is_nan() {
            cloud.clamped += 1;
            0.0
        } else if !(0.0..=1.0).contains(&raw) {
            cloud.clamped += 1;
            raw.clamp(0.0, 1.0)
        } else {
            raw
        };
        cloud.points.push(Point { x, y, z, intensity });
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn encode_points(points: &[[f32; 4]]) -> Vec<u8> {
        points
            .iter()
            .flat_map(|p| p.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    #[test]
    fn pose_translation_is_last_column() {
        let poses = parse_pose_text("1 0 0 1 0 1 0 2 0 0 1 3").unwrap();
        assert_eq!(poses, vec![[1.0, 2.0, 3.0]]);
    }

    #[test]
    fn empty_pose_file() {
        assert_eq!(parse_pose_text("").unwrap(), Vec::<[f64; 3]>::new());
        assert_eq!(parse_pose_text("\n\n").unwrap(), Vec::<[f64; 3]>::new());
    }

    #[test]
    fn pose_arity_errors_carry_line() {
        let err = parse_pose_text("1 0 0 1 0 1 0 2 0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_pose_text("1 0 0 1 0 1 0 2 0 0 1 3\n1 0 0 1 0 1 0 2 0 0 1 3 4").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn pose_rejects_non_finite_and_garbage() {
        assert!(matches!(
            parse_pose_text("1 0 0 inf 0 1 0 2 0 0 1 3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_pose_text("1 0 0 NaN 0 1 0 2 0 0 1 3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_pose_text("1 0 0 x 0 1 0 2 0 0 1 3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn label_lower_half_only() {
        assert_eq!(parse_label_bytes(&0x0001_0033u32.to_le_bytes()).unwrap(), vec![51]);
        assert_eq!(parse_label_bytes(&0u32.to_le_bytes()).unwrap(), vec![0]);
        assert_eq!(
            parse_label_bytes(&[0; 5]),
            Err(Error::Truncated { len: 5, record: 4 })
        );
    }

    #[test]
    fn points_decode_in_order() {
        let one = parse_point_bytes(&encode_points(&[[0.0, 0.0, 0.0, 0.5]]), 1.0).unwrap();
        assert_eq!(
            one.points,
            vec![Point { x: 0.0, y: 0.0, z: 0.0, intensity: 0.5 }]
        );
        let two = parse_point_bytes(&encode_points(&[[1.0, 2.0, 3.0, 0.1], [4.0, 5.0, 6.0, 0.2]]), 1.0)
            .unwrap();
        assert_eq!(two.points.len(), 2);
        assert_eq!(two.points[1].x, 4.0);
        assert_eq!(
            parse_point_bytes(&[0; 17], 1.0),
            Err(Error::Truncated { len: 17, record: 16 })
        );
    }

    #[test]
    fn intensities_are_clamped_and_counted() {
        let cloud =
            parse_point_bytes(&encode_points(&[[0.0, 0.0, 0.0, 1.5], [0.0, 0.0, 0.0, -0.1], [0.0, 0.0, 0.0, 1.0]]), 1.0)
                .unwrap();
        let vals: Vec<f32> = cloud.points.iter().map(|p| p.intensity).collect();
        assert_eq!(vals, vec![1.0, 0.0, 1.0]);
        assert_eq!(cloud.clamped, 2);

        let scaled = parse_point_bytes(&encode_points(&[[0.0, 0.0, 0.0, 255.0]]), 1.0 / 255.0).unwrap();
        assert_eq!(scaled.points[0].intensity, 1.0);
        assert_eq!(scaled.clamped, 0);
    }

    #[test]
    fn nan_coordinate_reports_index() {
        let bytes = encode_points(&[[0.0, 0.0, 0.0, 0.0], [f32::NAN, 0.0, 0.0, 0.0]]);
        assert!(matches!(parse_point_bytes(&bytes, 1.0), Err(Error::Record { index: 1, .. })));
    }
}
