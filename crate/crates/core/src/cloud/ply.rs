//! ASCII PLY export for offline inspection of segmentations and handles.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::affordance::GraspHandle;
use crate::error::{io_err, Result};
use crate::segmentation::Segmentation;

use super::PointCloud;

pub const EDGE_COLOR: [u8; 3] = [0, 0, 255];
pub const HANDLE_COLOR: [u8; 3] = [255, 255, 0];
pub const UNLABELED_COLOR: [u8; 3] = [128, 128, 128];

const AXIS_COLORS: [[u8; 3]; 3] = [[255, 0, 0], [0, 255, 0], [0, 128, 255]];
const GLYPH_LENGTH: f64 = 0.03;

/// Distinct color per label, walking the hue circle by the golden ratio.
/// Value is capped below 255 so no palette entry equals a reserved color.
fn label_color(label: u32) -> [u8; 3] {
    let hue = (f64::from(label) * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.7, 0.9);
    let c = v * s;
    let x = c * (1.0 - (hue % 2.0 - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

/// Writes the cloud as ASCII PLY. Vertex colors, highest precedence first:
/// handle patch, edge point, segment label, unlabeled (or the cloud's own
/// colors when no segmentation is given). Each handle adds three axis
/// segments (six vertices, three edges) at its position.
pub fn write_ply(
    cloud: &PointCloud,
    segmentation: Option<&Segmentation>,
    handles: &[GraspHandle],
    out: &mut impl Write,
) -> std::io::Result<()> {
    let mut colors: Vec<[u8; 3]> = match (segmentation, cloud.colors()) {
        (Some(seg), _) => seg
            .labels()
            .iter()
            .map(|l| l.map_or(UNLABELED_COLOR, label_color))
            .collect(),
        (None, Some(c)) => c.to_vec(),
        (None, None) => vec![UNLABELED_COLOR; cloud.len()],
    };
    if let Some(seg) = segmentation {
        for &i in seg.edge_points() {
            colors[i] = EDGE_COLOR;
        }
    }
    for h in handles {
        for &i in &h.patch {
            colors[i] = HANDLE_COLOR;
        }
    }

    let n_glyph = handles.len() * 6;
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", cloud.len() + n_glyph)?;
    for p in ["x", "y", "z"] {
        writeln!(out, "property double {p}")?;
    }
    for c in ["red", "green", "blue"] {
        writeln!(out, "property uchar {c}")?;
    }
    if !handles.is_empty() {
        writeln!(out, "element edge {}", handles.len() * 3)?;
        writeln!(out, "property int vertex1")?;
        writeln!(out, "property int vertex2")?;
        for c in ["red", "green", "blue"] {
            writeln!(out, "property uchar {c}")?;
        }
    }
    writeln!(out, "end_header")?;
    for (p, c) in cloud.points().iter().zip(&colors) {
        writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
    }
    for h in handles {
        for (axis, c) in h.axes().iter().zip(AXIS_COLORS) {
            let tip = h.position + axis * GLYPH_LENGTH;
            for q in [h.position, tip] {
                writeln!(out, "{} {} {} {} {} {}", q.x, q.y, q.z, c[0], c[1], c[2])?;
            }
        }
    }
    for (k, _) in handles.iter().enumerate() {
        for (j, c) in AXIS_COLORS.iter().enumerate() {
            let v = cloud.len() + k * 6 + j * 2;
            writeln!(out, "{} {} {} {} {}", v, v + 1, c[0], c[1], c[2])?;
        }
    }
    Ok(())
}

/// [`write_ply`] to a file path.
pub fn export_ply(
    cloud: &PointCloud,
    segmentation: Option<&Segmentation>,
    handles: &[GraspHandle],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_ply(cloud, segmentation, handles, &mut buf).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}
