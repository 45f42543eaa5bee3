//! Run configuration, field files, JSON reports and heatmaps.

mod config;
mod report;

pub use config::{parse_config, read_config, DiagnosticsConfig, EpsConfig, OptimizerConfig, RunConfig};
pub use report::{write_report, Json};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const MAGIC: &[u8; 4] = b"SSF1";

/// SSF1 bytes: magic, `u32` LE node counts and component count, then `f64`
/// LE values component-major, rows bottom to top.
pub fn encode_field(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let (nx, ny, nc) = (g.nodes_x(), g.nodes_y(), field.ncomp());
    let mut out = Vec::with_capacity(16 + 8 * nx * ny * nc);
    out.extend_from_slice(MAGIC);
    for v in [nx, ny, nc] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for c in 0..nc {
        for n in 0..g.node_count() {
            out.extend_from_slice(&field.get(n, c).to_le_bytes());
        }
    }
    out
}

pub fn write_field(field: &Field, path: &Path) -> Result<()> {
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

/// Reads an SSF1 file onto `grid`, whose node counts must match the header.
pub fn read_field(path: &Path, grid: &Grid) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, path, grid)
}

pub(crate) fn decode_field(bytes: &[u8], path: &Path, grid: &Grid) -> Result<Field> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 16 {
        return Err(Error::TruncatedFile(path.to_path_buf()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (nx, ny, nc) = (word(0), word(1), word(2));
    let count = nx.checked_mul(ny).and_then(|v| v.checked_mul(nc));
    let Some(count) = count else {
        return Err(Error::TruncatedFile(path.to_path_buf()));
    };
    if bytes.len() < 16 + 8 * count {
        return Err(Error::TruncatedFile(path.to_path_buf()));
    }
    if nx != grid.nodes_x() || ny != grid.nodes_y() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            got: nx * ny,
        });
    }
    let nodes = nx * ny;
    let mut values = vec![0.0; count];
    for c in 0..nc {
        for n in 0..nodes {
            let at = 16 + 8 * (c * nodes + n);
            values[n * nc + c] = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        }
    }
    Field::from_values(*grid, nc, values)
}

/// Binary PGM (P5, maxval 255) of one component, min–max normalized; the top
/// image row is the largest y. Constant fields map to 128.
pub fn encode_heatmap(field: &Field, comp: usize) -> Result<Vec<u8>> {
    if comp >= field.ncomp() {
        return Err(Error::BadParams(format!(
            "component {comp} out of range for {} components",
            field.ncomp()
        )));
    }
    let g = field.grid();
    let (w, h) = (g.nodes_x(), g.nodes_y());
    let vals: Vec<f64> = (0..g.node_count()).map(|n| field.get(n, comp)).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5 {w} {h} 255\n").into_bytes();
    for j in (0..h).rev() {
        for i in 0..w {
            let v = vals[g.node_index(i, j)];
            let px = if hi > lo {
                (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
            } else {
                128
            };
            out.push(px);
        }
    }
    Ok(out)
}

pub fn render_heatmap(field: &Field, comp: usize, path: &Path) -> Result<()> {
    let bytes = encode_heatmap(field, comp)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads only the grid shape of an SSF1 file: `(nodes_x, nodes_y, ncomp)`.
pub fn field_header(path: &Path) -> Result<(usize, usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 16 {
        return Err(Error::TruncatedFile(path.to_path_buf()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    Ok((word(0), word(1), word(2)))
}
