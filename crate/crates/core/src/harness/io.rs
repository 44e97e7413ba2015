//! Snapshot binaries and CSV output.
//!
//! Snapshot layout: the magic bytes `CHO1`, little-endian `u32` values
//! `nx`, `ny`, `count`, then `count` frames of `nx·ny` little-endian `f64`
//! in row-major order (index `iy·nx + ix`).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::control::HistoryEntry;
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};
use crate::state::Diagnostics;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CHO1";

pub fn encode_snapshots(frames: &[Field]) -> Result<Vec<u8>> {
    let grid = frames
        .first()
        .map(|f| *f.grid())
        .ok_or_else(|| Error::Snapshot("no frames to write".into()))?;
    if frames.iter().any(|f| !f.grid().same_shape(&grid)) {
        return Err(Error::ShapeMismatch("snapshot frames live on different grids".into()));
    }
    let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Snapshot(format!("{what} = {v} exceeds u32")));
    let mut out = Vec::with_capacity(16 + 8 * grid.len() * frames.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&to_u32(grid.nx(), "nx")?.to_le_bytes());
    out.extend_from_slice(&to_u32(grid.ny(), "ny")?.to_le_bytes());
    out.extend_from_slice(&to_u32(frames.len(), "count")?.to_le_bytes());
    for f in frames {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes frames; the physical lengths are not stored, so the returned
/// grid uses the unit square.
pub fn decode_snapshots(bytes: &[u8]) -> Result<(Grid, Vec<Vec<f64>>)> {
    if bytes.len() < 16 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("missing CHO1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice")) as usize;
    let (nx, ny, count) = (word(4), word(8), word(12));
    let cells = nx
        .checked_mul(ny)
        .ok_or_else(|| Error::Snapshot("grid size overflows".into()))?;
    let expected = cells
        .checked_mul(count)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| Error::Snapshot("payload size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Snapshot(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let grid = Grid::new(nx, ny, 1.0, 1.0).map_err(|e| Error::Snapshot(e.to_string()))?;
    let frames = bytes[16..]
        .chunks_exact(8 * cells)
        .map(|chunk| {
            chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte slice")))
                .collect()
        })
        .collect();
    Ok((grid, frames))
}

pub fn write_snapshots(path: &Path, frames: &[Field]) -> Result<()> {
    fs::write(path, encode_snapshots(frames)?)?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(Grid, Vec<Vec<f64>>)> {
    decode_snapshots(&fs::read(path)?)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn diagnostics_csv(diagnostics: &[Diagnostics]) -> String {
    let mut s = String::from("t,mean,energy,min_phi,max_phi,grad_mu_norm\n");
    for d in diagnostics {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(d.t),
            fmt_f64(d.mean),
            fmt_f64(d.energy),
            fmt_f64(d.min_phi),
            fmt_f64(d.max_phi),
            fmt_f64(d.grad_mu_norm)
        );
    }
    s
}

pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut s = String::from("iter,J,step,stationarity,feasibility_linf,feasibility_h1\n");
    for h in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            h.iter,
            fmt_f64(h.j),
            fmt_f64(h.step),
            fmt_f64(h.stationarity),
            fmt_f64(h.feasibility_linf),
            fmt_f64(h.feasibility_h1)
        );
    }
    s
}

pub fn write_diagnostics_csv(path: &Path, diagnostics: &[Diagnostics]) -> Result<()> {
    write_text(path, &diagnostics_csv(diagnostics))
}

pub fn write_history_csv(path: &Path, history: &[HistoryEntry]) -> Result<()> {
    write_text(path, &history_csv(history))
}

/// Generic CSV with a header row; cells are written verbatim.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_and_layout() {
        let g = Grid::new(3, 2, 1.0, 1.0).unwrap();
        let a = Field::from_fn(g, |x, y| x + 10.0 * y);
        let b = a.scale(-2.0);
        let bytes = encode_snapshots(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(&bytes[..4], b"CHO1");
        assert_eq!(&bytes[4..16], &[3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 2 * 6 * 8);
        assert_eq!(f64::from_le_bytes(bytes[16 + 8..24 + 8].try_into().unwrap()), a.values()[1]);
        let (grid, frames) = decode_snapshots(&bytes).unwrap();
        assert_eq!((grid.nx(), grid.ny()), (3, 2));
        assert_eq!(frames[0], a.values());
        assert_eq!(frames[1], b.values());
    }

    #[test]
    fn corrupt_snapshots_are_rejected() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let bytes = encode_snapshots(&[Field::zeros(g)]).unwrap();
        assert!(decode_snapshots(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_snapshots(&bad).is_err());
    }

    #[test]
    fn csv_uses_lf_and_round_trip_floats() {
        let d = Diagnostics {
            t: 0.1,
            mean: 1e-20,
            energy: 2.0,
            min_phi: -0.5,
            max_phi: 0.5,
            grad_mu_norm: 0.0,
        };
        let s = diagnostics_csv(&[d]);
        assert!(!s.contains('\r'));
        let row = s.lines().nth(1).unwrap();
        let parsed: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1e-20, 2.0, -0.5, 0.5, 0.0]);
    }
}
