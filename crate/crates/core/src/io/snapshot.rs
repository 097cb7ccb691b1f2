//! Binary snapshot format, little-endian throughout:
//!
//! ```text
//! "BQCH" | version u32 | nx1 u32 | nx2 u32 | time f64 | parity(w) u8 | parity(θ) u8
//! | w: nx1·nx2 f64 row-major | θ: nx1·nx2 f64 row-major | c f64
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::solver::State;
use crate::spectral::{Grid, Parity, ScalarField, SpectralError};

const MAGIC: &[u8; 4] = b"BQCH";
const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 4 + 4 + 8 + 1 + 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a snapshot (bad magic bytes)")]
    Magic,
    #[error("unsupported snapshot version {0}, expected {VERSION}")]
    Version(u32),
    #[error("snapshot truncated: {found} bytes, expected {expected}")]
    Truncated { found: usize, expected: usize },
    #[error("invalid snapshot: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub fn snapshot_to_bytes(state: &State) -> Vec<u8> {
    let g = state.grid();
    let n = g.nx1() * g.nx2();
    let mut out = Vec::with_capacity(HEADER + 16 * n + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx1() as u32).to_le_bytes());
    out.extend_from_slice(&(g.nx2() as u32).to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.push(state.w.parity().tag());
    out.push(state.theta.parity().tag());
    for f in [&state.w, &state.theta] {
        for v in f.values().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&state.mean_coeff.to_le_bytes());
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn snapshot_from_bytes(b: &[u8]) -> Result<State, SnapshotError> {
    if b.len() < 4 || &b[..4] != MAGIC {
        return Err(SnapshotError::Magic);
    }
    if b.len() < HEADER {
        return Err(SnapshotError::Truncated {
            found: b.len(),
            expected: HEADER,
        });
    }
    let version = u32_at(b, 4);
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let (nx1, nx2) = (u32_at(b, 8) as usize, u32_at(b, 12) as usize);
    let t = f64_at(b, 16);
    let pw = Parity::from_tag(b[24]).ok_or_else(|| SnapshotError::Invalid("parity tag".into()))?;
    let pt = Parity::from_tag(b[25]).ok_or_else(|| SnapshotError::Invalid("parity tag".into()))?;
    let n = nx1
        .checked_mul(nx2)
        .ok_or_else(|| SnapshotError::Invalid("grid size overflow".into()))?;
    let expected = HEADER + 16 * n + 8;
    if b.len() != expected {
        return Err(SnapshotError::Truncated {
            found: b.len(),
            expected,
        });
    }
    let grid = Grid::new(nx1, nx2)?;
    let read = |start: usize, parity| -> Result<ScalarField, SnapshotError> {
        let vals: Vec<f64> = (0..n).map(|i| f64_at(b, start + 8 * i)).collect();
        let arr = Array2::from_shape_vec((nx1, nx2), vals)
            .map_err(|e| SnapshotError::Invalid(e.to_string()))?;
        Ok(ScalarField::from_values(&grid, parity, arr)?)
    };
    let w = read(HEADER, pw)?;
    let theta = read(HEADER + 8 * n, pt)?;
    let mean_coeff = f64_at(b, HEADER + 16 * n);
    State::new(w, theta, mean_coeff, t).map_err(|e| SnapshotError::Invalid(e.to_string()))
}

pub fn write_snapshot(path: &Path, state: &State) -> Result<(), SnapshotError> {
    fs::write(path, snapshot_to_bytes(state))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<State, SnapshotError> {
    snapshot_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> State {
        let g = Grid::new(8, 10).unwrap();
        let w = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| x1.sin() * x2.cos());
        let th = ScalarField::from_fn(&g, Parity::Even, |x1, x2| x1 * x1 + x2);
        State::new(w, th, 0.25, 1.5).unwrap()
    }

    #[test]
    fn byte_exact_round_trip() {
        let s = state();
        let b = snapshot_to_bytes(&s);
        let back = snapshot_from_bytes(&b).unwrap();
        assert_eq!(snapshot_to_bytes(&back), b);
        assert_eq!(back.w.values(), s.w.values());
        assert_eq!(back.t, 1.5);
        assert_eq!(&b[..4], b"BQCH");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
    }

    #[test]
    fn rejects_damage() {
        let b = snapshot_to_bytes(&state());
        assert!(matches!(
            snapshot_from_bytes(&b[..b.len() - 3]),
            Err(SnapshotError::Truncated { .. })
        ));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(snapshot_from_bytes(&bad), Err(SnapshotError::Magic)));
        let mut v2 = b.clone();
        v2[4] = 2;
        assert!(matches!(snapshot_from_bytes(&v2), Err(SnapshotError::Version(2))));
    }
}
