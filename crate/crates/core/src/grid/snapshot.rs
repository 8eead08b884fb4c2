use std::io::{Read, Write};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

/// Header of the binary snapshot layout.
///
/// Layout, all little-endian: `u32 dim`, `u32 N`, `f64 L`, then `N^d` `f64`
/// samples in row-major order (last axis fastest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub dim: u32,
    pub n_per_axis: u32,
    pub box_half_length: f64,
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n_per_axis() as u32).to_le_bytes())?;
    w.write_all(&g.box_half_length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(SnapshotHeader, ScalarField)> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4);
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4);
    r.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let header = SnapshotHeader {
        dim,
        n_per_axis: n,
        box_half_length: l,
    };
    let grid = Grid::new(dim as usize, n as usize, l)
        .map_err(|e| Error::Format(format!("snapshot header: {e}")))?;
    let mut payload = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after snapshot", rest.len())));
    }
    Ok((header, ScalarField::from_values(grid, values)?))
}
