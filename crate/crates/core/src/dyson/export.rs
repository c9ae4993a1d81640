//! CSV records and raw matrix blobs for map solutions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DysonMapSolution, MapParams};
use crate::error::{Error, Result};
use crate::fock::{OperatorMatrix, C64};

/// `b"DYSN"` read as a little-endian `u32`.
pub const BLOB_MAGIC: u32 = u32::from_le_bytes(*b"DYSN");

/// One row every `stride` grid nodes: `t`, the family parameters, `‖η‖_F`, `cond₁(η)`,
/// and the caller's residual column if given.
pub fn write_solution_csv(
    map: &DysonMapSolution,
    residuals: Option<&[f64]>,
    stride: usize,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t"];
    match map.params() {
        MapParams::Displacement(_) => header.extend(["gamma_re", "gamma_im"]),
        MapParams::Su11(_) => header.extend(["epsilon", "mu_re", "mu_im", "phi", "chi", "varphi"]),
        MapParams::Matrix => {}
    }
    header.extend(["eta_norm", "eta_cond"]);
    if residuals.is_some() {
        header.push("residual");
    }
    w.write_record(&header)?;
    let n = map.grid().len();
    // the last node is always written
    let rows = (0..n).step_by(stride.max(1)).chain((n > 0 && (n - 1) % stride.max(1) != 0).then_some(n - 1));
    for i in rows {
        let mut row = vec![map.grid().t(i)];
        match map.params() {
            MapParams::Displacement(g) => row.extend([g[i].re, g[i].im]),
            MapParams::Su11(p) => {
                let p = &p[i];
                row.extend([p.epsilon, p.mu.re, p.mu.im, p.phi, p.chi, p.varphi]);
            }
            MapParams::Matrix => {}
        }
        let eta = map.eta(i)?;
        row.extend([eta.norm_fro(), eta.cond_one()?]);
        if let Some(r) = residuals {
            row.push(r[i]);
        }
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Header `(magic: u32, dim: u32, count: u64)`, then row-major `(re, im)`
/// pairs, all little-endian.
pub fn write_blob(mats: &[OperatorMatrix], path: &Path) -> Result<()> {
    let dim = mats.first().map_or(0, |m| m.dim());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&BLOB_MAGIC.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(mats.len() as u64).to_le_bytes())?;
    for m in mats {
        if m.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, got: m.dim() });
        }
        for z in m.entries().iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_blob(path: &Path) -> Result<Vec<OperatorMatrix>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    let magic = u32::from_le_bytes(head[0..4].try_into().unwrap());
    if magic != BLOB_MAGIC {
        return Err(Error::Io(format!("bad magic {magic:#010x}")));
    }
    let dim = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; dim * dim * 16];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let vals: Vec<C64> = buf
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        out.push(OperatorMatrix::from_fn(dim, |i, j| vals[i * dim + j]));
    }
    Ok(out)
}
