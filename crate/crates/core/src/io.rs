//! Map dumps: a raw little-endian `f64` file plus a JSON sidecar.
//!
//! Fields are written one after another in row-major `(nx, nz)` order.
//! Complex fields are stored as interleaved `(re, im)` pairs.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, ObservableMaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub nx: usize,
    pub nz: usize,
    pub dx_um: f64,
    pub dz_um: f64,
    pub byte_order: String,
    pub fields: Vec<FieldEntry>,
    pub time_ms: f64,
    pub seed: u64,
}

const MAP_FIELDS: [(&str, FieldKind); 5] = [
    ("density", FieldKind::Real),
    ("fz", FieldKind::Real),
    ("f_perp", FieldKind::Complex),
    ("n_xz", FieldKind::Real),
    ("n_yz", FieldKind::Real),
];

/// Sidecar path for a dump: `foo.bin` -> `foo.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

/// Writes `maps` to `path` and its sidecar. Returns the sidecar path.
pub fn write_maps(path: &Path, maps: &ObservableMaps, time_ms: f64, seed: u64) -> Result<PathBuf> {
    let g = maps.grid;
    let mut bytes = Vec::with_capacity(g.len() * 6 * 8);
    let mut put = |v: f64| bytes.extend_from_slice(&v.to_le_bytes());
    for v in maps.density.iter().chain(maps.fz.iter()) {
        put(*v);
    }
    for v in maps.f_perp.iter() {
        put(v.re);
        put(v.im);
    }
    for v in maps.n_xz.iter().chain(maps.n_yz.iter()) {
        put(*v);
    }
    fs::write(path, &bytes)?;
    let header = DumpHeader {
        nx: g.nx,
        nz: g.nz,
        dx_um: g.dx,
        dz_um: g.dz,
        byte_order: "little".into(),
        fields: MAP_FIELDS
            .iter()
            .map(|(n, k)| FieldEntry {
                name: (*n).into(),
                kind: *k,
            })
            .collect(),
        time_ms,
        seed,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&header)?)?;
    Ok(side)
}

/// Reads a dump written by [`write_maps`].
pub fn read_maps(path: &Path) -> Result<(ObservableMaps, DumpHeader)> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let grid = Grid2D::new(header.nx, header.nz, header.dx_um, header.dz_um)?;
    let bytes = fs::read(path)?;
    let n = grid.len();
    let words = header
        .fields
        .iter()
        .map(|f| match f.kind {
            FieldKind::Real => n,
            FieldKind::Complex => 2 * n,
        })
        .sum::<usize>();
    if bytes.len() != words * 8 {
        return Err(Error::GridMismatch(format!(
            "{} holds {} bytes, header implies {}",
            path.display(),
            bytes.len(),
            words * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect();
    let mut offset = 0;
    let mut real = std::collections::HashMap::new();
    let mut complex = std::collections::HashMap::new();
    for f in &header.fields {
        match f.kind {
            FieldKind::Real => {
                let a = Array2::from_shape_vec(grid.shape(), values[offset..offset + n].to_vec())
                    .expect("length checked");
                real.insert(f.name.clone(), a);
                offset += n;
            }
            FieldKind::Complex => {
                let v: Vec<Complex64> = values[offset..offset + 2 * n]
                    .chunks_exact(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                complex.insert(f.name.clone(), Array2::from_shape_vec(grid.shape(), v).expect("length checked"));
                offset += 2 * n;
            }
        }
    }
    let mut take_real = |name: &str| {
        real.remove(name)
            .ok_or_else(|| Error::GridMismatch(format!("dump has no real field `{name}`")))
    };
    let density = take_real("density")?;
    let fz = take_real("fz")?;
    let n_xz = take_real("n_xz")?;
    let n_yz = take_real("n_yz")?;
    let f_perp = complex
        .remove("f_perp")
        .ok_or_else(|| Error::GridMismatch("dump has no complex field `f_perp`".into()))?;
    Ok((
        ObservableMaps {
            grid,
            density,
            fz,
            f_perp,
            n_xz,
            n_yz,
        },
        header,
    ))
}
