//! File formats: VF2D fields (JSON header plus raw little-endian `f64` data) and JSON documents.
//!
//! A VF2D header `name.json` is paired with `name.bin`, holding `(nx+1)(ny+1)·components`
//! values, row-major and component-interleaved. Singular nodes are stored as NaN.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CircleValuedField, GridSpec, MaskShape, VectorField2D};
use crate::scalar::Real;

pub const MAGIC: &str = "VF2D";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vf2dHeader {
    pub magic: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub mask: MaskShape,
    pub components: usize,
}

impl Vf2dHeader {
    fn for_grid<T: Real>(g: &GridSpec<T>, components: usize) -> Self {
        Vf2dHeader {
            magic: MAGIC.into(),
            version: VERSION,
            nx: g.nx,
            ny: g.ny,
            x0: g.x0.as_f64(),
            y0: g.y0.as_f64(),
            h: g.h.as_f64(),
            mask: g.shape,
            components,
        }
    }

    fn grid<T: Real>(&self) -> Result<GridSpec<T>> {
        if self.magic != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", self.magic)));
        }
        if self.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        let g = GridSpec::new(T::lit(self.x0), T::lit(self.y0), T::lit(self.h), self.nx, self.ny, self.mask)
            .map_err(|e| Error::Format(format!("invalid grid in header: {e}")))?;
        g.validate_mask().map_err(|e| Error::Format(format!("invalid mask: {e}")))?;
        Ok(g)
    }
}

/// Path of the raw data file paired with a header.
pub fn data_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

fn write_raw(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_raw(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn read_header(path: &Path, components: usize) -> Result<Vf2dHeader> {
    let header: Vf2dHeader = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if header.components != components {
        return Err(Error::Format(format!(
            "{} has {} components, expected {components}",
            path.display(),
            header.components
        )));
    }
    Ok(header)
}

pub fn write_vector_field<T: Real>(path: &Path, v: &VectorField2D<T>) -> Result<()> {
    write_json(path, &Vf2dHeader::for_grid(&v.grid, 2))?;
    let vals = (0..v.grid.node_count()).flat_map(|k| {
        if v.singular[k] {
            [f64::NAN, f64::NAN]
        } else {
            [v.vx[k].as_f64(), v.vy[k].as_f64()]
        }
    });
    write_raw(&data_path(path), vals)
}

pub fn read_vector_field<T: Real>(path: &Path) -> Result<VectorField2D<T>> {
    let header = read_header(path, 2)?;
    let grid = header.grid::<T>()?;
    let raw = read_raw(&data_path(path), grid.node_count() * 2)?;
    let mut v = VectorField2D::zeros(&grid);
    for k in 0..grid.node_count() {
        let (x, y) = (raw[2 * k], raw[2 * k + 1]);
        if x.is_nan() || y.is_nan() {
            v.set_singular(k);
        } else if x.is_infinite() || y.is_infinite() {
            return Err(Error::Format(format!("infinite value at node {k}")));
        } else {
            v.vx[k] = T::lit(x);
            v.vy[k] = T::lit(y);
        }
    }
    if !(0..grid.node_count()).any(|k| grid.is_masked(k) && v.is_regular(k)) {
        return Err(Error::Format(format!("{}: no regular node inside the mask", path.display())));
    }
    Ok(v)
}

pub fn write_circle_field<T: Real>(path: &Path, u: &CircleValuedField<T>) -> Result<()> {
    write_json(path, &Vf2dHeader::for_grid(&u.grid, 1))?;
    write_raw(&data_path(path), u.theta.iter().map(|t| t.as_f64()))
}

pub fn read_circle_field<T: Real>(path: &Path) -> Result<CircleValuedField<T>> {
    let header = read_header(path, 1)?;
    let grid = header.grid::<T>()?;
    let raw = read_raw(&data_path(path), grid.node_count())?;
    if let Some(k) = (0..raw.len()).find(|&k| grid.is_masked(k) && !raw[k].is_finite()) {
        return Err(Error::Format(format!("non-finite phase at node {k}")));
    }
    CircleValuedField::from_values(&grid, raw.into_iter().map(T::lit).collect())
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
