//! Uniform tensor grids in velocity and phase space, and densities sampled
//! on them.
//!
//! Nodes are cell-centered, `v_i = -L + (i + 1/2) h` with `h = 2L/n`, so
//! every axis is symmetric about the origin. Phase-space fields store the
//! velocity block contiguously per spatial node (`index = ix * nv + iv`,
//! both row-major). A spatial resolution of 1 denotes a space-homogeneous
//! field; the single cell carries unit weight.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Uniform symmetric velocity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub d: usize,
    pub n_per_axis: usize,
    pub l_v: f64,
}

impl VelocityGrid {
    pub fn new(d: usize, n_per_axis: usize, l_v: f64) -> Self {
        assert!(d == 2 || d == 3);
        assert!(n_per_axis >= 1 && l_v > 0.0);
        Self { d, n_per_axis, l_v }
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l_v / self.n_per_axis as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l_v + (i as f64 + 0.5) * self.h()
    }

    pub fn total(&self) -> usize {
        self.n_per_axis.pow(self.d as u32)
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn weight(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Decodes a flat index (row-major, first axis slowest).
    pub fn decode(&self, flat: usize, out: &mut [usize; 3]) {
        let n = self.n_per_axis;
        let mut rest = flat;
        for k in (0..self.d).rev() {
            out[k] = rest % n;
            rest /= n;
        }
    }

    pub fn encode(&self, idx: &[usize; 3]) -> usize {
        let n = self.n_per_axis;
        let mut flat = 0;
        for k in 0..self.d {
            flat = flat * n + idx[k];
        }
        flat
    }

    pub fn node(&self, flat: usize) -> [f64; 3] {
        let mut idx = [0usize; 3];
        self.decode(flat, &mut idx);
        let mut v = [0.0; 3];
        for k in 0..self.d {
            v[k] = self.coord(idx[k]);
        }
        v
    }
}

/// Tensor product of a spatial grid and a velocity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub d: usize,
    pub n_x: usize,
    pub l_x: f64,
    pub velocity: VelocityGrid,
}

impl PhaseGrid {
    pub fn new(d: usize, n_x: usize, l_x: f64, velocity: VelocityGrid) -> Result<Self> {
        if velocity.d != d {
            return Err(Error::domain("velocity grid dimension mismatch"));
        }
        if n_x > 1 && !(l_x > 0.0) {
            return Err(Error::domain("spatial half-width must be positive"));
        }
        Ok(Self { d, n_x, l_x, velocity })
    }

    /// Space-homogeneous grid: one spatial cell of unit weight.
    pub fn homogeneous(velocity: VelocityGrid) -> Self {
        Self {
            d: velocity.d,
            n_x: 1,
            l_x: 0.0,
            velocity,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.n_x == 1
    }

    pub fn h_x(&self) -> f64 {
        if self.is_homogeneous() {
            0.0
        } else {
            2.0 * self.l_x / self.n_x as f64
        }
    }

    pub fn x_coord(&self, i: usize) -> f64 {
        if self.is_homogeneous() {
            0.0
        } else {
            -self.l_x + (i as f64 + 0.5) * self.h_x()
        }
    }

    pub fn nx_total(&self) -> usize {
        if self.is_homogeneous() {
            1
        } else {
            self.n_x.pow(self.d as u32)
        }
    }

    pub fn nv_total(&self) -> usize {
        self.velocity.total()
    }

    pub fn total(&self) -> usize {
        self.nx_total() * self.nv_total()
    }

    /// Spatial quadrature weight (1 for the homogeneous single cell).
    pub fn x_weight(&self) -> f64 {
        if self.is_homogeneous() {
            1.0
        } else {
            self.h_x().powi(self.d as i32)
        }
    }

    /// Full phase-space quadrature weight of one node.
    pub fn weight(&self) -> f64 {
        self.x_weight() * self.velocity.weight()
    }

    pub fn x_node(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        if self.is_homogeneous() {
            return out;
        }
        let n = self.n_x;
        let mut rest = flat;
        let mut idx = [0usize; 3];
        for k in (0..self.d).rev() {
            idx[k] = rest % n;
            rest /= n;
        }
        for k in 0..self.d {
            out[k] = self.x_coord(idx[k]);
        }
        out
    }

    /// Iterates `(x, v)` node coordinates in flat storage order.
    pub fn iter_nodes(&self) -> impl Iterator<Item = ([f64; 3], [f64; 3])> + '_ {
        let nv = self.nv_total();
        (0..self.total()).map(move |flat| {
            let ix = flat / nv;
            let iv = flat % nv;
            (self.x_node(ix), self.velocity.node(iv))
        })
    }

    /// Number of phase axes (2d), spatial axes first.
    pub fn n_axes(&self) -> usize {
        2 * self.d
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        if axis < self.d {
            self.n_x
        } else {
            self.velocity.n_per_axis
        }
    }

    pub fn axis_step(&self, axis: usize) -> f64 {
        if axis < self.d {
            self.h_x()
        } else {
            self.velocity.h()
        }
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if axis < self.d {
            self.x_coord(i)
        } else {
            self.velocity.coord(i)
        }
    }
}

/// Which frame a field lives in (lab coordinates or Strichartz-scaled).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Scaled,
}

/// Phase-space density sampled on a [`PhaseGrid`].
#[derive(Debug, Clone)]
pub struct DistributionField {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub frame: Frame,
}

impl DistributionField {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.total()],
            frame: Frame::Scaled,
        }
    }

    pub fn from_fn(grid: &PhaseGrid, f: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let d = grid.d;
        let mut values = Vec::with_capacity(grid.total());
        for (x, v) in grid.iter_nodes() {
            values.push(f(&x[..d], &v[..d]));
        }
        Self {
            grid: grid.clone(),
            values,
            frame: Frame::Scaled,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid
    }

    /// Total mass, `sum f * weight`, via the deterministic reduction.
    pub fn mass(&self) -> f64 {
        crate::reduce::pairwise_sum(&self.values) * self.grid.weight()
    }

    /// Velocity-block view for one spatial node.
    pub fn v_block(&self, ix: usize) -> &[f64] {
        let nv = self.grid.nv_total();
        &self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn v_block_mut(&mut self, ix: usize) -> &mut [f64] {
        let nv = self.grid.nv_total();
        &mut self.values[ix * nv..(ix + 1) * nv]
    }

    /// Fraction of |f| mass sitting in the outermost cell layer of any axis.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let g = &self.grid;
        let nv = g.nv_total();
        let d = g.d;
        let mut boundary = 0.0;
        let mut total = 0.0;
        let mut vidx = [0usize; 3];
        for (flat, &val) in self.values.iter().enumerate() {
            let a = val.abs();
            total += a;
            let ix = flat / nv;
            let iv = flat % nv;
            g.velocity.decode(iv, &mut vidx);
            let mut on_edge = vidx[..d]
                .iter()
                .any(|&i| i == 0 || i + 1 == g.velocity.n_per_axis);
            if !g.is_homogeneous() {
                let mut rest = ix;
                for _ in 0..d {
                    let i = rest % g.n_x;
                    rest /= g.n_x;
                    on_edge |= i == 0 || i + 1 == g.n_x;
                }
            }
            if on_edge {
                boundary += a;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            boundary / total
        }
    }

    /// Writes the raw values as little-endian f64 with a JSON sidecar
    /// describing the grid (`<path>.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&bytes)?;
        let sidecar = serde_json::json!({
            "d": self.grid.d,
            "n_x": self.grid.n_x,
            "l_x": self.grid.l_x,
            "n_per_axis": self.grid.velocity.n_per_axis,
            "l_v": self.grid.velocity.l_v,
            "ordering": "row-major, spatial axes then velocity axes",
            "frame": self.frame,
            "dtype": "f64-le",
        });
        std::fs::write(
            path.with_extension("json"),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let d = sidecar["d"].as_u64().ok_or_else(|| Error::domain("bad sidecar"))? as usize;
        let n_x = sidecar["n_x"].as_u64().unwrap_or(1) as usize;
        let l_x = sidecar["l_x"].as_f64().unwrap_or(0.0);
        let n_v = sidecar["n_per_axis"]
            .as_u64()
            .ok_or_else(|| Error::domain("bad sidecar"))? as usize;
        let l_v = sidecar["l_v"].as_f64().ok_or_else(|| Error::domain("bad sidecar"))?;
        let frame = match sidecar["frame"].as_str() {
            Some("lab") => Frame::Lab,
            _ => Frame::Scaled,
        };
        let grid = PhaseGrid::new(d, n_x, l_x, VelocityGrid::new(d, n_v, l_v))?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != grid.total() * 8 {
            return Err(Error::domain(format!(
                "snapshot has {} bytes, grid needs {}",
                bytes.len(),
                grid.total() * 8
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { grid, values, frame })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_symmetric_about_origin() {
        let g = VelocityGrid::new(3, 8, 4.0);
        assert!((g.coord(0) + g.coord(7)).abs() < 1e-15);
        assert!((g.h() - 1.0).abs() < 1e-15);
        let p = PhaseGrid::new(2, 6, 3.0, VelocityGrid::new(2, 6, 3.0)).unwrap();
        assert!((p.x_coord(0) + p.x_coord(5)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_mass_is_near_one() {
        let g = PhaseGrid::homogeneous(VelocityGrid::new(3, 24, 7.0));
        let f = DistributionField::from_fn(&g, |_x, v| {
            let v2: f64 = v.iter().map(|a| a * a).sum();
            (std::f64::consts::TAU).powf(-1.5) * (-0.5 * v2).exp()
        });
        assert!((f.mass() - 1.0).abs() < 1e-8, "mass {}", f.mass());
    }

    #[test]
    fn save_load_roundtrip() {
        let g = PhaseGrid::homogeneous(VelocityGrid::new(2, 6, 2.0));
        let f = DistributionField::from_fn(&g, |_x, v| v[0] + 2.0 * v[1]);
        let dir = std::env::temp_dir().join("ssbe_grid_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.bin");
        f.save(&path).unwrap();
        let back = DistributionField::load(&path).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid, f.grid);
    }
}
