// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Scalar fields on regular grids.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Values at the nodes origin + spacing·(i, j, k).
///
/// An axis flagged in `mirror` has its origin on the plane x_axis = 0 and the
/// field is extended to negative coordinates by reflection; only the
/// non-negative half is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub dim: usize,
    pub origin: Vec3,
    pub spacing: f64,
    /// nodes per axis (1 on unused axes)
    pub shape: [usize; 3],
    pub mirror: [bool; 3],
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(dim: usize, origin: Vec3, spacing: f64, shape: [usize; 3], mirror: [bool; 3]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        if shape[..dim].iter().any(|&n| n < 2) || (dim == 2 && shape[2] != 1) {
            return Err(Error::InvalidParameter(format!("bad grid shape {shape:?}")));
        }
        for k in 0..dim {
            if mirror[k] && origin[k] != 0.0 {
                return Err(Error::InvalidParameter("mirrored axes must start at 0".into()));
            }
        }
        Ok(Self { dim, origin, spacing, shape, mirror, values: vec![0.0; shape[0] * shape[1] * shape[2]] })
    }

    /// Same geometry, values from `f(node position)`.
    pub fn map_nodes(&self, f: impl Fn(Vec3) -> f64) -> Self {
        let mut out = self.clone();
        for idx in 0..self.len() {
            out.values[idx] = f(self.position(idx));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.shape[0] * (j + self.shape[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.shape[0];
        let j = (idx / self.shape[0]) % self.shape[1];
        let k = idx / (self.shape[0] * self.shape[1]);
        [i, j, k]
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + self.spacing * c[a] as f64;
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Number of copies of a stored node in the reflected full field.
    pub fn multiplicity(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        let mut m = 1.0;
        for a in 0..self.dim {
            if self.mirror[a] && c[a] > 0 {
                m *= 2.0;
            }
        }
        m
    }

    /// Σ value·h^d over the full (reflected) field.
    pub fn integral(&self) -> f64 {
        let s: f64 = self.values.iter().enumerate().map(|(i, v)| v * self.multiplicity(i)).sum();
        s * self.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Nearest stored node to x (after reflection), if x lies in the grid.
    pub fn nearest(&self, x: Vec3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..self.dim {
            let xa = if self.mirror[a] { x[a].abs() } else { x[a] };
            let t = ((xa - self.origin[a]) / self.spacing).round();
            if t < 0.0 || t > (self.shape[a] - 1) as f64 {
                return None;
            }
            c[a] = t as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: Vec3) -> Option<f64> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            let xa = if self.mirror[a] { x[a].abs() } else { x[a] };
            let t = (xa - self.origin[a]) / self.spacing;
            let top = (self.shape[a] - 1) as f64;
            if t < -1e-12 || t > top + 1e-12 {
                return None;
            }
            let t = t.clamp(0.0, top);
            let b = (t.floor() as usize).min(self.shape[a] - 2);
            base[a] = b;
            frac[a] = t - b as f64;
        }
        let corners = 1usize << self.dim;
        let mut s = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..self.dim {
                let up = (c >> a) & 1 == 1;
                idx[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                s += w * self.values[self.index(idx[0], idx[1], idx[2])];
            }
        }
        Some(s)
    }

    /// CSV with a one-line JSON header describing the grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "dim": self.dim,
            "origin": &self.origin[..self.dim],
            "spacing": self.spacing,
            "shape": &self.shape[..self.dim],
            "mirror": &self.mirror[..self.dim],
        });
        writeln!(out, "# {header}")?;
        writeln!(out, "{}", if self.dim == 2 { "x,y,value" } else { "x,y,z,value" })?;
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.position(idx);
            if self.dim == 2 {
                writeln!(out, "{},{},{}", x[0], x[1], v)?;
            } else {
                writeln!(out, "{},{},{},{}", x[0], x[1], x[2], v)?;
            }
        }
        Ok(())
    }

    /// Inverse of [`GridField::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("grid csv: {m}"));
        let mut lines = text.lines();
        let head = lines.next().and_then(|l| l.strip_prefix("# ")).ok_or_else(|| bad("missing JSON header"))?;
        let h: serde_json::Value = serde_json::from_str(head).map_err(|e| bad(&e.to_string()))?;
        let dim = h["dim"].as_u64().ok_or_else(|| bad("dim"))? as usize;
        let mut origin = [0.0; 3];
        let mut shape = [1usize; 3];
        let mut mirror = [false; 3];
        for a in 0..dim {
            origin[a] = h["origin"][a].as_f64().ok_or_else(|| bad("origin"))?;
            shape[a] = h["shape"][a].as_u64().ok_or_else(|| bad("shape"))? as usize;
            mirror[a] = h["mirror"][a].as_bool().unwrap_or(false);
        }
        let spacing = h["spacing"].as_f64().ok_or_else(|| bad("spacing"))?;
        let mut g = Self::new(dim, origin, spacing, shape, mirror)?;
        lines.next();
        let mut n = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            if n >= g.values.len() {
                return Err(bad("too many rows"));
            }
            let v = line.rsplit(',').next().and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| bad(line))?;
            g.values[n] = v;
            n += 1;
        }
        if n != g.values.len() {
            return Err(bad("row count does not match shape"));
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_for_affine_fields() {
        let g = GridField::new(2, [-1.0, -1.0, 0.0], 0.25, [9, 9, 1], [false; 3]).unwrap();
        let f = g.map_nodes(|x| 2.0 * x[0] - x[1] + 0.5);
        let v = f.interpolate([0.13, -0.41, 0.0]).unwrap();
        assert!((v - (0.26 + 0.41 + 0.5)).abs() < 1e-14);
        assert!(f.interpolate([1.2, 0.0, 0.0]).is_none());
    }

    #[test]
    fn mirrored_integral_counts_reflections() {
        // constant 1 on [0,1]² stored, reflected to [−1,1]²
        let mut g = GridField::new(2, [0.0; 3], 0.5, [3, 3, 1], [true, true, false]).unwrap();
        g.values.iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(g.integral(), 25.0 * 0.25);
        let full = GridField::new(2, [-1.0, -1.0, 0.0], 0.5, [5, 5, 1], [false; 3]).unwrap();
        assert_eq!(full.len(), 25);
        assert_eq!(g.nearest([-0.9, 0.4, 0.0]), Some(g.index(2, 1, 0)));
    }

    #[test]
    fn csv_round_trip() {
        let g = GridField::new(3, [0.0, -0.5, 0.0], 0.5, [2, 3, 2], [true, false, true]).unwrap().map_nodes(|x| x[0] + 10.0 * x[1] + 100.0 * x[2]);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
