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


//! Point configurations and their CSV form.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Distinct points in R^d (d = 2 uses the first two slots).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    dim: usize,
    points: Vec<Vec3>,
}

impl PointConfiguration {
    /// Checks finiteness and pairwise distinctness.
    pub fn new(dim: usize, points: Vec<Vec3>) -> Result<Self> {
        let cfg = Self::unchecked(dim, points)?;
        cfg.check_distinct()?;
        Ok(cfg)
    }

    // finite coordinates only; minimizers use this while iterating
    pub(crate) fn unchecked(dim: usize, mut points: Vec<Vec3>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        for (i, p) in points.iter_mut().enumerate() {
            if p[..dim].iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!("point {i} has a non-finite coordinate")));
            }
            if dim == 2 {
                p[2] = 0.0;
            }
        }
        Ok(Self { dim, points })
    }

    /// From a flat coordinate vector of length n·d.
    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        if dim == 0 || flat.len() % dim != 0 {
            return Err(Error::InvalidParameter("flat coordinate length is not a multiple of d".into()));
        }
        let points = flat
            .chunks(dim)
            .map(|c| {
                let mut p = [0.0; 3];
                p[..dim].copy_from_slice(c);
                p
            })
            .collect();
        Self::new(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub(crate) fn points_mut(&mut self) -> &mut [Vec3] {
        &mut self.points
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p[..self.dim].to_vec()).collect()
    }

    /// Rotation about the origin by `angle` (2D only).
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.dim != 2 {
            return Err(Error::InvalidParameter("rotation by an angle is defined for d = 2".into()));
        }
        let (s, c) = angle.sin_cos();
        let points = self.points.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], 0.0]).collect();
        Ok(Self { dim: 2, points })
    }

    pub(crate) fn check_distinct(&self) -> Result<()> {
        let d = self.dim;
        for i in 0..self.points.len() {
            for j in 0..i {
                if self.points[i][..d] == self.points[j][..d] {
                    return Err(Error::Singularity(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(())
    }

    /// One point per row, comma separated, with an `x,y[,z]` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = if self.dim == 2 { "x,y" } else { "x,y,z" };
        writeln!(out, "{header}")?;
        for p in &self.points {
            let row: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv); the header is optional.
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.iter().all(|f| f.parse::<f64>().is_err()) && points.is_empty() {
                continue;
            }
            let vals = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Validation(format!("line {}: {e}", lineno + 1)))?;
            match dim {
                None => dim = Some(vals.len()),
                Some(d) if d != vals.len() => {
                    return Err(Error::Validation(format!("line {}: expected {d} columns", lineno + 1)))
                }
                _ => {}
            }
            let mut p = [0.0; 3];
            let k = vals.len().min(3);
            p[..k].copy_from_slice(&vals[..k]);
            points.push(p);
        }
        let dim = dim.ok_or_else(|| Error::Validation("no points in configuration file".into()))?;
        Self::new(dim, points).map_err(|e| match e {
            Error::InvalidParameter(m) | Error::Singularity(m) => Error::Validation(m),
            other => other,
        })
    }
}
