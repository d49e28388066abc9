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


//! Point counts in cubes of side ℓ in blown-up coordinates x' = n^{1/d} x,
//! compared with the blown-up equilibrium mass n·μ_0 of the same cube.

use super::config::PointConfiguration;
use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCount {
    pub center: Vec3,
    pub count: usize,
    pub expected: f64,
    /// |count − expected|
    pub deviation: f64,
}

/// Counts points in the cubes K_ℓ(a) for each blown-up centre a.
///
/// A cube must lie in the support of μ_0 (checked on its boundary at the
/// grid resolution) or contain the whole support; anything else is an
/// invalid parameter.
pub fn window_point_counts(
    cfg: &PointConfiguration,
    mu0: &EquilibriumMeasure,
    centers: &[Vec3],
    ell: f64,
) -> Result<Vec<WindowCount>> {
    let d = cfg.dim();
    if mu0.dim != d {
        return Err(Error::InvalidParameter("configuration and μ_0 have different dimensions".into()));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::InvalidParameter(format!("window side must be positive, got {ell}")));
    }
    let n = cfg.len() as f64;
    let blow = n.powf(1.0 / d as f64);
    let (lo, hi) = support_box(mu0);
    let mut out = Vec::with_capacity(centers.len());
    for a in centers {
        // the cube in original coordinates
        let mut clo = [0.0; 3];
        let mut chi = [0.0; 3];
        for k in 0..d {
            clo[k] = (a[k] - 0.5 * ell) / blow;
            chi[k] = (a[k] + 0.5 * ell) / blow;
        }
        let covers = (0..d).all(|k| clo[k] <= lo[k] && chi[k] >= hi[k]);
        if !covers && !boundary_in_support(mu0, clo, chi) {
            return Err(Error::InvalidParameter(format!(
                "window of side {ell} at {:?} is neither inside the support nor covering it",
                &a[..d]
            )));
        }
        let count = cfg
            .points()
            .iter()
            .filter(|p| (0..d).all(|k| p[k] >= clo[k] && p[k] < chi[k]))
            .count();
        let expected = n * cube_mass(mu0, clo, chi);
        out.push(WindowCount { center: *a, count, expected, deviation: (count as f64 - expected).abs() });
    }
    Ok(out)
}

// reflections of a stored node through its mirrored axes
fn images(field: &crate::equilibrium::GridField, idx: usize) -> Vec<Vec3> {
    let x = field.position(idx);
    let c = field.coords(idx);
    let mut all = vec![x];
    for a in 0..field.dim {
        if field.mirror[a] && c[a] > 0 {
            let mut more = all.clone();
            for y in more.iter_mut() {
                y[a] = -y[a];
            }
            all.extend(more);
        }
    }
    all
}

fn support_box(mu0: &EquilibriumMeasure) -> (Vec3, Vec3) {
    let f = &mu0.density;
    let half = 0.5 * f.spacing;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (idx, v) in f.values.iter().enumerate() {
        if *v > 0.0 {
            for y in images(f, idx) {
                for a in 0..f.dim {
                    lo[a] = lo[a].min(y[a] - half);
                    hi[a] = hi[a].max(y[a] + half);
                }
            }
        }
    }
    (lo, hi)
}

// samples the faces of the cube at spacing ≤ h
fn boundary_in_support(mu0: &EquilibriumMeasure, lo: Vec3, hi: Vec3) -> bool {
    let d = mu0.dim;
    let h = mu0.density.spacing;
    let steps: Vec<usize> = (0..d).map(|k| ((hi[k] - lo[k]) / h).ceil().max(1.0) as usize).collect();
    let at = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / steps[k] as f64;
    let mut idx = [0usize; 3];
    loop {
        let on_face = (0..d).any(|k| idx[k] == 0 || idx[k] == steps[k]);
        if on_face {
            let mut x = [0.0; 3];
            for k in 0..d {
                x[k] = at(k, idx[k]);
            }
            if !mu0.in_support(x) {
                return false;
            }
        }
        let mut k = 0;
        loop {
            if k == d {
                return true;
            }
            idx[k] += 1;
            if idx[k] <= steps[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// μ_0 of the box, with each grid cell weighted by its overlap
fn cube_mass(mu0: &EquilibriumMeasure, lo: Vec3, hi: Vec3) -> f64 {
    let f = &mu0.density;
    let h = f.spacing;
    let mut total = 0.0;
    for (idx, v) in f.values.iter().enumerate() {
        if *v <= 0.0 {
            continue;
        }
        for y in images(f, idx) {
            let mut frac = 1.0;
            for k in 0..f.dim {
                let overlap = (hi[k].min(y[k] + 0.5 * h) - lo[k].max(y[k] - 0.5 * h)).max(0.0);
                frac *= overlap;
            }
            total += v * frac;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium_measure, GridSpec};
    use crate::potential::PotentialSpec;

    fn lattice_in_disk(n_side: usize) -> PointConfiguration {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                let x = -0.9 + 1.8 * (i as f64 + 0.5) / n_side as f64;
                let y = -0.9 + 1.8 * (j as f64 + 0.5) / n_side as f64;
                if x * x + y * y < 0.95 {
                    pts.push([x, y, 0.0]);
                }
            }
        }
        PointConfiguration::new(2, pts).unwrap()
    }

    #[test]
    fn counting_and_area_scaling() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let mu0 = solve_equilibrium_measure(&v, &GridSpec::new(1.0 / 32.0)).unwrap();
        let cfg = lattice_in_disk(20);
        let n = cfg.len() as f64;
        let all = window_point_counts(&cfg, &mu0, &[[0.0; 3]], 2.2 * n.sqrt()).unwrap();
        assert_eq!(all[0].count, cfg.len());
        assert!((all[0].expected - n).abs() < 1e-6 * n);
        let small = window_point_counts(&cfg, &mu0, &[[1.0, -0.5, 0.0]], 2.0).unwrap()[0];
        let big = window_point_counts(&cfg, &mu0, &[[1.0, -0.5, 0.0]], 4.0).unwrap()[0];
        // uniform density 1/π in blown-up units
        assert!((small.expected - 4.0 / std::f64::consts::PI).abs() < 1e-9);
        assert!((big.expected - 4.0 * small.expected).abs() < 1e-9);
    }

    #[test]
    fn windows_across_the_edge_are_rejected() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let mu0 = solve_equilibrium_measure(&v, &GridSpec::new(1.0 / 16.0)).unwrap();
        let cfg = lattice_in_disk(10);
        let edge = (cfg.len() as f64).sqrt();
        let r = window_point_counts(&cfg, &mu0, &[[edge, 0.0, 0.0]], 1.0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
        assert!(window_point_counts(&cfg, &mu0, &[[0.0; 3]], -1.0).is_err());
    }
}
