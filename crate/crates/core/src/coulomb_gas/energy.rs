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


//! The discrete energy −Σ_{i≠j} log|x_i − x_j| + n Σ V(x_i) (d = 2), with
//! 1/|x| as the pair kernel in d = 3, and its gradient. Pair sums run over
//! ordered pairs, so every unordered pair is counted twice.

use super::config::PointConfiguration;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::potential::PotentialSpec;
use serde::{Deserialize, Serialize};

/// One-body confinement term.
pub trait Confinement {
    fn dim(&self) -> usize;
    fn value(&self, x: Vec3) -> f64;
    fn gradient(&self, x: Vec3) -> Vec3;
}

impl Confinement for PotentialSpec {
    fn dim(&self) -> usize {
        PotentialSpec::dim(self)
    }
    fn value(&self, x: Vec3) -> f64 {
        PotentialSpec::value(self, x)
    }
    fn gradient(&self, x: Vec3) -> Vec3 {
        PotentialSpec::gradient(self, x)
    }
}

/// Symmetric positive-definite 2×2 form Q(x) = xᵀ M x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    matrix: [[f64; 2]; 2],
}

impl QuadraticForm {
    pub fn new(matrix: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("quadratic form has non-finite entries".into()));
        }
        if (b - c).abs() > 1e-14 * (1.0 + b.abs().max(c.abs())) {
            return Err(Error::InvalidParameter("quadratic form must be symmetric".into()));
        }
        if !(a > 0.0 && a * d - b * c > 0.0) {
            return Err(Error::InvalidParameter("quadratic form must be positive definite".into()));
        }
        Ok(Self { matrix: [[a, b], [b, d]] })
    }

    pub fn identity() -> Self {
        Self { matrix: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn diagonal(a: f64, d: f64) -> Result<Self> {
        Self::new([[a, 0.0], [0.0, d]])
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.matrix
    }
}

impl Confinement for QuadraticForm {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: Vec3) -> f64 {
        let m = &self.matrix;
        m[0][0] * x[0] * x[0] + 2.0 * m[0][1] * x[0] * x[1] + m[1][1] * x[1] * x[1]
    }
    fn gradient(&self, x: Vec3) -> Vec3 {
        let m = &self.matrix;
        [2.0 * (m[0][0] * x[0] + m[0][1] * x[1]), 2.0 * (m[0][1] * x[0] + m[1][1] * x[1]), 0.0]
    }
}

/// Pair kernel: −log r in 2D, 1/r in 3D, as a function of r².
#[inline]
pub(crate) fn kernel(dim: usize, r2: f64) -> f64 {
    if dim == 2 {
        -0.5 * r2.ln()
    } else {
        1.0 / r2.sqrt()
    }
}

// −g'(r)/r, so that ∇_x g(x) = −x·kernel_slope(r²)
#[inline]
pub(crate) fn kernel_slope(dim: usize, r2: f64) -> f64 {
    if dim == 2 {
        1.0 / r2
    } else {
        1.0 / (r2 * r2.sqrt())
    }
}

fn check_dims(cfg: &PointConfiguration, v: &dyn Confinement) -> Result<()> {
    if cfg.dim() != v.dim() {
        return Err(Error::InvalidParameter(format!(
            "configuration is {}D but the potential is {}D",
            cfg.dim(),
            v.dim()
        )));
    }
    Ok(())
}

/// H_n of the configuration.
pub fn hamiltonian(cfg: &PointConfiguration, v: &dyn Confinement) -> Result<f64> {
    check_dims(cfg, v)?;
    let e = energy_flat(cfg.dim(), &cfg.flat(), v);
    if e.is_finite() {
        Ok(e)
    } else {
        cfg.check_distinct()?;
        Err(Error::Singularity("energy is not finite".into()))
    }
}

/// ∂H_n/∂x_i for every point.
pub fn gradient(cfg: &PointConfiguration, v: &dyn Confinement) -> Result<Vec<Vec3>> {
    check_dims(cfg, v)?;
    cfg.check_distinct()?;
    let d = cfg.dim();
    let g = gradient_flat(d, &cfg.flat(), v);
    Ok(g.chunks(d)
        .map(|c| {
            let mut p = [0.0; 3];
            p[..d].copy_from_slice(c);
            p
        })
        .collect())
}

fn point(dim: usize, x: &[f64], i: usize) -> Vec3 {
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(&x[i * dim..(i + 1) * dim]);
    p
}

/// Energy of a flat coordinate vector; +∞ if two points coincide.
pub(crate) fn energy_flat(dim: usize, x: &[f64], v: &dyn Confinement) -> f64 {
    let n = x.len() / dim;
    let mut pairs = 0.0;
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let mut row = 0.0;
        for j in 0..i {
            let xj = &x[j * dim..(j + 1) * dim];
            let r2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 == 0.0 {
                return f64::INFINITY;
            }
            row += kernel(dim, r2);
        }
        pairs += row;
    }
    let field: f64 = (0..n).map(|i| v.value(point(dim, x, i))).sum();
    2.0 * pairs + n as f64 * field
}

pub(crate) fn gradient_flat(dim: usize, x: &[f64], v: &dyn Confinement) -> Vec<f64> {
    let n = x.len() / dim;
    let mut g = vec![0.0; x.len()];
    for i in 0..n {
        for j in 0..i {
            let mut d = [0.0; 3];
            let mut r2 = 0.0;
            for a in 0..dim {
                d[a] = x[i * dim + a] - x[j * dim + a];
                r2 += d[a] * d[a];
            }
            let s = 2.0 * kernel_slope(dim, r2);
            for a in 0..dim {
                g[i * dim + a] -= s * d[a];
                g[j * dim + a] += s * d[a];
            }
        }
        let gv = v.gradient(point(dim, x, i));
        for a in 0..dim {
            g[i * dim + a] += n as f64 * gv[a];
        }
    }
    g
}

/// H(x + α p) − H(x), accumulated pair by pair so that it stays accurate
/// when the change is far below the rounding level of H itself.
pub(crate) fn energy_change(dim: usize, x: &[f64], p: &[f64], alpha: f64, v: &dyn Confinement) -> f64 {
    let n = x.len() / dim;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..i {
            let mut r2 = 0.0;
            let mut cross = 0.0;
            let mut s2 = 0.0;
            for a in 0..dim {
                let d = x[i * dim + a] - x[j * dim + a];
                let s = alpha * (p[i * dim + a] - p[j * dim + a]);
                r2 += d * d;
                cross += d * s;
                s2 += s * s;
            }
            // |d + s|² − |d|²
            let grow = 2.0 * cross + s2;
            if r2 + grow <= 0.0 {
                return f64::INFINITY;
            }
            pairs += if dim == 2 {
                -0.5 * (grow / r2).ln_1p()
            } else {
                let r = r2.sqrt();
                let rn = (r2 + grow).sqrt();
                -grow / (r + rn) / (r * rn)
            };
        }
    }
    let mut field = 0.0;
    for i in 0..n {
        let xi = point(dim, x, i);
        let mut yi = xi;
        for a in 0..dim {
            yi[a] += alpha * p[i * dim + a];
        }
        field += v.value(yi) - v.value(xi);
    }
    let total = 2.0 * pairs + n as f64 * field;
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dim: usize, n: usize, seed: u64) -> PointConfiguration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(dim) {
                    *c = rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        PointConfiguration::new(dim, pts).unwrap()
    }

    #[test]
    fn two_points_on_the_axis() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = PointConfiguration::new(2, vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]]).unwrap();
        assert!((hamiltonian(&cfg, &v).unwrap() - 1.0).abs() < 1e-15);
        let g = gradient(&cfg, &v).unwrap();
        assert!(g.iter().flatten().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn permutation_invariance() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = random(2, 5, 3);
        let mut pts = cfg.points().to_vec();
        pts.reverse();
        pts.swap(0, 2);
        let perm = PointConfiguration::new(2, pts).unwrap();
        let (a, b) = (hamiltonian(&cfg, &v).unwrap(), hamiltonian(&perm, &v).unwrap());
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn matches_naive_double_loop() {
        for dim in [2, 3] {
            let v = PotentialSpec::quadratic(dim).unwrap();
            let cfg = random(dim, 50, 11);
            let p = cfg.points();
            let mut naive = 0.0;
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if i != j {
                        let r = ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2) + (p[i][2] - p[j][2]).powi(2)).sqrt();
                        naive += if dim == 2 { -r.ln() } else { 1.0 / r };
                    }
                }
                naive += 50.0 * (p[i][0].powi(2) + p[i][1].powi(2) + p[i][2].powi(2));
            }
            let h = hamiltonian(&cfg, &v).unwrap();
            assert!((h - naive).abs() <= 1e-12 * naive.abs(), "{dim}: {h} vs {naive}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for dim in [2, 3] {
            let v = PotentialSpec::expression(dim, "x^2 + 0.5*y^2 + 0.1*x*y").unwrap();
            let cfg = random(dim, 8, 5 + dim as u64);
            let x = cfg.flat();
            let g = gradient_flat(dim, &x, &v);
            let step = 1e-6;
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += step;
                xm[k] -= step;
                let fd = (energy_flat(dim, &xp, &v) - energy_flat(dim, &xm, &v)) / (2.0 * step);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{dim} {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn pair_forces_cancel_in_the_sum() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = random(2, 12, 9);
        let g = gradient(&cfg, &v).unwrap();
        let mut total = [0.0; 2];
        let mut field = [0.0; 2];
        for (gi, p) in g.iter().zip(cfg.points()) {
            let gv = v.gradient(*p);
            for a in 0..2 {
                total[a] += gi[a];
                field[a] += 12.0 * gv[a];
            }
        }
        assert!((total[0] - field[0]).abs() < 1e-10 && (total[1] - field[1]).abs() < 1e-10);
    }

    #[test]
    fn energy_change_agrees_with_difference() {
        for dim in [2, 3] {
            let v = PotentialSpec::quadratic(dim).unwrap();
            let cfg = random(dim, 10, 21);
            let x = cfg.flat();
            let p: Vec<f64> = (0..x.len()).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.1).collect();
            for alpha in [1e-1, 1e-3] {
                let y: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                let direct = energy_flat(dim, &y, &v) - energy_flat(dim, &x, &v);
                let delta = energy_change(dim, &x, &p, alpha, &v);
                assert!((direct - delta).abs() < 1e-11 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn coincident_points_are_singular() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = PointConfiguration::unchecked(2, vec![[0.1, 0.0, 0.0], [0.1, 0.0, 0.0]]).unwrap();
        assert!(matches!(hamiltonian(&cfg, &v), Err(Error::Singularity(_))));
        assert!(matches!(gradient(&cfg, &v), Err(Error::Singularity(_))));
    }
}
