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

//! Ewald summation of the torus Green function.
//!
//! Convention: −ΔG = c_d (δ_0 − 1/|T|) with c_2 = 2π, c_3 = 4π and ∫G = 0, so
//! that G(x) ≈ −log|x| (2D) or 1/|x| (3D) near the origin. The screened
//! real-space kernel is ½E1(α r²) in 2D and erfc(√α r)/r in 3D.

use super::Lattice;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::special::{erfc, euler_gamma, exp_integral_e1};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Controls for the Ewald split and its truncation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EwaldParams {
    /// Gaussian splitting parameter α; `None` picks π / V^{2/d}.
    pub splitting_parameter: Option<f64>,
    /// Cap on real-space shells (radius steps of V^{1/d}).
    pub max_real_shells: usize,
    /// Cap on Fourier shells (radius steps of 2π V^{-1/d}).
    pub max_fourier_shells: usize,
    /// Certified bound on each truncated tail.
    pub tail_tolerance: f64,
}

impl Default for EwaldParams {
    fn default() -> Self {
        Self { splitting_parameter: None, max_real_shells: 40, max_fourier_shells: 40, tail_tolerance: 1e-10 }
    }
}

/// Coulomb constant c_d in −Δg = c_d δ.
pub fn coulomb_constant(dim: usize) -> f64 {
    if dim == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

/// Bound on Σ_{y ∈ x+Λ, |y|>radius} coef·|y|^q·e^{−a|y|²} for q ≤ 0, using
/// that every point owns a Voronoi cell of radius at most `rho`.
pub(crate) fn shell_tail_bound(dim: usize, density: f64, rho: f64, coef: f64, q: f64, a: f64, radius: f64) -> f64 {
    let s0 = radius - 2.0 * rho;
    if s0 <= 0.0 {
        return f64::INFINITY;
    }
    let surface = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
    let k = (dim - 1) as f64;
    let e = (-a * s0 * s0).exp();
    // ∫_{s0}^∞ s^k e^{-a s²} ds
    let moment = if dim == 2 { e / (2.0 * a) } else { e * (s0 / (2.0 * a) + 1.0 / (4.0 * a * a * s0)) };
    density * surface * coef * s0.powf(q) * (1.0 + rho / s0).powf(k) * moment
}

/// Precomputed Ewald tables for one Bravais lattice.
#[derive(Clone, Debug)]
pub struct EwaldSum {
    lattice: Lattice,
    dim: usize,
    alpha: f64,
    volume: f64,
    real: Vec<Vec3>,
    /// half of the dual lattice with weights 2 c_d e^{-k²/4α} / (V k²)
    recip: Vec<(Vec3, f64)>,
    pub real_cutoff: f64,
    pub fourier_cutoff: f64,
    pub real_shells: usize,
    pub fourier_shells: usize,
    pub tail_bound: f64,
}

impl EwaldSum {
    pub fn new(lattice: &Lattice, params: &EwaldParams) -> Result<Self> {
        let dim = lattice.dim();
        let volume = lattice.volume();
        let unit = volume.powf(1.0 / dim as f64);
        let alpha = match params.splitting_parameter {
            Some(a) if a > 0.0 && a.is_finite() => a,
            Some(a) => return Err(Error::InvalidParameter(format!("splitting parameter must be positive, got {a}"))),
            None => PI / unit.powi(2),
        };
        if !(params.tail_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tail tolerance must be positive".into()));
        }
        let tol = params.tail_tolerance;
        let cd = coulomb_constant(dim);
        let rho = lattice.cell_radius();
        let bravais_density = 1.0 / volume;
        let (real_value_coef, real_grad_coef) = if dim == 2 {
            (1.0 / (2.0 * alpha), 1.0)
        } else {
            (1.0 / (PI * alpha).sqrt(), 2.0 * (alpha / PI).sqrt())
        };
        let real_bound = |r: f64| {
            let s0 = (r - 2.0 * rho).max(1e-300);
            let grad_coef = if dim == 2 { real_grad_coef } else { real_grad_coef + 1.0 / ((PI * alpha).sqrt() * s0 * s0) };
            shell_tail_bound(dim, bravais_density, rho, real_value_coef, -2.0, alpha, r)
                .max(shell_tail_bound(dim, bravais_density, rho, grad_coef, -1.0, alpha, r))
        };
        let mut shells = 0;
        let mut real_cutoff;
        loop {
            shells += 1;
            real_cutoff = 2.0 * rho + shells as f64 * unit * 0.5;
            if real_bound(real_cutoff) <= tol {
                break;
            }
            if shells >= 2 * params.max_real_shells {
                return Err(Error::Accuracy(format!(
                    "real-space tail {:e} above tolerance after {} shells",
                    real_bound(real_cutoff),
                    params.max_real_shells
                )));
            }
        }
        let real_shells = shells.div_ceil(2);
        let recip_rho = lattice.dual_cell_radius();
        let recip_density = volume / (2.0 * PI).powi(dim as i32);
        let a_k = 1.0 / (4.0 * alpha);
        let recip_bound = |k: f64| {
            shell_tail_bound(dim, recip_density, recip_rho, cd / volume, -2.0, a_k, k)
                .max(shell_tail_bound(dim, recip_density, recip_rho, cd / volume, -1.0, a_k, k))
        };
        let kunit = 2.0 * PI / unit;
        let mut shells = 0;
        let mut fourier_cutoff;
        loop {
            shells += 1;
            fourier_cutoff = 2.0 * recip_rho + shells as f64 * kunit * 0.5;
            if recip_bound(fourier_cutoff) <= tol {
                break;
            }
            if shells >= 2 * params.max_fourier_shells {
                return Err(Error::Accuracy(format!(
                    "Fourier tail {:e} above tolerance after {} shells",
                    recip_bound(fourier_cutoff),
                    params.max_fourier_shells
                )));
            }
        }
        let fourier_shells = shells.div_ceil(2);
        let tail_bound = real_bound(real_cutoff) + recip_bound(fourier_cutoff);

        let real = lattice.vectors_within(real_cutoff + rho);
        let ks = lattice.dual_vectors_within(fourier_cutoff);
        let recip = ks
            .into_iter()
            .filter(|k| {
                let m = [
                    geom::dot(lattice.basis_vector(0), *k),
                    geom::dot(lattice.basis_vector(1), *k),
                    if dim == 3 { geom::dot(lattice.basis_vector(2), *k) } else { 0.0 },
                ];
                let m: Vec<i64> = m.iter().map(|x| (x / (2.0 * PI)).round() as i64).collect();
                m[0] > 0 || (m[0] == 0 && m[1] > 0) || (m[0] == 0 && m[1] == 0 && m[2] > 0)
            })
            .map(|k| {
                let k2 = geom::norm2(k);
                (k, 2.0 * cd * (-k2 / (4.0 * alpha)).exp() / (volume * k2))
            })
            .collect();
        Ok(Self {
            lattice: lattice.clone(),
            dim,
            alpha,
            volume,
            real,
            recip,
            real_cutoff,
            fourier_cutoff,
            real_shells,
            fourier_shells,
            tail_bound,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn splitting_parameter(&self) -> f64 {
        self.alpha
    }

    fn mean_shift(&self) -> f64 {
        -coulomb_constant(self.dim) / (4.0 * self.alpha * self.volume)
    }

    #[inline]
    fn real_kernel(&self, r2: f64) -> f64 {
        if self.dim == 2 {
            0.5 * exp_integral_e1(self.alpha * r2)
        } else {
            let r = r2.sqrt();
            erfc(self.alpha.sqrt() * r) / r
        }
    }

    /// d/dr of the real-space kernel divided by r.
    #[inline]
    fn real_kernel_slope(&self, r2: f64) -> f64 {
        let e = (-self.alpha * r2).exp();
        if self.dim == 2 {
            -e / r2
        } else {
            let r = r2.sqrt();
            -(erfc(self.alpha.sqrt() * r) / r2 + 2.0 * (self.alpha / PI).sqrt() * e / r) / r
        }
    }

    fn fourier_value(&self, x: Vec3) -> f64 {
        self.recip.iter().map(|(k, w)| w * geom::dot(*k, x).cos()).sum()
    }

    fn fourier_gradient(&self, x: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for (k, w) in &self.recip {
            let s = -w * geom::dot(*k, x).sin();
            g = geom::add(g, geom::scale(*k, s));
        }
        g
    }

    fn floor(&self) -> f64 {
        1e-12 * self.volume.powf(1.0 / self.dim as f64)
    }

    /// G(x); fails on lattice points.
    pub fn green(&self, x: Vec3) -> Result<f64> {
        let y = self.lattice.reduce(x);
        if geom::norm(self.lattice.min_image(y)) < self.floor() {
            return Err(Error::Singularity("torus Green function evaluated on a lattice point".into()));
        }
        let mut real = 0.0;
        let cut2 = self.real_cutoff * self.real_cutoff;
        for p in &self.real {
            let r2 = geom::norm2(geom::sub(y, *p));
            if r2 <= cut2 {
                real += self.real_kernel(r2);
            }
        }
        Ok(real + self.fourier_value(y) + self.mean_shift())
    }

    /// ∇G(x); fails on lattice points.
    pub fn gradient(&self, x: Vec3) -> Result<Vec3> {
        let y = self.lattice.reduce(x);
        if geom::norm(self.lattice.min_image(y)) < self.floor() {
            return Err(Error::Singularity("torus Green gradient evaluated on a lattice point".into()));
        }
        let mut g = self.fourier_gradient(y);
        let cut2 = self.real_cutoff * self.real_cutoff;
        for p in &self.real {
            let z = geom::sub(y, *p);
            let r2 = geom::norm2(z);
            if r2 <= cut2 {
                g = geom::add(g, geom::scale(z, self.real_kernel_slope(r2)));
            }
        }
        Ok(g)
    }

    /// G(y) − g(y) for y near the origin (|y| below half the cell radius),
    /// with g = −log|y| or 1/|y|. Continuous at y = 0.
    pub fn regular_value(&self, y: Vec3) -> f64 {
        let r2 = geom::norm2(y);
        let mut sum = self.fourier_value(y) + self.mean_shift();
        let cut2 = self.real_cutoff * self.real_cutoff;
        for p in &self.real {
            let z = geom::sub(y, *p);
            let s2 = geom::norm2(z);
            if geom::norm2(*p) == 0.0 {
                sum += self.singular_removed(r2);
            } else if s2 <= cut2 {
                sum += self.real_kernel(s2);
            }
        }
        sum
    }

    // origin term of the real sum with g subtracted
    fn singular_removed(&self, r2: f64) -> f64 {
        let u = self.alpha * r2;
        if self.dim == 2 {
            // ½E1(u) + log r = ½(E1(u) + ln u) − ½ ln α
            let core = if u == 0.0 {
                -euler_gamma()
            } else if u < 1.0 {
                let mut s = 0.0;
                let mut term = 1.0;
                for k in 1..60 {
                    term *= -u / k as f64;
                    s -= term / k as f64;
                    if term.abs() < 1e-18 {
                        break;
                    }
                }
                -euler_gamma() + s
            } else {
                exp_integral_e1(u) + u.ln()
            };
            0.5 * core - 0.5 * self.alpha.ln()
        } else {
            // (erfc(√α r) − 1)/r = −erf(√α r)/r
            let sa = self.alpha.sqrt();
            if u < 0.1 {
                let mut s = 0.0;
                let mut term = 1.0;
                for k in 0..30 {
                    s += term / (2 * k + 1) as f64;
                    term *= -u / (k + 1) as f64;
                }
                -2.0 * sa / PI.sqrt() * s
            } else {
                let r = r2.sqrt();
                (erfc(sa * r) - 1.0) / r
            }
        }
    }

    /// ∇(G − g)(y) for y near the origin.
    pub fn regular_gradient(&self, y: Vec3) -> Vec3 {
        let mut g = self.fourier_gradient(y);
        let cut2 = self.real_cutoff * self.real_cutoff;
        for p in &self.real {
            let z = geom::sub(y, *p);
            let s2 = geom::norm2(z);
            if geom::norm2(*p) == 0.0 {
                if s2 == 0.0 {
                    continue;
                }
                let u = self.alpha * s2;
                let slope = if self.dim == 2 {
                    -(-u).exp_m1() / s2
                } else {
                    // d/dr(−erf(√α r)/r)/r
                    let sa = self.alpha.sqrt();
                    if u < 0.1 {
                        let mut s = 0.0;
                        let mut term = 1.0;
                        for k in 1..30 {
                            term *= -u / k as f64;
                            s += term * 2.0 * k as f64 / (2 * k + 1) as f64;
                        }
                        // derivative of -2√α/√π Σ (−u)^k/(k!(2k+1)) w.r.t. r, divided by r
                        -2.0 * sa / PI.sqrt() * s / s2
                    } else {
                        let r = s2.sqrt();
                        let erf = 1.0 - erfc(sa * r);
                        (erf / s2 - 2.0 * sa / PI.sqrt() * (-u).exp() / r) / r
                    }
                };
                g = geom::add(g, geom::scale(z, slope));
            } else if s2 <= cut2 {
                g = geom::add(g, geom::scale(z, self.real_kernel_slope(s2)));
            }
        }
        g
    }

    /// R = lim_{x→0} (G(x) − g(x)), taken analytically inside the split.
    pub fn self_constant(&self) -> f64 {
        self.regular_value([0.0; 3])
    }
}

/// G(x) for the lattice with default Ewald parameters.
pub fn torus_green(lattice: &Lattice, x: Vec3) -> Result<f64> {
    EwaldSum::new(lattice, &EwaldParams::default())?.green(x)
}

/// lim_{x→0}(G(x) + log|x|) in 2D, lim(G(x) − 1/|x|) in 3D.
pub fn green_self_constant(lattice: &Lattice) -> Result<f64> {
    Ok(EwaldSum::new(lattice, &EwaldParams::default())?.self_constant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CubicKind;

    // Fourier series of G on the unit square, summed in closed form along one axis.
    fn square_green_oracle(x: f64, y: f64) -> f64 {
        let theta = 2.0 * PI * y;
        let mut s = PI * PI / 3.0 - PI * theta + theta * theta / 2.0;
        for m in 1..200 {
            let m = m as f64;
            let t = 2.0 * (2.0 * PI * m * x).cos() * (PI / m) * (PI * m * (1.0 - 2.0 * y)).cosh() / (PI * m).sinh();
            s += t;
            if (PI * m * ((1.0 - 2.0 * y).abs() - 1.0)).exp() < 1e-18 {
                break;
            }
        }
        s / (2.0 * PI)
    }

    #[test]
    fn square_green_matches_fourier_oracle() {
        let sq = Lattice::square(1.0).unwrap();
        let ew = EwaldSum::new(&sq, &EwaldParams::default()).unwrap();
        for &(x, y) in &[(0.5, 0.5), (0.1, 0.3), (0.25, 0.7), (0.01, 0.02)] {
            let g = ew.green([x, y, 0.0]).unwrap();
            assert!((g - square_green_oracle(x, y)).abs() < 1e-9, "{x} {y}: {g} vs {}", square_green_oracle(x, y));
        }
    }

    #[test]
    fn splitting_parameter_independence() {
        for lat in [Lattice::triangular(1.0).unwrap(), Lattice::cubic(CubicKind::BodyCentered, 1.0).unwrap()] {
            let a = EwaldSum::new(&lat, &EwaldParams::default()).unwrap();
            let b = EwaldSum::new(
                &lat,
                &EwaldParams { splitting_parameter: Some(4.0 * a.splitting_parameter()), ..Default::default() },
            )
            .unwrap();
            let x = [0.13, 0.31, if lat.dim() == 3 { 0.07 } else { 0.0 }];
            assert!((a.green(x).unwrap() - b.green(x).unwrap()).abs() < 1e-9);
            assert!((a.self_constant() - b.self_constant()).abs() < 1e-9);
            let (ga, gb) = (a.gradient(x).unwrap(), b.gradient(x).unwrap());
            assert!(geom::norm(geom::sub(ga, gb)) < 1e-9);
        }
    }

    #[test]
    fn self_constant_limits() {
        let sq = Lattice::square(1.0).unwrap();
        let ew = EwaldSum::new(&sq, &EwaldParams::default()).unwrap();
        let x = [1e-3, 0.0, 0.0];
        let direct = ew.green(x).unwrap() + (1e-3f64).ln();
        // G + log r = R + (π/2|T|) r² + O(r⁴) on the square torus
        let quad = PI / 2.0 * 1e-6;
        assert!((direct - ew.self_constant() - quad).abs() < 1e-10);
        let tri = green_self_constant(&Lattice::triangular(1.0).unwrap()).unwrap();
        assert!(tri < ew.self_constant());
        let dil = green_self_constant(&sq.scaled(2.0).unwrap()).unwrap();
        assert!((dil - ew.self_constant() - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let lat = Lattice::from_tau(crate::lattice::ModularParameter::new(0.2, 1.3).unwrap(), 1.7).unwrap();
        let ew = EwaldSum::new(&lat, &EwaldParams::default()).unwrap();
        let x = [0.21, -0.17, 0.0];
        let g = ew.gradient(x).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (ew.green(xp).unwrap() - ew.green(xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7);
        }
        // regular part is smooth through the origin
        let y = [1e-4, 2e-4, 0.0];
        let reg = ew.regular_gradient(y);
        let full = ew.gradient(y).unwrap();
        let sing = geom::scale(y, -1.0 / geom::norm2(y));
        assert!(geom::norm(geom::sub(full, geom::add(reg, sing))) < 1e-6);
        assert!(ew.green([1.0 / 1.7f64.sqrt() * 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn cubic_madelung_energies() {
        // Wigner–Seitz Madelung constants of the uniform-background lattices
        let cases = [
            (CubicKind::Simple, 0.880_059_440),
            (CubicKind::BodyCentered, 0.895_929_256),
            (CubicKind::FaceCentered, 0.895_873_616),
        ];
        let rs = (3.0 / (4.0 * PI)).powf(1.0 / 3.0);
        for (kind, madelung) in cases {
            let lat = Lattice::cubic(kind, 1.0).unwrap();
            let r = green_self_constant(&lat).unwrap();
            // energy per particle = R/2 in units of e²
            assert!((0.5 * r + madelung / rs).abs() < 1e-8, "{kind:?}: {}", 0.5 * r);
        }
    }
}
