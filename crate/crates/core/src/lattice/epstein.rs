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

//! Epstein zeta Z(s) = Σ_{p≠0} |p|^{-s} by the Gaussian (Riemann) split
//!
//! Γ(s/2) Z(s) = Σ' Γ(s/2, α p²) |p|^{-s}
//!             + (π^{d/2}/V) Σ' (k²/4)^{(s-d)/2} Γ((d-s)/2, k²/4α)
//!             + (π^{d/2}/V) 2α^{(s-d)/2}/(s-d) − 2α^{s/2}/s.

use super::ewald::shell_tail_bound;
use super::{enumerate_within, Lattice};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::special::{gamma_fn, upper_gamma};
use std::f64::consts::PI;

/// Z(s) with a certified truncation error of at most 1e-10.
pub fn epstein_zeta(lattice: &Lattice, s: f64) -> Result<f64> {
    Ok(epstein_zeta_certified(lattice, s, 1e-10)?.0)
}

/// Returns (Z(s), bound on the neglected tails).
pub fn epstein_zeta_certified(lattice: &Lattice, s: f64, tol: f64) -> Result<(f64, f64)> {
    let d = lattice.dim() as f64;
    if !(s > d) {
        return Err(Error::Divergence(format!("Epstein sum needs s > {d}, got {s}")));
    }
    if lattice.n_offsets() != 1 {
        return Err(Error::InvalidParameter("Epstein zeta is defined for single-offset lattices".into()));
    }
    let dim = lattice.dim();
    let v = lattice.volume();
    let unit = v.powf(1.0 / d);
    let alpha = PI / (unit * unit);
    let rho = lattice.cell_radius();
    let gs = gamma_fn(s / 2.0);
    let a_real = s / 2.0;
    let real_bound = |r: f64| {
        let s0 = r - 2.0 * rho;
        if s0 <= 0.0 {
            return f64::INFINITY;
        }
        let x0 = alpha * s0 * s0;
        let f = if a_real > 1.0 {
            if x0 <= 2.0 * (a_real - 1.0) {
                return f64::INFINITY;
            }
            1.0 / (1.0 - (a_real - 1.0) / x0)
        } else {
            1.0
        };
        shell_tail_bound(dim, 1.0 / v, rho, alpha.powf(a_real - 1.0) * f, -2.0, alpha, r) / gs
    };
    let rb = lattice.reciprocal_basis();
    let mut rbf = rb;
    let mut rinv = [[0.0; 3]; 3];
    for j in 0..dim {
        rinv[j] = geom::scale(lattice.basis_vector(j), 1.0 / (2.0 * PI));
    }
    if dim == 2 {
        rbf[2] = [0.0, 0.0, 1.0];
        rinv[2] = [0.0, 0.0, 1.0];
    }
    let recip_rho = {
        let mut r: f64 = 0.0;
        for a in [-0.5, 0.5] {
            for b in [-0.5, 0.5] {
                for c in if dim == 3 { vec![-0.5, 0.5] } else { vec![0.0] } {
                    let w: Vec3 = geom::add(geom::add(geom::scale(rbf[0], a), geom::scale(rbf[1], b)), geom::scale(rbf[2], c));
                    r = r.max(geom::norm(w));
                }
            }
        }
        r
    };
    let pref = PI.powf(d / 2.0) / v;
    let recip_bound = |k: f64| {
        let coef = 4.0 * alpha.powf((s - d) / 2.0 + 1.0) * pref;
        shell_tail_bound(dim, v / (2.0 * PI).powi(dim as i32), recip_rho, coef, -2.0, 1.0 / (4.0 * alpha), k) / gs
    };
    let mut r = 2.0 * rho;
    let mut steps = 0;
    while real_bound(r) > 0.5 * tol {
        r += 0.25 * unit;
        steps += 1;
        if steps > 400 {
            return Err(Error::Accuracy("Epstein real-space tail not certified".into()));
        }
    }
    let mut k = 2.0 * recip_rho;
    steps = 0;
    while recip_bound(k) > 0.5 * tol {
        k += 0.25 * 2.0 * PI / unit;
        steps += 1;
        if steps > 400 {
            return Err(Error::Accuracy("Epstein Fourier tail not certified".into()));
        }
    }
    let mut basis = [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]];
    let mut inverse = [[0.0; 3]; 3];
    for j in 0..dim {
        basis[j] = lattice.basis_vector(j);
        inverse[j] = geom::scale(rb[j], 1.0 / (2.0 * PI));
    }
    if dim == 2 {
        inverse[2] = [0.0, 0.0, 1.0];
    }
    let mut real_sum = 0.0;
    for p in enumerate_within(dim, &basis, &inverse, r).into_iter().skip(1) {
        let p2 = geom::norm2(p);
        real_sum += upper_gamma(a_real, alpha * p2) * p2.powf(-s / 2.0);
    }
    let mut recip_sum = 0.0;
    for kv in enumerate_within(dim, &rbf, &rinv, k).into_iter().skip(1) {
        let k2 = geom::norm2(kv);
        recip_sum += (k2 / 4.0).powf((s - d) / 2.0) * upper_gamma((d - s) / 2.0, k2 / (4.0 * alpha));
    }
    let constant = pref * 2.0 * alpha.powf((s - d) / 2.0) / (s - d) - 2.0 * alpha.powf(s / 2.0) / s;
    let value = (real_sum + pref * recip_sum + constant) / gs;
    Ok((value, real_bound(r) + recip_bound(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CubicKind;

    // 4 ζ(2) β(2): the square-lattice sum at s = 4
    const SQUARE_S4: f64 = 4.0 * (PI * PI / 6.0) * 0.915_965_594_177_219_0;

    #[test]
    fn square_lattice_closed_form() {
        let z = epstein_zeta(&Lattice::square(1.0).unwrap(), 4.0).unwrap();
        assert!((z - SQUARE_S4).abs() < 1e-10, "{z}");
    }

    #[test]
    fn homogeneity_and_ordering() {
        let sq = Lattice::square(1.0).unwrap();
        let z = epstein_zeta(&sq, 4.0).unwrap();
        let z2 = epstein_zeta(&sq.scaled(2.0).unwrap(), 4.0).unwrap();
        assert!((z2 - z / 16.0).abs() < 1e-10);
        let tri = Lattice::triangular(1.0).unwrap();
        assert!(epstein_zeta(&tri, 3.0).unwrap() < epstein_zeta(&sq, 3.0).unwrap());
        assert!(matches!(epstein_zeta(&sq, 2.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn basis_change_and_three_dimensions() {
        let tri = Lattice::triangular(1.0).unwrap();
        let re = tri.rebased([[1, 0, 0], [3, 1, 0], [0, 0, 1]]).unwrap();
        let a = epstein_zeta(&tri, 3.5).unwrap();
        assert!((a - epstein_zeta(&re, 3.5).unwrap()).abs() < 1e-10);
        // simple cubic at s = 6 from a direct sum with an integral tail
        let sc = Lattice::cubic(CubicKind::Simple, 1.0).unwrap();
        let n = 60i64;
        let mut direct = 0.0;
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    if i != 0 || j != 0 || k != 0 {
                        direct += ((i * i + j * j + k * k) as f64).powi(-3);
                    }
                }
            }
        }
        // outside the cube [-L, L]³ with L = n + 1/2 the sum is ≈ ∫ |x|^{-6}
        let l = n as f64 + 0.5;
        let tail = cube_complement_integral(l);
        let z = epstein_zeta(&sc, 6.0).unwrap();
        assert!((z - direct - tail).abs() < 1e-8, "{} vs {}", z, direct + tail);
    }

    // ∫ over the complement of [-L, L]³ of |x|^{-6}, by nested quadrature in one octant face
    fn cube_complement_integral(l: f64) -> f64 {
        use crate::quadrature::{integrate, Tolerance};
        // by symmetry: 6 × the region x > L with |y|,|z| < x
        let tol = Tolerance { abs: 1e-16, rel: 1e-12, max_intervals: 400 };
        let inner = |x: f64| {
            integrate(
                |y: f64| integrate(|z: f64| (x * x + y * y + z * z).powi(-3), -x, x, tol).unwrap().0,
                -x,
                x,
                tol,
            )
            .unwrap()
            .0
        };
        let (v, _) = integrate(|t: f64| {
            // x = L / t maps (0, 1] onto [L, ∞)
            let x = l / t;
            inner(x) * l / (t * t)
        }, 0.0, 1.0, tol)
        .unwrap();
        6.0 * v
    }
}
