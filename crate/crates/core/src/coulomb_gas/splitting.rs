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


//! Exact splitting of the 2D discrete energy for V = |x|² into a mean-field
//! part, a logarithmic part, the renormalized energy of the blown-up
//! configuration and a confinement part, used as a numerical oracle.
//!
//! With the background disk of radius √n in blown-up coordinates, the field
//! is ∇h = −Σ (x − x_i)/|x − x_i|² + E with E = x inside the disk and
//! n x/|x|² outside. The renormalized energy
//! W = lim ½∫_{R² ∖ ∪B(x_i,η)} |∇h|² + π n log η
//! is split with a smooth partition of unity: a bump around each charge
//! (polar coordinates centred on the charge, with the 1/r² part integrated
//! in closed form, which cancels the counterterm exactly), the remainder of
//! a ball B_R in polar coordinates about the origin, and the exterior of
//! B_R from the multipole expansion of h.

use super::config::PointConfiguration;
use super::energy::hamiltonian;
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::{integrate, integrate_pieces, Tolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

/// Terms of the splitting; `residual` = |lhs − sum of the four terms|.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    pub lhs: f64,
    pub mean_field_term: f64,
    pub log_term: f64,
    pub w_term: f64,
    pub zeta_term: f64,
    pub residual: f64,
    /// (η, W_η/π) with the excision kept; W_η − W = O(η²)
    pub eta_trace: Vec<(f64, f64)>,
    /// summed error estimate of the quadratures (in units of the w-term)
    pub quadrature_error: f64,
}

/// ℱ(μ_0) for V = |x|² in the plane.
pub const DISK_MEAN_FIELD_ENERGY: f64 = 0.75;

/// ζ for V = |x|² in the plane: 0 on the unit disk, |x|²/2 − log|x| − 1/2 outside.
pub fn disk_zeta(x: [f64; 3]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 <= 1.0 {
        0.0
    } else {
        0.5 * (r2 - 1.0) - 0.5 * r2.ln()
    }
}

/// Evaluates every term of the splitting for a planar configuration and V = |x|².
pub fn splitting_check(cfg: &PointConfiguration, v: &PotentialSpec) -> Result<SplittingReport> {
    if cfg.dim() != 2 || v.dim() != 2 || v.is_centered_quadratic() != Some(1.0) {
        return Err(Error::InvalidParameter("the splitting check needs d = 2 and V = |x|²".into()));
    }
    if cfg.is_empty() {
        return Err(Error::InvalidParameter("empty configuration".into()));
    }
    let lhs = hamiltonian(cfg, v)?;
    let n = cfg.len() as f64;
    let scale = n.sqrt();
    let charges: Vec<[f64; 2]> = cfg.points().iter().map(|p| [scale * p[0], scale * p[1]]).collect();
    let field = BlownUp::new(charges);
    let (w, trace, err) = field.renormalized_energy()?;
    let mean_field_term = n * n * DISK_MEAN_FIELD_ENERGY;
    let log_term = -0.5 * n * n.ln();
    let w_term = w / PI;
    let zeta_term = 2.0 * n * cfg.points().iter().map(|p| disk_zeta(*p)).sum::<f64>();
    let residual = (lhs - (mean_field_term + log_term + w_term + zeta_term)).abs();
    Ok(SplittingReport {
        lhs,
        mean_field_term,
        log_term,
        w_term,
        zeta_term,
        residual,
        eta_trace: trace.into_iter().map(|(e, w)| (e, w / PI)).collect(),
        quadrature_error: err / PI,
    })
}

// smooth step: 1 on [0, 1/2], 0 on [1, ∞)
fn bump(t: f64) -> f64 {
    if t <= 0.5 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * t - 1.0;
    let a = (-1.0 / (1.0 - s)).exp();
    let b = (-1.0 / s).exp();
    a / (a + b)
}

struct BlownUp {
    charges: Vec<[f64; 2]>,
    /// background disk radius √n
    disk: f64,
    /// outer radius of the quadrature ball
    outer: f64,
    /// bump radius per charge
    rho: Vec<f64>,
    /// angle of the integration frame, so rotated inputs see the same integrands
    frame: f64,
}

impl BlownUp {
    fn new(charges: Vec<[f64; 2]>) -> Self {
        let n = charges.len();
        let disk = (n as f64).sqrt();
        let far = charges.iter().map(|c| c[0].hypot(c[1])).fold(disk, f64::max);
        let outer = 1.2 * far + 1.0;
        let rho = (0..n)
            .map(|i| {
                let mut r: f64 = 1.0_f64.min(0.4 * (outer - charges[i][0].hypot(charges[i][1])));
                for j in 0..n {
                    if j != i {
                        let d = (charges[i][0] - charges[j][0]).hypot(charges[i][1] - charges[j][1]);
                        r = r.min(0.4 * d);
                    }
                }
                r
            })
            .collect();
        let frame = frame_angle(&charges);
        Self { charges, disk, outer, rho, frame }
    }

    fn background(&self, x: [f64; 2]) -> [f64; 2] {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 <= self.disk * self.disk {
            x
        } else {
            let s = self.disk * self.disk / r2;
            [s * x[0], s * x[1]]
        }
    }

    // ∇h with the contribution of charge `skip` left out
    fn field_without(&self, x: [f64; 2], skip: Option<usize>) -> [f64; 2] {
        let mut f = self.background(x);
        for (j, c) in self.charges.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let d = [x[0] - c[0], x[1] - c[1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            f[0] -= d[0] / r2;
            f[1] -= d[1] / r2;
        }
        f
    }

    // ∫ over the bump of charge i of (|∇h|² − 1/r²), for radii in [lo, hi]
    fn near_remainder(&self, i: usize, lo: f64, hi: f64, tol: Tolerance, fail: &RefCell<Option<Error>>) -> (f64, f64) {
        let c = self.charges[i];
        let rho = self.rho[i];
        let disk2 = self.disk * self.disk;
        let inner = |theta: f64| -> f64 {
            let e = [(theta + self.frame).cos(), (theta + self.frame).sin()];
            // radii where the ray crosses the background edge
            let b = c[0] * e[0] + c[1] * e[1];
            let disc = b * b - (c[0] * c[0] + c[1] * c[1] - disk2);
            let mut breaks = vec![lo];
            if disc > 0.0 {
                let sq = disc.sqrt();
                for r in [-b - sq, -b + sq] {
                    if r > lo && r < hi {
                        breaks.push(r);
                    }
                }
            }
            breaks.push(hi);
            breaks.sort_by(f64::total_cmp);
            let f = |r: f64| {
                let x = [c[0] + r * e[0], c[1] + r * e[1]];
                let rest = self.field_without(x, Some(i));
                let w = bump(r / rho);
                // |K|² − 2K·R + |R|² with K = e/r, times the Jacobian r
                w * (-2.0 * (e[0] * rest[0] + e[1] * rest[1]) + r * (rest[0] * rest[0] + rest[1] * rest[1]))
            };
            match integrate_pieces(f, &breaks, tol) {
                Ok((v, _)) => v,
                Err(e) => {
                    fail.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let outer_tol = Tolerance { abs: tol.abs * TAU * 4.0, ..tol };
        match integrate(inner, 0.0, TAU, outer_tol) {
            Ok(v) => v,
            Err(e) => {
                fail.borrow_mut().get_or_insert(e);
                (0.0, 0.0)
            }
        }
    }

    // ∫_{B_R} (1 − Σ bumps)|∇h|² in polar coordinates about the origin
    fn far_part(&self, tol: Tolerance, fail: &RefCell<Option<Error>>) -> (f64, f64) {
        let inner = |r: f64| -> f64 {
            let f = |theta: f64| {
                let x = [r * (theta + self.frame).cos(), r * (theta + self.frame).sin()];
                let mut w = 1.0;
                for (c, rho) in self.charges.iter().zip(&self.rho) {
                    let d = (x[0] - c[0]).hypot(x[1] - c[1]);
                    w -= bump(d / rho);
                }
                if w <= 0.0 {
                    return 0.0;
                }
                let g = self.field_without(x, None);
                w * (g[0] * g[0] + g[1] * g[1]) * r
            };
            match integrate(f, 0.0, TAU, tol) {
                Ok((v, _)) => v,
                Err(e) => {
                    fail.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let mut breaks = vec![0.0, self.disk, self.outer];
        for (c, rho) in self.charges.iter().zip(&self.rho) {
            let r = c[0].hypot(c[1]);
            for b in [r - rho, r - 0.5 * rho, r + 0.5 * rho, r + rho] {
                if b > 0.0 && b < self.outer {
                    breaks.push(b);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let outer_tol = Tolerance { abs: tol.abs * TAU * self.outer, ..tol };
        match integrate_pieces(inner, &breaks, outer_tol) {
            Ok(v) => v,
            Err(e) => {
                fail.borrow_mut().get_or_insert(e);
                (0.0, 0.0)
            }
        }
    }

    /// ∫_{|x|>R}|∇h|² from h = Re Σ_k a_k z^{−k}, a_k = Σ_i z_i^k / k.
    fn exterior(&self) -> f64 {
        let zs: Vec<Complex64> = self.charges.iter().map(|c| Complex64::new(c[0], c[1]) / self.outer).collect();
        let mut powers = zs.clone();
        let mut total = 0.0;
        let mut quiet = 0;
        for k in 1..=2000 {
            let a: Complex64 = powers.iter().sum::<Complex64>() / k as f64;
            let term = PI * k as f64 * a.norm_sqr();
            total += term;
            if term <= 1e-18 * total.max(1e-300) {
                quiet += 1;
                if quiet > 5 {
                    break;
                }
            } else {
                quiet = 0;
            }
            for (p, z) in powers.iter_mut().zip(&zs) {
                *p *= z;
            }
        }
        total
    }

    /// W together with the η-trace and an error estimate.
    fn renormalized_energy(&self) -> Result<(f64, Vec<(f64, f64)>, f64)> {
        let tol = Tolerance { abs: 1e-12, rel: 1e-12, max_intervals: 4000 };
        let fail = RefCell::new(None);
        let rho_min = self.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        // ∫_{1/2}^{1} bump(t)/t dt
        let (tail_of_bump, _) = integrate_pieces(|t| bump(t) / t, &[0.5, 0.75, 1.0], tol)?;
        let mut total = 0.0;
        let mut err = 0.0;
        let mut inner_cap = Vec::new();
        let etas: Vec<f64> = [0.25, 0.0625, 0.015625].iter().map(|f| f * rho_min).collect();
        for i in 0..self.charges.len() {
            // closed-form 1/r² part with the log η counterterm removed
            total += TAU * ((0.5 * self.rho[i]).ln() + tail_of_bump);
            let (v, e) = self.near_remainder(i, 0.0, self.rho[i], tol, &fail);
            total += v;
            err += e;
            inner_cap.push(etas.iter().map(|&eta| self.near_remainder(i, 0.0, eta, tol, &fail).0).collect::<Vec<_>>());
        }
        let (v, e) = self.far_part(tol, &fail);
        total += v;
        err += e;
        total += self.exterior();
        let w = 0.5 * total;
        let trace: Vec<(f64, f64)> = etas
            .iter()
            .enumerate()
            .map(|(k, &eta)| (eta, w - 0.5 * inner_cap.iter().map(|c| c[k]).sum::<f64>()))
            .collect();
        if let Some(e) = fail.into_inner() {
            let listed: Vec<String> = trace.iter().map(|(eta, w)| format!("η={eta:.3e}: W={w:.12e}")).collect();
            return Err(Error::Accuracy(format!("{e}; η-trace [{}]", listed.join(", "))));
        }
        Ok((w, trace, 0.5 * err))
    }
}

// argument of the first non-negligible moment Σ z^k, divided by k
fn frame_angle(charges: &[[f64; 2]]) -> f64 {
    let zs: Vec<Complex64> = charges.iter().map(|c| Complex64::new(c[0], c[1])).collect();
    let size = zs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if size == 0.0 {
        return 0.0;
    }
    for k in 1..=4 {
        let m: Complex64 = zs.iter().map(|z| (z / size).powi(k)).sum();
        if m.norm() > 1e-6 {
            return m.arg() / k as f64;
        }
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_disk(n: usize, seed: u64) -> PointConfiguration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                let r = rng.gen::<f64>().sqrt();
                let t = rng.gen_range(0.0..TAU);
                [r * t.cos(), r * t.sin(), 0.0]
            })
            .collect();
        PointConfiguration::new(2, pts).unwrap()
    }

    #[test]
    fn single_charge_at_origin() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = PointConfiguration::new(2, vec![[0.0; 3]]).unwrap();
        let rep = splitting_check(&cfg, &v).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!((rep.w_term + 0.75).abs() < 1e-10, "{}", rep.w_term);
        assert!(rep.residual <= 1e-8);
    }

    #[test]
    fn three_random_charges() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = random_disk(3, 1);
        let rep = splitting_check(&cfg, &v).unwrap();
        assert!(rep.residual <= 1e-6 * rep.lhs.abs(), "{rep:?}");
        // W_η approaches W quadratically
        let d: Vec<f64> = rep.eta_trace.iter().map(|(_, w)| (w - rep.w_term).abs()).collect();
        assert!(d[1] < d[0] / 8.0 || d[0] < 1e-10, "{d:?}");
    }

    #[test]
    fn charges_outside_the_disk() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = PointConfiguration::new(2, vec![[1.3, 0.2, 0.0], [-0.4, 0.1, 0.0]]).unwrap();
        let rep = splitting_check(&cfg, &v).unwrap();
        assert!(rep.zeta_term > 0.0);
        assert!(rep.residual <= 1e-6 * rep.lhs.abs(), "{rep:?}");
    }

    #[test]
    fn terms_are_rotation_and_permutation_invariant() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let cfg = random_disk(4, 7);
        let a = splitting_check(&cfg, &v).unwrap();
        let b = splitting_check(&cfg.rotated(0.7).unwrap(), &v).unwrap();
        let mut pts = cfg.points().to_vec();
        pts.rotate_left(1);
        let c = splitting_check(&PointConfiguration::new(2, pts).unwrap(), &v).unwrap();
        for other in [&b, &c] {
            for (x, y) in [
                (a.lhs, other.lhs),
                (a.mean_field_term, other.mean_field_term),
                (a.log_term, other.log_term),
                (a.w_term, other.w_term),
                (a.zeta_term, other.zeta_term),
            ] {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn other_potentials_are_rejected() {
        let cfg = random_disk(2, 3);
        let v = PotentialSpec::quadratic_with(2, 2.0, [0.0; 3]).unwrap();
        assert!(matches!(splitting_check(&cfg, &v), Err(Error::InvalidParameter(_))));
    }
}
