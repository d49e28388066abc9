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

//! Window definition of the renormalized energy on one period cell.
//!
//! Around each point the cell is split with a smooth partition of unity: in a
//! disk of radius ρ the energy is integrated in polar coordinates with the
//! ½/r² part done analytically, and the remainder is integrated with the
//! periodic trapezoidal rule, which converges spectrally for smooth
//! periodic integrands.

use super::{extrapolate_eta_order, Convention, RenormalizedValue};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::lattice::{EwaldParams, EwaldSum, Lattice};
use crate::quadrature::{composite_gauss, integrate, Tolerance};
use std::f64::consts::PI;

/// Discretisation of the window energy.
#[derive(Clone, Copy, Debug)]
pub struct WindowOptions {
    /// trapezoid nodes in θ around each point
    pub angular_nodes: usize,
    /// Gauss–Legendre order per radial panel
    pub radial_order: usize,
    /// trapezoid nodes per cell direction for the outer region
    pub outer_nodes: usize,
    pub ewald: EwaldParams,
    /// model value = L + c η^order for the η → 0 limit
    pub extrapolation_order: u32,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            angular_nodes: 64,
            radial_order: 16,
            outer_nodes: 160,
            ewald: EwaldParams { tail_tolerance: 1e-12, ..Default::default() },
            extrapolation_order: 2,
        }
    }
}

/// C^∞ cutoff equal to 1 on [0, flat] and 0 on [1, ∞).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Bump {
    pub flat: f64,
}

impl Bump {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.flat {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let u = (t - self.flat) / (1.0 - self.flat);
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        b / (a + b)
    }

    /// ∫_flat^1 (φ(t) − 1)/t dt
    pub fn log_defect(&self) -> Result<f64> {
        Ok(integrate(|t| (self.eval(t) - 1.0) / t, self.flat, 1.0, Tolerance { abs: 1e-15, rel: 1e-14, max_intervals: 500 })?.0)
    }
}

pub fn window_w(lattice: &Lattice, eta_list: &[f64]) -> Result<RenormalizedValue> {
    window_w_with(lattice, eta_list, &WindowOptions::default())
}

pub fn window_w_with(lattice: &Lattice, eta_list: &[f64], opts: &WindowOptions) -> Result<RenormalizedValue> {
    if lattice.dim() != 2 {
        return Err(Error::InvalidParameter("window energy is implemented for d = 2".into()));
    }
    check_eta_list(eta_list)?;
    let ew = EwaldSum::new(lattice, &opts.ewald)?;
    let d_min = lattice.min_distance();
    let rho = 0.49 * d_min;
    let eta_max = eta_list[0];
    let flat = (1.05 * eta_max / rho).max(0.5);
    if flat > 0.95 {
        return Err(Error::InvalidParameter(format!(
            "η = {eta_max} too large for minimal distance {d_min}: excision balls would overlap the partition"
        )));
    }
    let bump = Bump { flat };
    let defect = bump.log_defect()?;
    let pos = lattice.positions();
    let n = pos.len();
    let outer = outer_energy(&ew, &pos, rho, bump, opts.outer_nodes)?;

    let m = opts.angular_nodes;
    let dirs: Vec<Vec3> = (0..m).map(|i| {
        let t = 2.0 * PI * i as f64 / m as f64;
        [t.cos(), t.sin(), 0.0]
    }).collect();
    let mut trace = Vec::with_capacity(eta_list.len());
    let mut raw = Vec::with_capacity(eta_list.len());
    for &eta in eta_list {
        let mut total = outer;
        for j in 0..n {
            let mut local = 0.0;
            let inner_panels = (((flat * rho - eta) / (0.1 * rho)).ceil() as usize).max(2);
            let (r1, w1) = composite_gauss(eta, flat * rho, inner_panels, opts.radial_order);
            let (r2, w2) = composite_gauss(flat * rho, rho, 12, opts.radial_order);
            for (r, w) in r1.iter().chain(&r2).zip(w1.iter().chain(&w2)) {
                let phi = bump.eval(r / rho);
                if phi == 0.0 {
                    continue;
                }
                let mut ring = 0.0;
                for e in &dirs {
                    let y = geom::scale(*e, *r);
                    let x = geom::add(pos[j], y);
                    let mut grad = ew.regular_gradient(y);
                    for (k, a) in pos.iter().enumerate() {
                        if k != j {
                            grad = geom::add(grad, ew.gradient(geom::sub(x, *a))?);
                        }
                    }
                    ring += -geom::dot(grad, *e) + 0.5 * geom::norm2(grad) * r;
                }
                local += w * phi * ring * 2.0 * PI / m as f64;
            }
            total += PI * rho.ln() + PI * defect + local;
        }
        let v = lattice.volume();
        trace.push((eta, total / v));
        raw.push((eta, total - PI * n as f64 * eta.ln()));
    }
    check_trace(&trace)?;
    let (value, residual) = if trace.len() >= 3 {
        extrapolate_eta_order(&trace, opts.extrapolation_order)?
    } else {
        (trace.last().expect("non-empty").1, f64::NAN)
    };
    Ok(RenormalizedValue {
        value,
        eta_trace: trace,
        extrapolation_residual: if residual.is_nan() { 0.0 } else { residual },
        convention: Convention {
            extrapolation_order: Some(opts.extrapolation_order),
            ..Convention::periodic(2)
        },
        unrenormalized_trace: raw,
        tail_bound: ew.tail_bound,
    })
}

// ½∫|∇H|²(1 − Σφ_j) over the cell by the periodic trapezoidal rule
fn outer_energy(ew: &EwaldSum, pos: &[Vec3], rho: f64, bump: Bump, nodes: usize) -> Result<f64> {
    let lat = ew.lattice();
    let mut sum = 0.0;
    for i in 0..nodes {
        for k in 0..nodes {
            let u = [i as f64 / nodes as f64, k as f64 / nodes as f64, 0.0];
            let x = lat.to_cartesian(u);
            let mut weight = 1.0;
            for a in pos {
                let d = geom::norm(lat.min_image(geom::sub(x, *a)));
                weight -= bump.eval(d / rho);
            }
            if weight <= 0.0 {
                continue;
            }
            let mut grad = [0.0; 3];
            for a in pos {
                grad = geom::add(grad, ew.gradient(geom::sub(x, *a))?);
            }
            sum += 0.5 * geom::norm2(grad) * weight;
        }
    }
    Ok(sum * lat.volume() / (nodes * nodes) as f64)
}

pub(crate) fn check_eta_list(eta_list: &[f64]) -> Result<()> {
    if eta_list.is_empty() {
        return Err(Error::InvalidParameter("empty η list".into()));
    }
    if eta_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("η values must be positive".into()));
    }
    if eta_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("η values must be strictly decreasing".into()));
    }
    Ok(())
}

// successive differences must not grow once in the asymptotic regime
pub(crate) fn check_trace(trace: &[(f64, f64)]) -> Result<()> {
    let diffs: Vec<f64> = trace.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    for w in diffs.windows(2) {
        if w[1] > w[0] + 1e-8 {
            return Err(Error::Accuracy(format!("η trace is not settling: differences {:e} then {:e}", w[0], w[1])));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renormalized::periodic_w;

    #[test]
    fn square_window_matches_periodic() {
        let sq = Lattice::square(1.0).unwrap();
        let etas = [0.1, 0.05, 0.025];
        let w = window_w(&sq, &etas).unwrap();
        let p = periodic_w(&sq).unwrap().value;
        // the next term in the η expansion is O(η⁴)
        assert!((w.value - p).abs() < 2e-4, "{} vs {p}", w.value);
        // η-halving differences shrink at least linearly
        let d1 = (w.eta_trace[1].1 - w.eta_trace[0].1).abs();
        let d2 = (w.eta_trace[2].1 - w.eta_trace[1].1).abs();
        assert!(d2 < 0.55 * d1);
        // raw energy diverges like −π n log η; small η keeps the η² drift below 0.1%
        let small = window_w(&sq, &[0.02, 0.01, 0.005]).unwrap();
        let r = &small.unrenormalized_trace;
        let slope = (r[2].1 - r[0].1) / (r[2].0.ln() - r[0].0.ln());
        assert!((slope / -PI - 1.0).abs() < 0.01, "{slope}");
    }

    #[test]
    fn outer_quadrature_converged() {
        let tri = Lattice::triangular(1.0).unwrap();
        let coarse = WindowOptions { outer_nodes: 120, ..Default::default() };
        let a = window_w_with(&tri, &[0.1], &coarse).unwrap().value;
        let b = window_w(&tri, &[0.1]).unwrap().value;
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn rejects_large_eta() {
        let sq = Lattice::square(1.0).unwrap();
        assert!(window_w(&sq, &[0.48, 0.2]).is_err());
        assert!(window_w(&sq, &[0.1, 0.2]).is_err());
    }
}
