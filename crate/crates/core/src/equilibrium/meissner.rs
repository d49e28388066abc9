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

//! The Meissner field h_0 (−Δh_0 + h_0 = 0 in Ω, h_0 = 1 on ∂Ω), the
//! first-critical-field constant λ_Ω = 1/(2 max|h_0 − 1|), and the mean-field
//! vortex obstacle problem
//!
//!   (−Δ + 1) h ≥ 0,  h ≥ 1 − 1/(2λ),  equality in one of the two at every point,
//!
//! whose coincidence set ω_λ carries the vortex density μ* = −Δh + h.
//!
//! Ω is a disk or a rectangle on a Cartesian grid. Nodes next to a curved
//! boundary use Shortley–Weller differences with the exact boundary distance.

use super::grid::GridField;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Planar region for the Meissner and vortex obstacle problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Disk { radius, center } if radius > 0.0 && radius.is_finite() && center.iter().all(|c| c.is_finite()) => Ok(()),
            Domain::Rectangle { lo, hi } if lo[0] < hi[0] && lo[1] < hi[1] && lo.iter().chain(&hi).all(|c| c.is_finite()) => Ok(()),
            _ => Err(Error::InvalidParameter(format!("degenerate domain {self:?}"))),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Disk { radius, .. } => PI * radius * radius,
            Domain::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Disk { center, radius } => ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius]),
            Domain::Rectangle { lo, hi } => (lo, hi),
        }
    }

    fn contains(&self, x: [f64; 2]) -> bool {
        match *self {
            Domain::Disk { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) < radius,
            Domain::Rectangle { lo, hi } => x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1],
        }
    }

    /// Distance from an interior point to ∂Ω along axis `a` in direction `sign`.
    fn arm(&self, x: [f64; 2], a: usize, sign: f64) -> f64 {
        match *self {
            Domain::Disk { center, radius } => {
                let b = 1 - a;
                let along = sign * (x[a] - center[a]);
                let across = x[b] - center[b];
                let half = (radius * radius - across * across).max(0.0).sqrt();
                half - along
            }
            Domain::Rectangle { lo, hi } => {
                if sign > 0.0 {
                    hi[a] - x[a]
                } else {
                    x[a] - lo[a]
                }
            }
        }
    }
}

/// Controls for the (projected) SOR iterations.
#[derive(Clone, Copy, Debug)]
pub struct RelaxationOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_sweeps: 200_000 }
    }
}

// (−Δ_h + 1) on the interior nodes, boundary value 1 folded into rhs
struct Operator {
    field: GridField,
    /// interior node → field index
    nodes: Vec<usize>,
    /// field index → interior node
    slot: Vec<Option<usize>>,
    diag: Vec<f64>,
    neighbours: Vec<[(usize, f64); 4]>,
    rhs: Vec<f64>,
    omega: f64,
}

const NO_NODE: usize = usize::MAX;

impl Operator {
    fn new(domain: &Domain, spacing: f64) -> Result<Self> {
        domain.validate()?;
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        let (lo, hi) = domain.bounds();
        let mut origin = [0.0; 3];
        let mut shape = [1usize; 3];
        for a in 0..2 {
            let first = (lo[a] / spacing).floor();
            let last = (hi[a] / spacing).ceil();
            origin[a] = first * spacing;
            shape[a] = (last - first) as usize + 1;
        }
        if shape[0] * shape[1] > 50_000_000 {
            return Err(Error::InvalidParameter(format!("grid of {shape:?} nodes is too large")));
        }
        let mut field = GridField::new(2, origin, spacing, shape, [false; 3])?;
        field.values.iter_mut().for_each(|v| *v = 1.0);
        // a node closer than this fraction of h to ∂Ω is treated as lying on it
        let snap = 1e-3 * spacing;
        let mut slot = vec![None; field.len()];
        let mut nodes = Vec::new();
        for idx in 0..field.len() {
            let p = field.position(idx);
            let x = [p[0], p[1]];
            if domain.contains(x) && (0..2).all(|a| domain.arm(x, a, 1.0) > snap && domain.arm(x, a, -1.0) > snap) {
                slot[idx] = Some(nodes.len());
                nodes.push(idx);
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("grid has no interior nodes".into()));
        }
        let mut diag = Vec::with_capacity(nodes.len());
        let mut neighbours = Vec::with_capacity(nodes.len());
        let mut rhs = Vec::with_capacity(nodes.len());
        for &idx in &nodes {
            let c = field.coords(idx);
            let p = field.position(idx);
            let x = [p[0], p[1]];
            let mut d = 1.0;
            let mut b = 0.0;
            let mut nb = [(NO_NODE, 0.0); 4];
            for a in 0..2 {
                let mut arms = [spacing; 2];
                let mut ids = [NO_NODE; 2];
                for (s, sign) in [-1.0f64, 1.0].into_iter().enumerate() {
                    let mut cc = c;
                    cc[a] = if sign > 0.0 { c[a] + 1 } else { c[a].wrapping_sub(1) };
                    let neighbour = (cc[a] < shape[a]).then(|| field.index(cc[0], cc[1], 0)).and_then(|j| slot[j].map(|_| j));
                    match neighbour {
                        Some(j) => ids[s] = slot[j].expect("interior"),
                        None => arms[s] = domain.arm(x, a, sign).min(spacing),
                    }
                }
                let (hl, hr) = (arms[0], arms[1]);
                d += 2.0 / (hl * hr);
                for s in 0..2 {
                    let coef = 2.0 / (arms[s] * (hl + hr));
                    if ids[s] == NO_NODE {
                        b += coef;
                    } else {
                        nb[2 * a + s] = (ids[s], coef);
                    }
                }
            }
            diag.push(d);
            neighbours.push(nb);
            rhs.push(b);
        }
        let (lo, hi) = domain.bounds();
        let width = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let omega = 2.0 / (1.0 + (PI * spacing / width).sin());
        Ok(Self { field, nodes, slot, diag, neighbours, rhs, omega })
    }

    fn apply_row(&self, u: &[f64], i: usize) -> f64 {
        let mut s = self.diag[i] * u[i];
        for &(j, c) in &self.neighbours[i] {
            if j != NO_NODE {
                s -= c * u[j];
            }
        }
        s
    }

    /// Projected SOR for A u = rhs with u ≥ floor (floor = −∞ for the linear problem).
    fn relax(&self, u: &mut [f64], floor: f64, opts: &RelaxationOptions) -> Result<usize> {
        for sweep in 1..=opts.max_sweeps {
            let mut maxd: f64 = 0.0;
            for i in 0..u.len() {
                let mut s = self.rhs[i];
                for &(j, c) in &self.neighbours[i] {
                    if j != NO_NODE {
                        s += c * u[j];
                    }
                }
                let gs = s / self.diag[i];
                let new = (u[i] + self.omega * (gs - u[i])).max(floor);
                maxd = maxd.max((new - u[i]).abs());
                u[i] = new;
            }
            if maxd <= opts.tolerance {
                return Ok(sweep);
            }
        }
        let residual = (0..u.len()).map(|i| (self.apply_row(u, i) - self.rhs[i]).abs()).fold(0.0, f64::max);
        Err(Error::Convergence(format!(
            "SOR stopped after {} sweeps with residual {residual:e}",
            opts.max_sweeps
        )))
    }

    fn to_field(&self, u: &[f64]) -> GridField {
        let mut f = self.field.clone();
        for (i, &idx) in self.nodes.iter().enumerate() {
            f.values[idx] = u[i];
        }
        f
    }

    fn domain_mask(&self) -> GridField {
        let mut f = self.field.clone();
        for (idx, v) in f.values.iter_mut().enumerate() {
            *v = if self.slot[idx].is_some() { 1.0 } else { 0.0 };
        }
        f
    }
}

/// Meissner field with the derived constant λ_Ω.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeissnerSolution {
    /// h_0 at every node; nodes on or outside ∂Ω hold the boundary value 1
    pub h0: GridField,
    /// 1 on interior (unknown) nodes
    pub domain_mask: GridField,
    pub max_deviation: f64,
    pub lambda_omega: f64,
    pub sweeps: usize,
    pub residual: f64,
}

pub fn solve_meissner_h0(domain: &Domain, spacing: f64) -> Result<MeissnerSolution> {
    solve_meissner_h0_with(domain, spacing, &RelaxationOptions::default())
}

pub fn solve_meissner_h0_with(domain: &Domain, spacing: f64, opts: &RelaxationOptions) -> Result<MeissnerSolution> {
    let op = Operator::new(domain, spacing)?;
    let mut u = vec![1.0; op.nodes.len()];
    let sweeps = op.relax(&mut u, f64::NEG_INFINITY, opts)?;
    let residual = (0..u.len()).map(|i| (op.apply_row(&u, i) - op.rhs[i]).abs()).fold(0.0, f64::max);
    let max_deviation = u.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    Ok(MeissnerSolution {
        h0: op.to_field(&u),
        domain_mask: op.domain_mask(),
        max_deviation,
        lambda_omega: 0.5 / max_deviation,
        sweeps,
        residual,
    })
}

/// λ_Ω for the unit disk from the closed form h_0 = I_0(r)/I_0(1).
pub fn unit_disk_lambda_omega() -> f64 {
    0.5 / (1.0 - 1.0 / crate::special::bessel_i0(1.0))
}

/// Solution of the vortex obstacle problem at one λ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VortexObstacleSolution {
    pub lambda: f64,
    /// 1 − 1/(2λ)
    pub obstacle: f64,
    pub field: GridField,
    /// μ* = −Δh + h on ω_λ, 0 elsewhere
    pub vorticity: GridField,
    /// 1 on ω_λ
    pub omega_mask: GridField,
    pub domain_mask: GridField,
    /// fraction of the interior nodes that lie in ω_λ
    pub coverage: f64,
    /// max over interior nodes of |min(−Δh + h, h − obstacle)|
    pub complementarity: f64,
    pub sweeps: usize,
}

pub fn solve_gl_obstacle(lambda: f64, domain: &Domain, spacing: f64) -> Result<VortexObstacleSolution> {
    solve_gl_obstacle_with(lambda, domain, spacing, &RelaxationOptions::default())
}

pub fn solve_gl_obstacle_with(lambda: f64, domain: &Domain, spacing: f64, opts: &RelaxationOptions) -> Result<VortexObstacleSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    let op = Operator::new(domain, spacing)?;
    let obstacle = 1.0 - 0.5 / lambda;
    // start from the Meissner field, which lies above the solution
    let mut u = vec![1.0; op.nodes.len()];
    op.relax(&mut u, f64::NEG_INFINITY, opts)?;
    let sweeps = op.relax(&mut u, obstacle, opts)?;
    let mut vorticity = op.field.clone();
    vorticity.values.iter_mut().for_each(|v| *v = 0.0);
    let mut omega_mask = vorticity.clone();
    let mut complementarity: f64 = 0.0;
    let mut covered = 0usize;
    for (i, &idx) in op.nodes.iter().enumerate() {
        let mu = op.apply_row(&u, i) - op.rhs[i];
        let gap = u[i] - obstacle;
        complementarity = complementarity.max(mu.min(gap).abs());
        if gap <= 0.0 {
            covered += 1;
            omega_mask.values[idx] = 1.0;
            vorticity.values[idx] = mu.max(0.0);
        }
    }
    Ok(VortexObstacleSolution {
        lambda,
        obstacle,
        field: op.to_field(&u),
        vorticity,
        omega_mask,
        domain_mask: op.domain_mask(),
        coverage: covered as f64 / op.nodes.len() as f64,
        complementarity,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_meissner_field_matches_bessel() {
        let h = 1.0 / 64.0;
        let s = solve_meissner_h0(&Domain::unit_disk(), h).unwrap();
        let i1 = crate::special::bessel_i0(1.0);
        let mut err: f64 = 0.0;
        for idx in 0..s.h0.len() {
            let v = s.h0.values[idx];
            assert!(v > 0.0 && v <= 1.0);
            if s.domain_mask.values[idx] > 0.5 {
                let p = s.h0.position(idx);
                err = err.max((v - crate::special::bessel_i0(p[0].hypot(p[1])) / i1).abs());
            }
        }
        assert!(err < 1e-4, "{err}");
        let oracle = unit_disk_lambda_omega();
        assert!((oracle - 2.379_23).abs() < 1e-4);
        assert!((s.lambda_omega / oracle - 1.0).abs() < 5e-3);
    }

    #[test]
    fn lambda_omega_converges_at_second_order() {
        let oracle = unit_disk_lambda_omega();
        let errs: Vec<f64> = [16.0, 32.0, 64.0]
            .iter()
            .map(|n| (solve_meissner_h0(&Domain::unit_disk(), 1.0 / n).unwrap().lambda_omega - oracle).abs())
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn boundary_nodes_hold_one() {
        let dom = Domain::Rectangle { lo: [0.0, 0.0], hi: [2.0, 1.0] };
        let s = solve_meissner_h0(&dom, 1.0 / 16.0).unwrap();
        for idx in 0..s.h0.len() {
            let p = s.h0.position(idx);
            let on_edge = p[0].abs() < 1e-12 || (p[0] - 2.0).abs() < 1e-12 || p[1].abs() < 1e-12 || (p[1] - 1.0).abs() < 1e-12;
            if on_edge {
                assert_eq!(s.h0.values[idx], 1.0);
                assert_eq!(s.domain_mask.values[idx], 0.0);
            }
        }
        assert!(s.h0.values.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn obstacle_regimes_on_the_disk() {
        let h = 1.0 / 32.0;
        let lo = unit_disk_lambda_omega();
        let below = solve_gl_obstacle(0.9 * lo, &Domain::unit_disk(), h).unwrap();
        assert_eq!(below.coverage, 0.0);
        assert!(below.vorticity.values.iter().all(|v| *v == 0.0));
        let mid = solve_gl_obstacle(2.0 * lo, &Domain::unit_disk(), h).unwrap();
        assert!(mid.coverage > 0.0);
        assert!(mid.complementarity < 1e-6, "{}", mid.complementarity);
        let target = 1.0 - 0.5 / mid.lambda;
        // interior of ω_λ: all four neighbours also coincident
        let m = &mid.omega_mask;
        let [nx, ny, _] = m.shape;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let inner = [(i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)].iter().all(|&(a, b)| m.values[m.index(a, b, 0)] > 0.5);
                if inner {
                    let v = mid.vorticity.values[m.index(i, j, 0)];
                    assert!((v / target - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn coincidence_set_grows_with_lambda() {
        let h = 1.0 / 32.0;
        let lo = unit_disk_lambda_omega();
        let mut prev: Option<GridField> = None;
        for f in [1.1, 1.5, 2.0, 4.0, 10.0] {
            let s = solve_gl_obstacle(f * lo, &Domain::unit_disk(), h).unwrap();
            if let Some(p) = &prev {
                for (a, b) in p.values.iter().zip(&s.omega_mask.values) {
                    assert!(b >= a);
                }
            }
            prev = Some(s.omega_mask);
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(solve_gl_obstacle(-1.0, &Domain::unit_disk(), 0.1).is_err());
        assert!(solve_meissner_h0(&Domain::Disk { center: [0.0, 0.0], radius: 0.0 }, 0.1).is_err());
        assert!(solve_meissner_h0(&Domain::unit_disk(), 0.0).is_err());
    }
}
