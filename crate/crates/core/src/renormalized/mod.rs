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

//! Renormalized energy of periodic jellium configurations.
//!
//! Field energies use the factor ½: for a field E = ∇H with
//! −ΔH = c_d(Σδ_{a_i} − m) the window energy is
//! lim_{η→0} ½∫_{cell∖∪B_η}|E|² + π n log η, and the periodic closed form is
//! W = (c_d / 2|T|) [Σ_{j≠k} G(a_j − a_k) + n R]. In two dimensions this is
//! (π/|T|)[…] and equals the smeared-charge energy 𝒲 exactly.

mod jellium;
mod smeared;
mod window;

pub use jellium::JelliumField;
pub use smeared::{
    form_factor, second_moment, self_energy_constants, smeared_self_energy, smeared_w, smeared_w_with, Shape,
    SmearedOptions, SmearingSpec,
};
pub use window::{window_w, window_w_with, WindowOptions};

use crate::error::{Error, Result};
use crate::geom;
use crate::lattice::{coulomb_constant, fundamental_domain_grid, EwaldParams, EwaldSum, Lattice, ModularParameter};
use serde::{Deserialize, Serialize};

/// Constants in force for a computed energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    /// c_d in −ΔG = c_d(δ − 1/|T|)
    pub coulomb_constant: f64,
    /// factor in front of ∫|E|²
    pub field_energy_factor: f64,
    pub kappa_d: Option<f64>,
    pub gamma_2: Option<f64>,
    /// exponent p of the η-extrapolation model value = L + c η^p
    pub extrapolation_order: Option<u32>,
    pub smearing_shape: Option<String>,
}

impl Convention {
    pub fn periodic(dim: usize) -> Self {
        Self {
            coulomb_constant: coulomb_constant(dim),
            field_energy_factor: 0.5,
            kappa_d: None,
            gamma_2: None,
            extrapolation_order: None,
            smearing_shape: None,
        }
    }
}

/// Energy per unit volume together with its η history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedValue {
    pub value: f64,
    /// (η, renormalized energy per unit volume at that η), η decreasing
    pub eta_trace: Vec<(f64, f64)>,
    pub extrapolation_residual: f64,
    pub convention: Convention,
    /// (η, per-cell energy without the log counterterm), when meaningful
    pub unrenormalized_trace: Vec<(f64, f64)>,
    /// certified bound on neglected lattice-sum tails
    pub tail_bound: f64,
}

/// W of a periodic configuration from the torus Green function.
pub fn periodic_w(lattice: &Lattice) -> Result<RenormalizedValue> {
    periodic_w_with(lattice, &EwaldParams::default())
}

pub fn periodic_w_with(lattice: &Lattice, params: &EwaldParams) -> Result<RenormalizedValue> {
    let ew = EwaldSum::new(lattice, params)?;
    periodic_w_ewald(&ew)
}

pub(crate) fn periodic_w_ewald(ew: &EwaldSum) -> Result<RenormalizedValue> {
    let lattice = ew.lattice();
    let pos = lattice.positions();
    let n = pos.len();
    let mut pair = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                pair += ew.green(geom::sub(pos[j], pos[k])).map_err(|_| {
                    Error::InvalidParameter(format!("offsets {j} and {k} coincide"))
                })?;
            }
        }
    }
    let dim = lattice.dim();
    let v = lattice.volume();
    let value = coulomb_constant(dim) / (2.0 * v) * (pair + n as f64 * ew.self_constant());
    Ok(RenormalizedValue {
        value,
        eta_trace: Vec::new(),
        extrapolation_residual: 0.0,
        convention: Convention::periodic(dim),
        unrenormalized_trace: Vec::new(),
        tail_bound: coulomb_constant(dim) / (2.0 * v) * (n * n) as f64 * ew.tail_bound,
    })
}

/// Least-squares fit value = L + c·η on the last three points (η decreasing).
pub fn extrapolate_eta(trace: &[(f64, f64)]) -> Result<(f64, f64)> {
    extrapolate_eta_order(trace, 1)
}

/// As [`extrapolate_eta`] with the model value = L + c·η^order.
pub fn extrapolate_eta_order(trace: &[(f64, f64)], order: u32) -> Result<(f64, f64)> {
    if trace.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 η points, got {}", trace.len())));
    }
    if trace.windows(2).any(|w| !(w[1].0 < w[0].0)) || trace.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::InvalidParameter("η values must be positive and strictly decreasing".into()));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("extrapolation order must be positive".into()));
    }
    let tail = &trace[trace.len() - 3..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0.powi(order as i32)).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let limit = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - limit - slope * x).abs()).fold(0.0, f64::max);
    Ok((limit, residual))
}

/// One point of a lattice scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanEntry {
    pub tau: ModularParameter,
    pub w: f64,
}

/// W over the truncated fundamental domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanReport {
    pub density: f64,
    pub resolution: usize,
    pub entries: Vec<ScanEntry>,
    /// minimiser, reported with Re τ ≥ 0 (W is invariant under τ ↦ −τ̄)
    pub argmin: ModularParameter,
    pub w_min: f64,
    pub w_square: f64,
    pub ewald_tolerance: f64,
}

pub fn lattice_scan(density: f64, resolution: usize) -> Result<ScanReport> {
    lattice_scan_with(density, resolution, &EwaldParams::default())
}

pub fn lattice_scan_with(density: f64, resolution: usize, params: &EwaldParams) -> Result<ScanReport> {
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!("scan resolution must be at least 8, got {resolution}")));
    }
    let grid = fundamental_domain_grid(resolution)?;
    let mut entries = Vec::with_capacity(grid.len());
    for tau in grid {
        let lat = Lattice::from_tau(tau, density)?;
        entries.push(ScanEntry { tau, w: periodic_w_with(&lat, params)?.value });
    }
    let best = entries.iter().min_by(|a, b| a.w.total_cmp(&b.w)).expect("grid is non-empty");
    let argmin = if best.tau.re < 0.0 { best.tau.mirrored() } else { best.tau };
    let w_min = best.w;
    let w_square = periodic_w_with(&Lattice::square(density)?, params)?.value;
    Ok(ScanReport { density, resolution, entries, argmin, w_min, w_square, ewald_tolerance: params.tail_tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn affine_and_constant_extrapolation() {
        let (l, r) = extrapolate_eta(&[(1.0, 2.1), (0.5, 2.05), (0.25, 2.025)]).unwrap();
        assert!((l - 2.0).abs() < 1e-14 && r < 1e-14);
        let (l, r) = extrapolate_eta(&[(0.3, 5.0), (0.2, 5.0), (0.1, 5.0)]).unwrap();
        assert!((l - 5.0).abs() < 1e-14 && r == 0.0);
        assert!(extrapolate_eta(&[(1.0, 1.0), (0.5, 1.0)]).is_err());
        let (l, _) = extrapolate_eta_order(&[(0.4, 1.0 + 0.16), (0.2, 1.04), (0.1, 1.01)], 2).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_beats_square_and_rotation_invariance() {
        let sq = periodic_w(&Lattice::square(1.0).unwrap()).unwrap().value;
        let tri = periodic_w(&Lattice::triangular(1.0).unwrap()).unwrap().value;
        assert!(tri < sq);
        let (c, s) = (0.37f64.cos(), 0.37f64.sin());
        let rot = Lattice::triangular(1.0).unwrap().rotated([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!((periodic_w(&rot).unwrap().value - tri).abs() < 1e-10);
    }

    #[test]
    fn supercell_representation_independence() {
        let sq = Lattice::square(1.0).unwrap();
        let a = periodic_w(&sq).unwrap().value;
        let b = periodic_w(&sq.supercell([2, 1, 1]).unwrap()).unwrap().value;
        let c = periodic_w(&sq.supercell([3, 2, 1]).unwrap()).unwrap().value;
        assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9, "{a} {b} {c}");
        // single offset at density 1: W = π R
        let r = crate::lattice::green_self_constant(&sq).unwrap();
        assert!((a - PI * r).abs() < 1e-12);
    }

    #[test]
    fn dilation_law() {
        // W(aΛ) = a^{-2} (W(Λ) + π m_Λ log a) in 2D
        let sq = Lattice::triangular(1.0).unwrap();
        let w1 = periodic_w(&sq).unwrap().value;
        let w4 = periodic_w(&Lattice::triangular(0.25).unwrap()).unwrap().value;
        assert!((w4 - 0.25 * (w1 + PI * 2f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn coincident_offsets_rejected() {
        let bad = Lattice::new(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.0, 0.0], vec![1e-13, 0.0]]);
        assert!(bad.is_err());
    }
}
