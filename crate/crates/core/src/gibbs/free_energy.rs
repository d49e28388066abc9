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


//! Thermodynamic integration of log Z_n^β from a nearly ideal gas at small β.
//!
//! log Z(β) = log Z(β_0) − ∫_{β_0}^{β} ⟨H_n⟩_b db, integrated in log b on a
//! geometric grid. At β_0 the confinement n·s|x|² alone gives independent
//! Gaussian points, and the pair interaction is folded in by importance
//! sampling: log Z(β_0) = log Z_ideal + log E[e^{−β_0 I}] with I the pair
//! sum. β_0 is chosen so that β_0·sd(I) ≈ 1/4, which keeps the weights
//! well conditioned.

use super::chain::{run_chain, ChainOptions};
use crate::coulomb_gas::{energy_flat, Confinement};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::potential::PotentialSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeEnergyOptions {
    /// explicit increasing β grid ending at the target β; geometric from an
    /// automatic β_0 when absent
    pub beta_grid: Option<Vec<f64>>,
    /// grid size for the automatic grid (odd sizes use Simpson's rule)
    pub points: usize,
    /// chain settings per grid point; `seed` is offset by the grid index
    pub chain: ChainOptions,
    pub reference_samples: usize,
    pub seed: u64,
}

impl Default for FreeEnergyOptions {
    fn default() -> Self {
        Self {
            beta_grid: None,
            points: 25,
            chain: ChainOptions { sweeps: 20_000, burn_in: 2_000, ..Default::default() },
            reference_samples: 20_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub mean_energy: f64,
    pub standard_error: f64,
    pub autocorrelation_time: f64,
    /// the chain's autocorrelation window did not converge
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub beta: f64,
    pub log_z: f64,
    /// statistical standard error of `log_z`
    pub log_z_error: f64,
    /// Richardson estimate from Simpson on the full and the every-other grid
    /// (|Simpson − trapezoid| when the grid does not allow it)
    pub quadrature_error: f64,
    /// (β, log Z(β)) along the grid, trapezoid-accumulated
    pub log_z_path: Vec<(f64, f64)>,
    pub reference_beta: f64,
    pub reference_log_z: f64,
    pub reference_error: f64,
    pub grid: Vec<GridPoint>,
    /// −log Z / (β n²)
    pub leading: f64,
    /// (−log Z / β + (n/2) log n) / n²  (d = 2)
    pub corrected: f64,
    pub flagged: bool,
}

struct NoConfinement(usize);

impl Confinement for NoConfinement {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, _: Vec3) -> f64 {
        0.0
    }
    fn gradient(&self, _: Vec3) -> Vec3 {
        [0.0; 3]
    }
}

/// Pair sums of independent centred Gaussian configurations with unit
/// per-coordinate variance.
fn gaussian_pair_sums(n: usize, dim: usize, samples: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let zero = NoConfinement(dim);
    (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
            energy_flat(dim, &x, &zero)
        })
        .collect()
}

// pair sum of the unit-variance sample rescaled to standard deviation σ
fn rescale(dim: usize, pairs: f64, n: usize, sigma: f64) -> f64 {
    if dim == 2 {
        pairs - (n * (n - 1)) as f64 * sigma.ln()
    } else {
        pairs / sigma
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0);
    (m, var.sqrt())
}

/// (β_0, log Z(β_0), standard error) for V = s|x|² with β_0 chosen automatically.
fn reference(n: usize, dim: usize, scale: f64, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let base = gaussian_pair_sums(n, dim, samples.max(100), &mut rng);
    let sigma_of = |b: f64| (1.0 / (2.0 * b * n as f64 * scale)).sqrt();
    let mut beta0: f64 = 1.0;
    let exponent = if dim == 2 { 1.0 } else { 2.0 / 3.0 };
    for _ in 0..4 {
        let s = sigma_of(beta0);
        let scaled: Vec<f64> = base.iter().map(|p| beta0 * rescale(dim, *p, n, s)).collect();
        let (_, sd) = mean_sd(&scaled);
        if sd == 0.0 {
            break;
        }
        beta0 *= (0.25 / sd).powf(exponent);
    }
    reference_at(n, dim, scale, beta0, samples, seed)
}

/// Geometric grid of `points` values from `start` to `end`.
pub fn geometric_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    let k = points.max(2);
    (0..k).map(|i| start * (end / start).powf(i as f64 / (k - 1) as f64)).collect()
}

/// Estimates log Z_n^β by thermodynamic integration (V = s|x|² only, where
/// the ideal-gas reference is Gaussian).
pub fn free_energy_leading(n: usize, beta: f64, v: &PotentialSpec, opts: &FreeEnergyOptions) -> Result<FreeEnergyEstimate> {
    let scale = v
        .is_centered_quadratic()
        .ok_or_else(|| Error::InvalidParameter("free-energy integration needs V = s|x|² centred at 0".into()))?;
    if n < 2 || !(beta > 0.0) {
        return Err(Error::InvalidParameter("need n ≥ 2 and β > 0".into()));
    }
    let dim = v.dim();
    let (beta0, ref_log_z, ref_err) = match &opts.beta_grid {
        Some(g) => {
            let b0 = *g.first().ok_or_else(|| Error::InvalidParameter("empty β grid".into()))?;
            reference_at(n, dim, scale, b0, opts.reference_samples, opts.seed)?
        }
        None => reference(n, dim, scale, opts.reference_samples, opts.seed)?,
    };
    let grid = match &opts.beta_grid {
        Some(g) => g.clone(),
        None => geometric_grid(beta0, beta, opts.points),
    };
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(Error::InvalidParameter("β grid must be positive and increasing".into()));
    }
    if ((grid[grid.len() - 1] - beta) / beta).abs() > 1e-12 {
        return Err(Error::InvalidParameter("β grid must end at the target β".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut warm = None;
    for (k, &b) in grid.iter().enumerate() {
        let chain = ChainOptions { seed: opts.chain.seed.wrapping_add(opts.seed).wrapping_add(k as u64), initial: warm.take(), ..opts.chain.clone() };
        let stats = run_chain(n, b, v, &chain)?;
        let flagged = stats.warnings.iter().any(|w| w.contains("autocorrelation"));
        let se = if flagged {
            // the window cap bounds τ by N/10; use it as a conservative τ
            let (_, sd) = mean_sd(&stats.energy_trace);
            sd * 0.1f64.sqrt()
        } else {
            stats.energy_standard_error
        };
        points.push(GridPoint {
            beta: b,
            mean_energy: stats.mean_energy,
            standard_error: se,
            autocorrelation_time: stats.autocorrelation_time,
            flagged,
        });
        warm = Some(stats.final_config);
    }
    // ∫ b⟨H⟩_b d(log b)
    let t: Vec<f64> = grid.iter().map(|b| b.ln()).collect();
    let f: Vec<f64> = points.iter().map(|p| p.beta * p.mean_energy).collect();
    let fe: Vec<f64> = points.iter().map(|p| p.beta * p.standard_error).collect();
    let (trap, trap_w) = trapezoid(&t, &f);
    let (integral, weights) = simpson(&t, &f).unwrap_or((trap, trap_w.clone()));
    let coarse_t: Vec<f64> = t.iter().step_by(2).cloned().collect();
    let coarse_f: Vec<f64> = f.iter().step_by(2).cloned().collect();
    let quadrature_error = match (t.len() % 4 == 1, simpson(&coarse_t, &coarse_f)) {
        (true, Some((coarse, _))) => (integral - coarse).abs() / 15.0,
        _ => (integral - trap).abs(),
    };
    let mut log_z_path = vec![(grid[0], ref_log_z)];
    let mut acc = ref_log_z;
    for k in 1..grid.len() {
        acc -= 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        log_z_path.push((grid[k], acc));
    }
    let stat = weights.iter().zip(&fe).map(|(w, e)| (w * e).powi(2)).sum::<f64>().sqrt();
    let log_z = ref_log_z - integral;
    let nf = n as f64;
    let leading = -log_z / (beta * nf * nf);
    let corrected = if dim == 2 { (-log_z / beta + 0.5 * nf * nf.ln()) / (nf * nf) } else { leading };
    Ok(FreeEnergyEstimate {
        n,
        beta,
        log_z,
        log_z_error: (stat * stat + ref_err * ref_err).sqrt(),
        quadrature_error,
        log_z_path,
        reference_beta: grid[0],
        reference_log_z: ref_log_z,
        reference_error: ref_err,
        flagged: points.iter().any(|p| p.flagged),
        grid: points,
        leading,
        corrected,
    })
}

/// log Z(β_0) and its standard error at a given β_0.
fn reference_at(n: usize, dim: usize, scale: f64, beta0: f64, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let base = gaussian_pair_sums(n, dim, samples.max(100), &mut rng);
    let s = (1.0 / (2.0 * beta0 * n as f64 * scale)).sqrt();
    let a: Vec<f64> = base.iter().map(|p| -beta0 * rescale(dim, *p, n, s)).collect();
    let top = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = a.iter().map(|x| (x - top).exp()).collect();
    let (mw, sw) = mean_sd(&w);
    if !(mw > 0.0) {
        return Err(Error::Accuracy("reference importance weights vanished".into()));
    }
    let ideal = n as f64 * 0.5 * dim as f64 * (PI / (beta0 * n as f64 * scale)).ln();
    Ok((beta0, ideal + top + mw.ln(), sw / (mw * (w.len() as f64).sqrt())))
}

fn trapezoid(t: &[f64], f: &[f64]) -> (f64, Vec<f64>) {
    let mut w = vec![0.0; t.len()];
    for k in 1..t.len() {
        let h = t[k] - t[k - 1];
        w[k - 1] += 0.5 * h;
        w[k] += 0.5 * h;
    }
    (w.iter().zip(f).map(|(a, b)| a * b).sum(), w)
}

// composite Simpson on an odd number of uniformly spaced nodes
fn simpson(t: &[f64], f: &[f64]) -> Option<(f64, Vec<f64>)> {
    let k = t.len();
    if k < 3 || k % 2 == 0 {
        return None;
    }
    let h = (t[k - 1] - t[0]) / (k - 1) as f64;
    if t.windows(2).any(|p| ((p[1] - p[0]) - h).abs() > 1e-9 * h.abs()) {
        return None;
    }
    let w: Vec<f64> = (0..k)
        .map(|i| {
            let c = if i == 0 || i == k - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    Some((w.iter().zip(f).map(|(a, b)| a * b).sum(), w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_rules() {
        let t: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let f: Vec<f64> = t.iter().map(|x| x * x * x).collect();
        let (s, _) = simpson(&t, &f).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
        assert!(simpson(&t[..8], &f[..8]).is_none());
        let (tr, _) = trapezoid(&[0.0, 1.0], &[1.0, 3.0]);
        assert_eq!(tr, 2.0);
    }

    // Two points in the plane have a closed-form partition function.
    #[test]
    fn two_point_reference_matches_closed_form() {
        let (beta0, lz, err) = reference_at(2, 2, 1.0, 0.05, 200_000, 1).unwrap();
        // Z = ∫∫ |x−y|^{2β} e^{−2β(|x|²+|y|²)}; with u = x−y, w = x+y:
        // Z = (1/4)·∫|u|^{2β} e^{−β|u|²} du · ∫ e^{−β|w|²} dw
        let b = beta0;
        let gamma = statrs::function::gamma::gamma(1.0 + b);
        let exact = (0.25 * PI * gamma / b.powf(1.0 + b) * PI / b).ln();
        assert!((lz - exact).abs() < 5.0 * err + 1e-3, "{lz} vs {exact} ± {err}");
    }
}
