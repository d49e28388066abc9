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


//! Multi-start BFGS minimization of the discrete energy (weighted Fekete
//! points) and of the local energy with a quadratic confinement.

use super::config::PointConfiguration;
use super::energy::{energy_change, energy_flat, gradient_flat, Confinement, QuadraticForm};
use crate::equilibrium::{radial_support_estimate, solve_equilibrium_measure, EquilibriumMeasure, GridSpec};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::potential::PotentialSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub starts: usize,
    /// stop when the largest gradient component is at most this
    pub tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// grid used to solve μ_0 for the initial samples
    pub grid_spacing: f64,
    /// energies within this of the best count as the same minimum
    pub consensus_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { starts: 8, tol: 1e-8, seed: 0, max_iterations: 20_000, grid_spacing: 1.0 / 32.0, consensus_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: usize,
    /// None when the start failed
    pub energy: Option<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// every accepted step lowered the energy
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizationDiagnostics {
    /// "equilibrium" or "uniform"
    pub initialization: String,
    pub outcomes: Vec<StartOutcome>,
    pub best_start: usize,
    pub gradient_norm: f64,
    /// max − min energy over converged starts
    pub spread: f64,
    /// converged starts within the consensus tolerance of the best energy
    pub best_hits: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimizer {
    pub config: PointConfiguration,
    pub energy: f64,
    pub diagnostics: MinimizationDiagnostics,
}

/// Multi-start minimization of H_n. Starts are drawn from μ_0 solved at
/// `opts.grid_spacing`; if that solve fails they are uniform on a ball.
pub fn minimize_fekete(n: usize, v: &PotentialSpec, opts: &MinimizeOptions) -> Result<Minimizer> {
    let mu0 = solve_equilibrium_measure(v, &GridSpec::new(opts.grid_spacing)).ok();
    minimize_fekete_from(n, v, mu0.as_ref(), opts)
}

/// As [`minimize_fekete`] with a caller-supplied μ_0.
pub fn minimize_fekete_from(
    n: usize,
    v: &PotentialSpec,
    mu0: Option<&EquilibriumMeasure>,
    opts: &MinimizeOptions,
) -> Result<Minimizer> {
    let dim = v.dim();
    let init = match mu0 {
        Some(mu) if mu.dim == dim => Init::Measure(mu.sampler()),
        _ => Init::Ball { radius: radial_support_estimate(v, [0.0; 3])?, center: [0.0; 3] },
    };
    multi_start(n, dim, v, &init, opts)
}

/// Multi-start minimization of −Σ log|x_i − x_j| + n Σ Q(x_i) in the plane.
pub fn minimize_local_wn(n: usize, q: &QuadraticForm, opts: &MinimizeOptions) -> Result<Minimizer> {
    let m = q.matrix();
    let smallest = 0.5 * (m[0][0] + m[1][1]) - (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
    multi_start(n, 2, q, &Init::Ball { radius: 1.0 / smallest.sqrt(), center: [0.0; 3] }, opts)
}

enum Init {
    Measure(crate::equilibrium::MeasureSampler),
    Ball { radius: f64, center: Vec3 },
}

impl Init {
    fn label(&self) -> &'static str {
        match self {
            Init::Measure(_) => "equilibrium",
            Init::Ball { .. } => "uniform",
        }
    }

    fn draw(&self, dim: usize, rng: &mut ChaCha8Rng) -> Vec3 {
        match self {
            Init::Measure(s) => {
                let u = rng.gen::<f64>();
                let cell = [rng.gen(), rng.gen(), rng.gen()];
                let sign = [rng.gen(), rng.gen(), rng.gen()];
                s.sample(u, cell, sign)
            }
            Init::Ball { radius, center } => loop {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(dim) {
                    *c = rng.gen_range(-1.0..1.0);
                }
                if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                    let mut x = *center;
                    for a in 0..dim {
                        x[a] += radius * p[a];
                    }
                    break x;
                }
            },
        }
    }
}

fn multi_start(n: usize, dim: usize, v: &dyn Confinement, init: &Init, opts: &MinimizeOptions) -> Result<Minimizer> {
    if n == 0 || opts.starts == 0 {
        return Err(Error::InvalidParameter("need n ≥ 1 and at least one start".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("gradient tolerance must be positive".into()));
    }
    let mut outcomes = Vec::with_capacity(opts.starts);
    let mut best: Option<(usize, Vec<f64>, f64, f64)> = None;
    for s in 0..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(s as u64);
        let x0: Vec<f64> = (0..n).flat_map(|_| init.draw(dim, &mut rng)[..dim].to_vec()).collect();
        let run = bfgs(dim, x0, v, opts);
        let energy = run.converged.then(|| energy_flat(dim, &run.x, v));
        outcomes.push(StartOutcome {
            start: s,
            energy,
            gradient_norm: run.gradient_norm,
            iterations: run.iterations,
            restarts: run.restarts,
            monotone: run.history.windows(2).all(|w| w[1] <= w[0]) && run.history.first().map_or(true, |e| *e <= 0.0),
        });
        if let Some(e) = energy {
            if best.as_ref().map_or(true, |b| e < b.2) {
                best = Some((s, run.x, e, run.gradient_norm));
            }
        }
    }
    let (best_start, x, energy, gradient_norm) = best.ok_or_else(|| {
        Error::Convergence(format!("all {} starts failed to reach gradient norm {:e}", opts.starts, opts.tol))
    })?;
    let energies: Vec<f64> = outcomes.iter().filter_map(|o| o.energy).collect();
    let spread = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - energy;
    let best_hits = energies.iter().filter(|e| **e - energy <= opts.consensus_tolerance).count();
    Ok(Minimizer {
        config: PointConfiguration::from_flat(dim, &x)?,
        energy,
        diagnostics: MinimizationDiagnostics {
            initialization: init.label().into(),
            outcomes,
            best_start,
            gradient_norm,
            spread,
            best_hits,
        },
    })
}

pub(crate) struct LocalRun {
    pub x: Vec<f64>,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// energy after each accepted step, relative to the start
    pub history: Vec<f64>,
}

/// A ring of points at similar distance from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub radius: f64,
    pub count: usize,
}

/// Groups points by radius, starting a new shell wherever consecutive sorted
/// radii differ by more than `min_gap`.
pub fn radial_shells(cfg: &PointConfiguration, min_gap: f64) -> Vec<Shell> {
    let mut r: Vec<f64> = cfg.points().iter().map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
    r.sort_by(f64::total_cmp);
    let mut shells: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in r {
        match shells.last_mut() {
            Some(s) if x - last <= min_gap => {
                s.0 += x;
                s.1 += 1;
            }
            _ => shells.push((x, 1)),
        }
        last = x;
    }
    shells.into_iter().map(|(sum, count)| Shell { radius: sum / count as f64, count }).collect()
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, c| m.max(c.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS on the inverse Hessian with Armijo backtracking. Energy changes are
/// evaluated pairwise so that the sufficient-decrease test stays meaningful
/// near the minimum. A failed line search resets the curvature memory once;
/// a second consecutive failure ends the run.
pub(crate) fn bfgs(dim: usize, mut x: Vec<f64>, v: &dyn Confinement, opts: &MinimizeOptions) -> LocalRun {
    const ARMIJO: f64 = 1e-4;
    let len = x.len();
    let n = len / dim;
    // cap on a single point displacement, about half the typical spacing
    let radius = x.chunks(dim).map(|p| dot(p, p)).fold(0.0, f64::max).sqrt().max(1e-3);
    let max_step = radius / (n as f64).powf(1.0 / dim as f64);
    let mut g = gradient_flat(dim, &x, v);
    let mut hinv: Option<Vec<f64>> = None;
    let mut level = 0.0;
    let mut history = Vec::new();
    let mut restarts = 0;
    let mut fresh = true;
    let mut it = 0;
    loop {
        let gn = max_norm(&g);
        if gn <= opts.tol {
            return LocalRun { x, converged: true, gradient_norm: gn, iterations: it, restarts, history };
        }
        if it >= opts.max_iterations || !gn.is_finite() {
            return LocalRun { x, converged: false, gradient_norm: gn, iterations: it, restarts, history };
        }
        it += 1;
        let mut p: Vec<f64> = match &hinv {
            Some(h) => (0..len).map(|i| -dot(&h[i * len..(i + 1) * len], &g)).collect(),
            None => g.iter().map(|c| -c).collect(),
        };
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            hinv = None;
            p = g.iter().map(|c| -c).collect();
            slope = dot(&p, &g);
        }
        let longest = p.chunks(dim).map(|q| dot(q, q)).fold(0.0, f64::max).sqrt();
        let mut alpha = if longest > max_step { max_step / longest } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let delta = energy_change(dim, &x, &p, alpha, v);
            if delta <= ARMIJO * alpha * slope {
                accepted = Some(delta);
                break;
            }
            alpha *= 0.5;
        }
        let Some(delta) = accepted else {
            if fresh {
                return LocalRun { x, converged: false, gradient_norm: gn, iterations: it, restarts, history };
            }
            restarts += 1;
            hinv = None;
            fresh = true;
            continue;
        };
        fresh = false;
        level += delta;
        history.push(level);
        let s: Vec<f64> = p.iter().map(|c| alpha * c).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let g_new = gradient_flat(dim, &x, v);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        g = g_new;
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            let h = hinv.get_or_insert_with(|| {
                let scale = sy / dot(&y, &y);
                let mut m = vec![0.0; len * len];
                for i in 0..len {
                    m[i * len + i] = scale;
                }
                m
            });
            let hy: Vec<f64> = (0..len).map(|i| dot(&h[i * len..(i + 1) * len], &y)).collect();
            let rho = 1.0 / sy;
            let coef = rho + rho * rho * dot(&y, &hy);
            for i in 0..len {
                let row = &mut h[i * len..(i + 1) * len];
                for j in 0..len {
                    row[j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_radius(m: &Minimizer) -> (f64, f64, f64) {
        let p = m.config.points();
        let r0 = (p[0][0].powi(2) + p[0][1].powi(2)).sqrt();
        let r1 = (p[1][0].powi(2) + p[1][1].powi(2)).sqrt();
        let sum = ((p[0][0] + p[1][0]).powi(2) + (p[0][1] + p[1][1]).powi(2)).sqrt();
        (r0, r1, sum)
    }

    #[test]
    fn two_point_minimizer_is_antipodal() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let opts = MinimizeOptions { starts: 3, ..Default::default() };
        let m = minimize_fekete(2, &v, &opts).unwrap();
        let (r0, r1, sum) = pair_radius(&m);
        assert!((r0 - 0.5).abs() < 1e-6 && (r1 - 0.5).abs() < 1e-6 && sum < 1e-6);
        assert!((m.energy - 1.0).abs() < 1e-12);
        assert_eq!(m.diagnostics.initialization, "equilibrium");
    }

    #[test]
    fn local_energy_minimizers() {
        let opts = MinimizeOptions { starts: 3, ..Default::default() };
        let one = minimize_local_wn(1, &QuadraticForm::identity(), &opts).unwrap();
        assert!(one.config.points()[0].iter().all(|c| c.abs() < 1e-8));
        let two = minimize_local_wn(2, &QuadraticForm::identity(), &opts).unwrap();
        let (r0, r1, sum) = pair_radius(&two);
        assert!((r0 - 0.5).abs() < 1e-6 && (r1 - 0.5).abs() < 1e-6 && sum < 1e-6);
        let aniso = minimize_local_wn(2, &QuadraticForm::diagonal(1.0, 4.0).unwrap(), &opts).unwrap();
        let p = aniso.config.points();
        assert!(p[0][1].abs() < 1e-6 && (p[0][0].abs() - 0.5).abs() < 1e-6, "{p:?}");
        assert!((aniso.energy - 1.0).abs() < 1e-10);
    }

    #[test]
    fn accepted_steps_lower_the_energy() {
        let v = PotentialSpec::quadratic(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let run = bfgs(3, x, &v, &MinimizeOptions::default());
        assert!(run.converged);
        assert!(run.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(run.history[0] < 0.0);
    }

    #[test]
    fn uniform_fallback_and_failures() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let m = minimize_fekete_from(5, &v, None, &MinimizeOptions { starts: 2, ..Default::default() }).unwrap();
        assert_eq!(m.diagnostics.initialization, "uniform");
        let opts = MinimizeOptions { starts: 2, max_iterations: 1, ..Default::default() };
        assert!(matches!(minimize_fekete_from(10, &v, None, &opts), Err(Error::Convergence(_))));
        assert!(minimize_fekete_from(0, &v, None, &opts).is_err());
    }

    #[test]
    fn minimizer_points_stay_on_the_support() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let mu0 = solve_equilibrium_measure(&v, &GridSpec::new(1.0 / 32.0)).unwrap();
        let m = minimize_fekete_from(30, &v, Some(&mu0), &MinimizeOptions { starts: 2, ..Default::default() }).unwrap();
        for p in m.config.points() {
            assert!(mu0.distance_to_support(*p) <= 2.0 * mu0.density.spacing);
        }
    }

    #[test]
    fn shells_group_by_radius() {
        let pts = vec![[0.0; 3], [0.5, 0.0, 0.0], [0.0, -0.51, 0.0], [0.9, 0.1, 0.0]];
        let cfg = PointConfiguration::new(2, pts).unwrap();
        let shells = radial_shells(&cfg, 0.1);
        let counts: Vec<usize> = shells.iter().map(|s| s.count).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        assert!((shells[1].radius - 0.505).abs() < 1e-12);
    }
}
