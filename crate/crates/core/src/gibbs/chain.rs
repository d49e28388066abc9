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


//! Single-particle random-walk Metropolis chain for the density
//! proportional to exp(−β H_n).

use super::observables::{integrated_autocorrelation, psi6};
use crate::coulomb_gas::{energy_flat, kernel, Confinement, PointConfiguration};
use crate::equilibrium::{radial_support_estimate, GridField};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::potential::PotentialSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Chain position plus the sampler's own bookkeeping.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub config: PointConfiguration,
    pub beta: f64,
    /// half-width of the uniform proposal cube
    pub step_scale: f64,
    pub rng_seed: u64,
    pub accepted: u64,
    pub proposed: u64,
    energy: f64,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(config: PointConfiguration, beta: f64, step_scale: f64, rng_seed: u64, v: &dyn Confinement) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("β must be finite and non-negative, got {beta}")));
        }
        if !(step_scale > 0.0) || !step_scale.is_finite() {
            return Err(Error::InvalidParameter(format!("step scale must be positive, got {step_scale}")));
        }
        let energy = crate::coulomb_gas::hamiltonian(&config, v)?;
        Ok(Self { config, beta, step_scale, rng_seed, accepted: 0, proposed: 0, energy, rng: ChaCha8Rng::seed_from_u64(rng_seed) })
    }

    /// Running value of H_n, updated by the accepted energy changes.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn acceptance_ratio(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Recomputes H_n from scratch and returns the drift of the running value.
    pub fn resync(&mut self, v: &dyn Confinement) -> f64 {
        let exact = energy_flat(self.config.dim(), &self.config.flat(), v);
        let drift = (exact - self.energy).abs();
        self.energy = exact;
        drift
    }
}

/// Change of H_n when point `i` moves to `y`, in O(n).
pub fn move_energy(cfg: &PointConfiguration, i: usize, y: Vec3, v: &dyn Confinement) -> f64 {
    let d = cfg.dim();
    let pts = cfg.points();
    let x = pts[i];
    let mut pairs = 0.0;
    for (j, p) in pts.iter().enumerate() {
        if j == i {
            continue;
        }
        let mut r2_new = 0.0;
        let mut r2_old = 0.0;
        for a in 0..d {
            r2_new += (y[a] - p[a]) * (y[a] - p[a]);
            r2_old += (x[a] - p[a]) * (x[a] - p[a]);
        }
        if r2_new == 0.0 {
            return f64::INFINITY;
        }
        pairs += if d == 2 { -0.5 * (r2_new / r2_old).ln() } else { kernel(3, r2_new) - kernel(3, r2_old) };
    }
    2.0 * pairs + pts.len() as f64 * (v.value(y) - v.value(x))
}

/// Metropolis acceptance min(1, e^{−β ΔH}).
pub fn acceptance_probability(beta: f64, delta: f64) -> f64 {
    if delta.is_nan() || delta == f64::INFINITY {
        return 0.0;
    }
    if beta == 0.0 || delta <= 0.0 {
        1.0
    } else {
        (-beta * delta).exp()
    }
}

/// Density of the one-step kernel between configurations that differ in
/// exactly one point (0 otherwise; the rejection mass on the diagonal is not
/// included).
pub fn transition_density(from: &PointConfiguration, to: &PointConfiguration, beta: f64, step_scale: f64, v: &dyn Confinement) -> f64 {
    let d = from.dim();
    if to.dim() != d || to.len() != from.len() {
        return 0.0;
    }
    let moved: Vec<usize> = (0..from.len()).filter(|&i| from.points()[i] != to.points()[i]).collect();
    let [i] = moved[..] else { return 0.0 };
    let y = to.points()[i];
    if (0..d).any(|a| (y[a] - from.points()[i][a]).abs() > step_scale) {
        return 0.0;
    }
    let proposal = 1.0 / (from.len() as f64 * (2.0 * step_scale).powi(d as i32));
    proposal * acceptance_probability(beta, move_energy(from, i, y, v))
}

/// One proposal: a uniformly chosen point moves uniformly within the cube of
/// half-width `step_scale`. Returns whether the move was accepted.
pub fn metropolis_step(state: &mut ChainState, v: &dyn Confinement) -> bool {
    let n = state.config.len();
    let d = state.config.dim();
    let i = state.rng.gen_range(0..n);
    let mut y = state.config.points()[i];
    for c in y.iter_mut().take(d) {
        *c += state.step_scale * state.rng.gen_range(-1.0..1.0);
    }
    let u: f64 = state.rng.gen();
    state.proposed += 1;
    let delta = move_energy(&state.config, i, y, v);
    if u < acceptance_probability(state.beta, delta) {
        state.config.points_mut()[i] = y;
        state.energy += delta;
        state.accepted += 1;
        true
    } else {
        false
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainOptions {
    /// sweeps recorded after burn-in (one sweep = n proposals)
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// raise β geometrically from min(β, 2) during the first half of burn-in
    pub anneal: bool,
    pub initial_step: f64,
    /// keep a copy of the configuration every this many sweeps (0: never)
    pub snapshot_every: usize,
    /// evaluate ψ6 every this many sweeps (0: never; d = 2 only)
    pub psi6_every: usize,
    /// radius of the ψ6 core; defaults to 0.8 × the radial support estimate
    pub psi6_core: Option<f64>,
    pub histogram_cells: usize,
    /// full energy recomputation period in proposals
    pub resync_every: u64,
    pub initial: Option<PointConfiguration>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            sweeps: 10_000,
            burn_in: 2_000,
            seed: 0,
            anneal: false,
            initial_step: 0.1,
            snapshot_every: 0,
            psi6_every: 0,
            psi6_core: None,
            histogram_cells: 64,
            resync_every: 100_000,
            initial: None,
        }
    }
}

/// Statistics of the recorded part of a chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainStats {
    /// H_n after each recorded sweep
    pub energy_trace: Vec<f64>,
    pub psi6_trace: Vec<f64>,
    /// mean point count per cell; sums to n
    pub density_histogram: GridField,
    /// integrated autocorrelation time of the energy trace, in sweeps
    pub autocorrelation_time: f64,
    pub mean_energy: f64,
    /// standard error of the mean energy using the autocorrelation time
    pub energy_standard_error: f64,
    pub acceptance: f64,
    pub step_scale: f64,
    pub max_resync_drift: f64,
    pub snapshots: Vec<PointConfiguration>,
    pub final_config: PointConfiguration,
    pub warnings: Vec<String>,
}

/// Runs burn-in (with step tuning towards 30–50% acceptance) and records
/// `opts.sweeps` sweeps.
pub fn run_chain(n: usize, beta: f64, v: &PotentialSpec, opts: &ChainOptions) -> Result<ChainStats> {
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    if opts.sweeps == 0 {
        return Err(Error::InvalidParameter("need at least one recorded sweep".into()));
    }
    let d = v.dim();
    let radius = radial_support_estimate(v, [0.0; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(u64::MAX);
    let config = match &opts.initial {
        Some(c) if c.len() == n && c.dim() == d => c.clone(),
        Some(_) => return Err(Error::InvalidParameter("initial configuration has the wrong size or dimension".into())),
        None => {
            let pts = (0..n)
                .map(|_| loop {
                    let mut p = [0.0; 3];
                    for c in p.iter_mut().take(d) {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                    if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                        break p.map(|c| c * radius);
                    }
                })
                .collect();
            PointConfiguration::new(d, pts)?
        }
    };
    let mut state = ChainState::new(config, beta, opts.initial_step, opts.seed, v)?;
    let mut warnings = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut since_sync = 0u64;
    let steps_per_sweep = n as u64;
    let mut sync = |state: &mut ChainState, steps: u64, max_drift: &mut f64| {
        since_sync += steps;
        if since_sync >= opts.resync_every {
            *max_drift = max_drift.max(state.resync(v));
            since_sync = 0;
        }
    };

    // burn-in
    let block = 20usize;
    let anneal_sweeps = if opts.anneal { opts.burn_in / 2 } else { 0 };
    let beta_start = beta.min(2.0);
    let mut sweep = 0;
    while sweep < opts.burn_in {
        if sweep < anneal_sweeps && beta > beta_start {
            let t = sweep as f64 / anneal_sweeps as f64;
            state.beta = beta_start * (beta / beta_start).powf(t);
        } else {
            state.beta = beta;
        }
        let (a0, p0) = (state.accepted, state.proposed);
        let len = block.min(opts.burn_in - sweep);
        for _ in 0..len as u64 * steps_per_sweep {
            metropolis_step(&mut state, v);
        }
        sync(&mut state, len as u64 * steps_per_sweep, &mut max_drift);
        let rate = (state.accepted - a0) as f64 / (state.proposed - p0).max(1) as f64;
        if rate < 0.3 {
            state.step_scale *= if rate < 0.1 { 0.5 } else { 0.8 };
        } else if rate > 0.5 {
            state.step_scale = (state.step_scale * if rate > 0.8 { 2.0 } else { 1.25 }).min(4.0 * radius);
        }
        sweep += len;
    }
    state.beta = beta;
    max_drift = max_drift.max(state.resync(v));

    // recording
    state.accepted = 0;
    state.proposed = 0;
    let half = 1.5 * radius;
    let cells = opts.histogram_cells.max(2);
    let spacing = 2.0 * half / cells as f64;
    let mut shape = [1usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..d {
        shape[a] = cells;
        origin[a] = -half + 0.5 * spacing;
    }
    let mut histogram = GridField::new(d, origin, spacing, shape, [false; 3])?;
    let mut counts = vec![0u64; histogram.len()];
    let core = opts.psi6_core.unwrap_or(0.8 * radius);
    let mut energy_trace = Vec::with_capacity(opts.sweeps);
    let mut psi6_trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut psi6_failed = false;
    for s in 1..=opts.sweeps {
        for _ in 0..steps_per_sweep {
            metropolis_step(&mut state, v);
        }
        sync(&mut state, steps_per_sweep, &mut max_drift);
        energy_trace.push(state.energy());
        for p in state.config.points() {
            let mut c = [0usize; 3];
            for a in 0..d {
                let k = ((p[a] - origin[a]) / spacing).round();
                c[a] = k.clamp(0.0, (cells - 1) as f64) as usize;
            }
            counts[histogram.index(c[0], c[1], c[2])] += 1;
        }
        if opts.snapshot_every > 0 && s % opts.snapshot_every == 0 {
            snapshots.push(state.config.clone());
        }
        if d == 2 && opts.psi6_every > 0 && s % opts.psi6_every == 0 {
            match psi6(&state.config, core) {
                Ok(p) => psi6_trace.push(p),
                Err(e) if !psi6_failed => {
                    psi6_failed = true;
                    warnings.push(format!("ψ6 skipped: {e}"));
                }
                Err(_) => {}
            }
        }
    }
    max_drift = max_drift.max(state.resync(v));
    for (h, c) in histogram.values.iter_mut().zip(&counts) {
        *h = *c as f64 / opts.sweeps as f64;
    }
    let acceptance = state.acceptance_ratio();
    if !(0.2..=0.6).contains(&acceptance) {
        warnings.push(format!("acceptance {acceptance:.3} outside the tuned band"));
    }
    let (tau, tau_ok) = integrated_autocorrelation(&energy_trace);
    if !tau_ok {
        warnings.push(format!("energy autocorrelation window not reached; τ ≥ {tau:.1} sweeps"));
    }
    let m = energy_trace.len() as f64;
    let mean_energy = energy_trace.iter().sum::<f64>() / m;
    let var = energy_trace.iter().map(|e| (e - mean_energy).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(ChainStats {
        energy_trace,
        psi6_trace,
        density_histogram: histogram,
        autocorrelation_time: tau,
        mean_energy,
        energy_standard_error: (var * tau / m).sqrt(),
        acceptance,
        step_scale: state.step_scale,
        max_resync_drift: max_drift,
        snapshots,
        final_config: state.config,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_config(n: usize, seed: u64) -> PointConfiguration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n).map(|_| [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), 0.0]).collect();
        PointConfiguration::new(2, pts).unwrap()
    }

    #[test]
    fn incremental_energy_matches_recomputation() {
        for dim in [2, 3] {
            let v = PotentialSpec::quadratic(dim).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let pts = (0..20)
                .map(|_| {
                    let mut p = [0.0; 3];
                    for c in p.iter_mut().take(dim) {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                    p
                })
                .collect();
            let cfg = PointConfiguration::new(dim, pts).unwrap();
            let mut state = ChainState::new(cfg, 2.0, 0.2, 4, &v).unwrap();
            for _ in 0..2000 {
                let before = state.energy();
                let full_before = crate::coulomb_gas::hamiltonian(&state.config, &v).unwrap();
                metropolis_step(&mut state, &v);
                let full = crate::coulomb_gas::hamiltonian(&state.config, &v).unwrap();
                assert!(((state.energy() - before) - (full - full_before)).abs() < 1e-10);
            }
            assert!(state.resync(&v) < 1e-9);
        }
    }

    #[test]
    fn zero_beta_without_potential_accepts_everything() {
        let v = PotentialSpec::expression(2, "0").unwrap();
        let mut state = ChainState::new(disk_config(10, 2), 0.0, 0.5, 3, &v).unwrap();
        for _ in 0..500 {
            assert!(metropolis_step(&mut state, &v));
        }
        assert_eq!(state.acceptance_ratio(), 1.0);
    }

    #[test]
    fn fixed_seed_gives_identical_chains() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let opts = ChainOptions { sweeps: 200, burn_in: 100, seed: 17, psi6_every: 50, snapshot_every: 100, ..Default::default() };
        let a = run_chain(20, 2.0, &v, &opts).unwrap();
        let b = run_chain(20, 2.0, &v, &opts).unwrap();
        assert_eq!(a.energy_trace, b.energy_trace);
        assert_eq!(a.psi6_trace, b.psi6_trace);
        assert_eq!(a.final_config, b.final_config);
        let c = run_chain(20, 2.0, &v, &ChainOptions { seed: 18, ..opts }).unwrap();
        assert_ne!(a.energy_trace, c.energy_trace);
    }

    #[test]
    fn histogram_holds_every_point_and_tuning_hits_the_band() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let opts = ChainOptions { sweeps: 300, burn_in: 300, seed: 5, ..Default::default() };
        let s = run_chain(30, 2.0, &v, &opts).unwrap();
        let mass: f64 = s.density_histogram.values.iter().sum();
        assert!((mass - 30.0).abs() < 1e-9);
        assert!((0.2..=0.6).contains(&s.acceptance), "{}", s.acceptance);
        assert!(s.max_resync_drift < 1e-8);
        assert!(s.energy_trace.iter().all(|e| e.is_finite()));
    }

    // Two particles on a line of sites with proposals inside the cube: the
    // kernel satisfies π(x)P(x→y) = π(y)P(y→x) for every pair of states.
    #[test]
    fn detailed_balance_on_a_toy_state_space() {
        let v = PotentialSpec::quadratic(2).unwrap();
        let sites: Vec<f64> = (0..7).map(|k| -0.6 + 0.2 * k as f64).collect();
        let mut states = Vec::new();
        for &a in &sites {
            for &b in &sites {
                if a != b {
                    states.push(PointConfiguration::new(2, vec![[a, 0.1, 0.0], [b, -0.1, 0.0]]).unwrap());
                }
            }
        }
        let beta = 1.7;
        let scale = 0.45;
        let weight = |c: &PointConfiguration| (-beta * crate::coulomb_gas::hamiltonian(c, &v).unwrap()).exp();
        let mut linked = 0;
        for x in &states {
            for y in &states {
                let fwd = weight(x) * transition_density(x, y, beta, scale, &v);
                let back = weight(y) * transition_density(y, x, beta, scale, &v);
                assert!((fwd - back).abs() <= 1e-12 * fwd.max(back), "{fwd} vs {back}");
                if fwd > 0.0 && x != y {
                    linked += 1;
                }
            }
        }
        assert!(linked > 50);
    }
}
