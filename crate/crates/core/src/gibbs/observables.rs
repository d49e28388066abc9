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


//! Observables of sampled configurations.

use crate::coulomb_gas::PointConfiguration;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Global hexatic order |mean_j (1/6) Σ_{k∈nbr(j)} e^{6iθ_jk}| over points
/// with |x_j| ≤ `core`, neighbours being the six nearest points overall.
pub fn psi6(cfg: &PointConfiguration, core: f64) -> Result<f64> {
    if cfg.dim() != 2 {
        return Err(Error::InvalidParameter("ψ6 is defined for planar configurations".into()));
    }
    let pts = cfg.points();
    if pts.len() < 7 {
        return Err(Error::Undefined(format!("ψ6 needs at least 7 points, got {}", pts.len())));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut used = 0usize;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(pts.len());
    for (j, p) in pts.iter().enumerate() {
        if p[0].hypot(p[1]) > core {
            continue;
        }
        dist.clear();
        dist.extend(
            pts.iter().enumerate().filter(|(k, _)| *k != j).map(|(k, q)| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2), k)),
        );
        dist.select_nth_unstable_by(5, |a, b| a.0.total_cmp(&b.0));
        let local: Complex64 = dist[..6]
            .iter()
            .map(|&(_, k)| {
                let theta = (pts[k][1] - p[1]).atan2(pts[k][0] - p[0]);
                Complex64::from_polar(1.0, 6.0 * theta)
            })
            .sum();
        total += local / 6.0;
        used += 1;
    }
    if used < 3 {
        return Err(Error::Undefined(format!("only {used} points inside the ψ6 core of radius {core}")));
    }
    Ok((total / used as f64).norm())
}

/// Mean fraction of points within each radius, averaged over configurations.
pub fn radial_cdf(configs: &[PointConfiguration], radii: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; radii.len()];
    if configs.is_empty() {
        return out;
    }
    for cfg in configs {
        let n = cfg.len() as f64;
        for (o, r) in out.iter_mut().zip(radii) {
            let inside = cfg.points().iter().filter(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt() <= *r).count();
            *o += inside as f64 / n;
        }
    }
    let m = configs.len() as f64;
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Integrated autocorrelation time with the self-consistent window
/// W ≥ 5τ(W). The flag is false when the window hit its cap (N/10), in which
/// case the returned τ is a lower bound.
pub fn integrated_autocorrelation(trace: &[f64]) -> (f64, bool) {
    let n = trace.len();
    if n < 4 {
        return (1.0, false);
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = dev.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return (1.0, true);
    }
    let cap = (n / 10).max(1);
    let mut tau = 1.0;
    for w in 1..=cap {
        let c: f64 = dev[..n - w].iter().zip(&dev[w..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        tau += 2.0 * c / c0;
        if w as f64 >= 5.0 * tau {
            return (tau.max(1.0), true);
        }
    }
    (tau.max(1.0), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn patch(basis: [[f64; 2]; 2], half: i32, angle: f64) -> PointConfiguration {
        let (s, c) = angle.sin_cos();
        let mut pts = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                let x = i as f64 * basis[0][0] + j as f64 * basis[1][0];
                let y = i as f64 * basis[0][1] + j as f64 * basis[1][1];
                pts.push([c * x - s * y + 1e-3, s * x + c * y, 0.0]);
            }
        }
        PointConfiguration::new(2, pts).unwrap()
    }

    #[test]
    fn triangular_patch_is_hexatic() {
        let tri = patch([[1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]], 8, 0.3);
        assert!(psi6(&tri, 4.0).unwrap() >= 0.99);
    }

    #[test]
    fn square_patch_scores_low() {
        let sq = patch([[1.0, 0.0], [0.0, 1.0]], 8, 0.37);
        let v = psi6(&sq, 4.0).unwrap();
        assert!(v <= 0.3, "{v}");
    }

    #[test]
    fn uniform_points_score_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut values: Vec<f64> = (0..100)
            .map(|_| {
                let pts = (0..500)
                    .map(|_| loop {
                        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0];
                        if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                            break p;
                        }
                    })
                    .collect();
                psi6(&PointConfiguration::new(2, pts).unwrap(), 0.8).unwrap()
            })
            .collect();
        values.sort_by(f64::total_cmp);
        assert!(values[94] <= 0.2, "{}", values[94]);
    }

    #[test]
    fn psi6_needs_enough_points() {
        let few = PointConfiguration::new(2, (0..5).map(|k| [k as f64, 0.0, 0.0]).collect()).unwrap();
        assert!(matches!(psi6(&few, 10.0), Err(Error::Undefined(_))));
        let far = patch([[1.0, 0.0], [0.0, 1.0]], 3, 0.0);
        assert!(matches!(psi6(&far, 0.5), Err(Error::Undefined(_))));
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi: f64 = 0.8;
        let mut x = 0.0;
        let trace: Vec<f64> = (0..200_000)
            .map(|_| {
                x = phi * x + rng.gen_range(-1.0..1.0);
                x
            })
            .collect();
        let (tau, ok) = integrated_autocorrelation(&trace);
        let exact = (1.0 + phi) / (1.0 - phi);
        assert!(ok && (tau - exact).abs() < 0.1 * exact, "{tau}");
    }

    #[test]
    fn radial_cdf_counts_fractions() {
        let cfg = PointConfiguration::new(2, vec![[0.1, 0.0, 0.0], [0.0, 0.5, 0.0], [0.9, 0.0, 0.0], [0.0, -2.0, 0.0]]).unwrap();
        assert_eq!(radial_cdf(&[cfg], &[0.2, 1.0, 3.0]), vec![0.25, 0.75, 1.0]);
    }
}
