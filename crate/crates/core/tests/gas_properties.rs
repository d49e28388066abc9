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


use coulomb_core::coulomb_gas::{gradient, hamiltonian, splitting_check, PointConfiguration};
use coulomb_core::equilibrium::{solve_equilibrium_measure, GridSpec, PotentialSpec};
use coulomb_core::gibbs::{free_energy_leading, run_chain, ChainOptions, FreeEnergyOptions};
use proptest::prelude::*;
use std::f64::consts::PI;

fn planar_points(max: usize) -> impl Strategy<Value = PointConfiguration> {
    prop::collection::vec((-1.2f64..1.2, -1.2f64..1.2), 2..max).prop_filter_map("coincident points", |xy| {
        let pts: Vec<[f64; 3]> = xy.into_iter().map(|(x, y)| [x, y, 0.0]).collect();
        let separated = pts.iter().enumerate().all(|(i, p)| {
            pts[..i].iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-2)
        });
        if separated {
            PointConfiguration::new(2, pts).ok()
        } else {
            None
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_gradient_matches_finite_differences(cfg in planar_points(8), scale in 0.5f64..3.0) {
        let v = PotentialSpec::quadratic_with(2, scale, [0.0; 3]).unwrap();
        let grad = gradient(&cfg, &v).unwrap();
        let step = 1e-6;
        for i in 0..cfg.len() {
            for c in 0..2 {
                let shift = |delta: f64| {
                    let mut pts = cfg.points().to_vec();
                    pts[i][c] += delta;
                    hamiltonian(&PointConfiguration::new(2, pts).unwrap(), &v).unwrap()
                };
                let fd = (shift(step) - shift(-step)) / (2.0 * step);
                prop_assert!((fd - grad[i][c]).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", fd, grad[i][c]);
            }
        }
    }

    #[test]
    fn splitting_terms_ignore_rotation_and_order(cfg in planar_points(6), angle in 0.0f64..(2.0 * PI)) {
        let v = PotentialSpec::quadratic(2).unwrap();
        let base = splitting_check(&cfg, &v).unwrap();
        let mut reversed = cfg.points().to_vec();
        reversed.reverse();
        for other in [cfg.rotated(angle).unwrap(), PointConfiguration::new(2, reversed).unwrap()] {
            let r = splitting_check(&other, &v).unwrap();
            let tol = 1e-8 * (1.0 + base.lhs.abs());
            prop_assert!((r.lhs - base.lhs).abs() <= tol);
            prop_assert!((r.w_term - base.w_term).abs() <= tol);
            prop_assert!((r.zeta_term - base.zeta_term).abs() <= tol);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn equilibrium_density_is_a_probability_measure(scale in 0.5f64..4.0) {
        let v = PotentialSpec::quadratic_with(2, scale, [0.0; 3]).unwrap();
        let mu = solve_equilibrium_measure(&v, &GridSpec::new(1.0 / 16.0)).unwrap();
        prop_assert!((mu.mass() - 1.0).abs() < 1e-6);
        prop_assert!(mu.density.values.iter().all(|&d| d >= 0.0));
        // uniform disk of radius scale^{-1/2} with density scale/π
        let inner = mu.density.nearest([0.0; 3]).unwrap();
        prop_assert!((mu.density.values[inner] - scale / PI).abs() < 1e-6 * scale);
        prop_assert!(!mu.in_support([1.2 / scale.sqrt(), 0.0, 0.0]));
    }
}

#[test]
fn sampler_histogram_holds_every_point() {
    let v = PotentialSpec::quadratic(2).unwrap();
    let opts = ChainOptions { sweeps: 200, burn_in: 100, seed: 5, ..Default::default() };
    let a = run_chain(12, 4.0, &v, &opts).unwrap();
    let b = run_chain(12, 4.0, &v, &opts).unwrap();
    assert_eq!(a.energy_trace, b.energy_trace);
    let total: f64 = a.density_histogram.values.iter().sum();
    assert!((total - 12.0).abs() < 1e-9, "{total}");
}

#[test]
fn halving_the_beta_spacing_stays_within_error_bars() {
    let v = PotentialSpec::quadratic(2).unwrap();
    let run = |points| {
        let opts = FreeEnergyOptions {
            points,
            chain: ChainOptions { sweeps: 2_000, burn_in: 500, ..Default::default() },
            reference_samples: 5_000,
            seed: 11,
            ..Default::default()
        };
        free_energy_leading(20, 2.0, &v, &opts).unwrap()
    };
    let coarse = run(9);
    let fine = run(17);
    let stat = (coarse.log_z_error.powi(2) + fine.log_z_error.powi(2)).sqrt();
    let bound = 3.0 * stat + coarse.quadrature_error + fine.quadrature_error;
    let diff = (coarse.log_z - fine.log_z).abs();
    assert!(diff <= bound, "|Δ log Z| = {diff}, bound {bound}");
}
