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


use coulomb_core::lattice::{
    epstein_zeta, green_self_constant, EwaldParams, EwaldSum, Lattice, ModularParameter,
};
use coulomb_core::quadrature::gauss_legendre;
use coulomb_core::special::bessel_i0;
use proptest::prelude::*;
use std::f64::consts::PI;

fn rotation(angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// ∫_cell G (−Δφ) for φ = exp(cos(b1·x) + sin(b2·x)), by polar-type
/// quadrature on the four triangles joining the origin to the cell edges.
fn weak_form_lhs(lat: &Lattice) -> f64 {
    let g = EwaldSum::new(lat, &EwaldParams::default()).unwrap();
    let [b1, b2, _] = lat.reciprocal_basis();
    let dot = |a: [f64; 3], x: [f64; 3]| a[0] * x[0] + a[1] * x[1];
    let minus_laplacian = |x: [f64; 3]| {
        let (u, v) = (dot(b1, x), dot(b2, x));
        let phi = (u.cos() + v.sin()).exp();
        let grad = [-b1[0] * u.sin() + b2[0] * v.cos(), -b1[1] * u.sin() + b2[1] * v.cos()];
        let lap_g = -dot(b1, b1) * u.cos() - dot(b2, b2) * v.sin();
        -phi * (lap_g + grad[0] * grad[0] + grad[1] * grad[1])
    };
    let a1 = lat.basis_vector(0);
    let a2 = lat.basis_vector(1);
    let corner = |s: f64, t: f64| [s * a1[0] + t * a2[0], s * a1[1] + t * a2[1], 0.0];
    let corners = [corner(-0.5, -0.5), corner(0.5, -0.5), corner(0.5, 0.5), corner(-0.5, 0.5)];
    let (xs, ws) = gauss_legendre(48);
    let mut total = 0.0;
    for k in 0..4 {
        let p = corners[k];
        let q = corners[(k + 1) % 4];
        let jac = (p[0] * (q[1] - p[1]) - p[1] * (q[0] - p[0])).abs();
        for (xu, wu) in xs.iter().zip(&ws) {
            // t = u², which smooths the t log t behaviour at the apex
            let u = 0.5 * (xu + 1.0);
            let t = u * u;
            for (xs_, ws_) in xs.iter().zip(&ws) {
                let s = 0.5 * (xs_ + 1.0);
                let x = [t * (p[0] + s * (q[0] - p[0])), t * (p[1] + s * (q[1] - p[1])), 0.0];
                let w = 0.25 * wu * ws_ * 2.0 * u * t * jac;
                total += w * g.green(x).unwrap() * minus_laplacian(x);
            }
        }
    }
    total
}

#[test]
fn torus_green_satisfies_the_weak_equation() {
    // ∫ G(−Δφ) = 2π(φ(0) − mean φ); mean φ = I_0(1)² in fractional coordinates
    let rhs = 2.0 * PI * (1f64.exp() - bessel_i0(1.0).powi(2));
    for lat in [
        Lattice::square(1.0).unwrap(),
        Lattice::triangular(1.0).unwrap(),
        Lattice::from_tau(ModularParameter::new(0.2, 1.3).unwrap(), 2.0).unwrap(),
    ] {
        let lhs = weak_form_lhs(&lat);
        assert!((lhs - rhs).abs() < 1e-6 * rhs.abs(), "{lhs} vs {rhs}");
    }
}

fn tau_strategy() -> impl Strategy<Value = ModularParameter> {
    (0.0f64..0.5, 0.0f64..1.0).prop_map(|(re, t)| {
        let im_min = (1.0 - re * re).sqrt();
        ModularParameter::new(re, im_min + t * (2.0 - im_min)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn epstein_zeta_is_rotation_invariant(tau in tau_strategy(), angle in 0.0f64..(2.0 * PI), s in 2.5f64..5.0) {
        let lat = Lattice::from_tau(tau, 1.0).unwrap();
        let z0 = epstein_zeta(&lat, s).unwrap();
        let z1 = epstein_zeta(&lat.rotated(rotation(angle)).unwrap(), s).unwrap();
        prop_assert!((z0 - z1).abs() <= 1e-9 * z0.abs(), "{} vs {}", z0, z1);
    }

    #[test]
    fn epstein_zeta_ignores_the_choice_of_basis(tau in tau_strategy(), k in -3i64..=3, l in -2i64..=2, s in 2.5f64..5.0) {
        let lat = Lattice::from_tau(tau, 1.0).unwrap();
        // [[1, k], [l, 1 + k l]] has determinant 1
        let m = [[1, k, 0], [l, 1 + k * l, 0], [0, 0, 1]];
        let z0 = epstein_zeta(&lat, s).unwrap();
        let z1 = epstein_zeta(&lat.rebased(m).unwrap(), s).unwrap();
        prop_assert!((z0 - z1).abs() <= 1e-9 * z0.abs(), "{} vs {}", z0, z1);
    }

    #[test]
    fn self_constant_is_rotation_invariant(tau in tau_strategy(), angle in 0.0f64..(2.0 * PI)) {
        let lat = Lattice::from_tau(tau, 1.0).unwrap();
        let r0 = green_self_constant(&lat).unwrap();
        let r1 = green_self_constant(&lat.rotated(rotation(angle)).unwrap()).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-9, "{} vs {}", r0, r1);
    }

    #[test]
    fn torus_green_is_periodic_and_even(tau in tau_strategy(), fx in -0.5f64..0.5, fy in -0.5f64..0.5, i in -2i64..=2, j in -2i64..=2) {
        prop_assume!(fx.abs() + fy.abs() > 0.05);
        let lat = Lattice::from_tau(tau, 1.0).unwrap();
        let g = EwaldSum::new(&lat, &EwaldParams::default()).unwrap();
        let x = lat.to_cartesian([fx, fy, 0.0]);
        let shifted = lat.to_cartesian([fx + i as f64, fy + j as f64, 0.0]);
        let g0 = g.green(x).unwrap();
        prop_assert!((g0 - g.green(shifted).unwrap()).abs() <= 1e-9);
        prop_assert!((g0 - g.green([-x[0], -x[1], 0.0]).unwrap()).abs() <= 1e-9);
    }
}
