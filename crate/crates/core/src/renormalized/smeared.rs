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

//! Smeared-charge energy 𝒲_η computed in Fourier space.
//!
//! Each point charge is replaced by ρ_η = η^{-d}ρ(·/η). With a Gaussian split
//! G = Σ_p K_α(· − p) + Fourier part, the per-cell field energy is
//!
//!   (c_d²/2V) Σ'_k |S(k)|² ρ̂(kη)² e^{-k²/4α}/k² + n (c_d²/2) J(η) − c_d² n²/(8αV)
//!
//! where J(η) = (2π)^{-d} ∫ ρ̂(kη)² (1 − e^{-k²/4α})/k² dk is the screened self
//! energy of one smeared charge. Real-space cross terms are dropped; α is
//! chosen so that they are below the tolerance when η is under half the
//! minimal distance, and a bound on them is reported.

use super::window::{check_eta_list, check_trace};
use super::{extrapolate_eta_order, Convention, RenormalizedValue};
use crate::error::{Error, Result};
use crate::geom;
use crate::lattice::{coulomb_constant, Lattice};
use crate::quadrature::{composite_gauss, integrate, integrate_pieces, Tolerance};
use crate::special::{bessel_j01, exp_integral_e1, erfc};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Radial smearing profile supported in the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    UniformBall,
    /// exp(−1/(1 − t²)) on t < 1
    SmoothBump,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::UniformBall => "uniform-ball",
            Shape::SmoothBump => "smooth-bump",
        }
    }

    fn profile(self, t: f64) -> f64 {
        match self {
            Shape::UniformBall => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::SmoothBump => {
                if t < 1.0 {
                    (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shape, radius and dimension of a smeared charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmearingSpec {
    pub shape: Shape,
    pub eta: f64,
    pub dim: usize,
}

impl SmearingSpec {
    pub fn new(shape: Shape, eta: f64, dim: usize) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("smearing radius must be positive, got {eta}")));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        Ok(Self { shape, eta, dim })
    }
}

fn surface(dim: usize) -> f64 {
    if dim == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

const QTOL: Tolerance = Tolerance { abs: 1e-15, rel: 1e-14, max_intervals: 1000 };

fn bump_norm(dim: usize) -> f64 {
    static N2: OnceLock<f64> = OnceLock::new();
    static N3: OnceLock<f64> = OnceLock::new();
    let cell = if dim == 2 { &N2 } else { &N3 };
    *cell.get_or_init(|| {
        surface(dim)
            * integrate(|t| Shape::SmoothBump.profile(t) * t.powi(dim as i32 - 1), 0.0, 1.0, QTOL)
                .expect("bump normalisation")
                .0
    })
}

/// Fraction of the unit charge inside radius t.
pub fn charge_fraction(shape: Shape, dim: usize, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    match shape {
        Shape::UniformBall => t.powi(dim as i32),
        Shape::SmoothBump => {
            surface(dim)
                * integrate(|s| shape.profile(s) * s.powi(dim as i32 - 1), 0.0, t, QTOL).expect("charge").0
                / bump_norm(dim)
        }
    }
}

/// ∫ |x|² ρ(x) dx for the unit-radius shape.
pub fn second_moment(shape: Shape, dim: usize) -> f64 {
    let d = dim as f64;
    match shape {
        Shape::UniformBall => d / (d + 2.0),
        Shape::SmoothBump => {
            surface(dim) * integrate(|t| shape.profile(t) * t.powi(dim as i32 + 1), 0.0, 1.0, QTOL).expect("moment").0
                / bump_norm(dim)
        }
    }
}

/// Fourier transform ρ̂(q) of the unit-radius shape (ρ̂(0) = 1).
pub fn form_factor(shape: Shape, dim: usize, q: f64) -> f64 {
    let q = q.abs();
    match (shape, dim) {
        (Shape::UniformBall, 2) => {
            if q < 1e-4 {
                1.0 - q * q / 8.0
            } else {
                2.0 * bessel_j01(q).1 / q
            }
        }
        (Shape::UniformBall, _) => {
            if q < 1e-2 {
                let q2 = q * q;
                1.0 - q2 / 10.0 + q2 * q2 / 280.0 - q2 * q2 * q2 / 15120.0
            } else {
                3.0 * (q.sin() - q * q.cos()) / (q * q * q)
            }
        }
        (Shape::SmoothBump, _) => {
            static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
            let (x, w) = NODES.get_or_init(|| composite_gauss(0.0, 1.0, 48, 16));
            let mut s = 0.0;
            for (t, wt) in x.iter().zip(w) {
                let kernel = if dim == 2 {
                    bessel_j01(q * t).0 * t
                } else if q * t < 1e-8 {
                    t * t
                } else {
                    (q * t).sin() / q * t
                };
                s += wt * shape.profile(*t) * kernel;
            }
            surface(dim) * s / bump_norm(dim)
        }
    }
}

/// (κ_d, γ_2): one smeared charge of radius η carries free-space field
/// energy κ_d g(η) + γ_2 (γ_2 = 0 in 3D), with g = −log or 1/|x|.
pub fn self_energy_constants(spec: &SmearingSpec) -> Result<(f64, f64)> {
    let dim = spec.dim;
    match (spec.shape, dim) {
        (Shape::UniformBall, 2) => Ok((PI, PI / 4.0)),
        (Shape::UniformBall, _) => Ok((12.0 * PI / 5.0, 0.0)),
        (shape, 2) => {
            let g = integrate(|t| charge_fraction(shape, 2, t).powi(2) / t, 0.0, 1.0, QTOL)?.0;
            Ok((PI, PI * g))
        }
        (shape, _) => {
            let g = integrate(|t| charge_fraction(shape, 3, t).powi(2) / (t * t), 0.0, 1.0, QTOL)?.0;
            Ok((2.0 * PI * (1.0 + g), 0.0))
        }
    }
}

/// Free-space field energy of one smeared charge (renormalised by +π log R
/// at infinity in 2D), from radial quadrature of |E|² with E given by the
/// enclosed charge.
pub fn smeared_self_energy(spec: &SmearingSpec) -> Result<f64> {
    let eta = spec.eta;
    let shape = spec.shape;
    if spec.dim == 2 {
        // ½∫_0^R (Q/r)² 2πr dr − π log R = π∫_0^η Q²/r dr − π log η
        let inner = integrate(|r| charge_fraction(shape, 2, r / eta).powi(2) / r, 0.0, eta, QTOL)?.0;
        Ok(PI * inner - PI * eta.ln())
    } else {
        // ½∫ (Q/r²)² 4πr² dr = 2π ∫_0^η Q²/r² dr + 2π/η
        let inner = integrate(|r| charge_fraction(shape, 3, r / eta).powi(2) / (r * r), 0.0, eta, QTOL)?.0;
        Ok(2.0 * PI * inner + 2.0 * PI / eta)
    }
}

/// Numerical controls for [`smeared_w_with`].
#[derive(Clone, Copy, Debug)]
pub struct SmearedOptions {
    pub shape: Shape,
    pub tail_tolerance: f64,
    pub extrapolation_order: u32,
}

impl Default for SmearedOptions {
    fn default() -> Self {
        Self { shape: Shape::UniformBall, tail_tolerance: 1e-11, extrapolation_order: 2 }
    }
}

pub fn smeared_w(lattice: &Lattice, spec: &SmearingSpec, eta_list: &[f64]) -> Result<RenormalizedValue> {
    if spec.dim != lattice.dim() {
        return Err(Error::InvalidParameter("smearing dimension differs from lattice dimension".into()));
    }
    smeared_w_with(lattice, eta_list, &SmearedOptions { shape: spec.shape, ..Default::default() })
}

pub fn smeared_w_with(lattice: &Lattice, eta_list: &[f64], opts: &SmearedOptions) -> Result<RenormalizedValue> {
    check_eta_list(eta_list)?;
    let dim = lattice.dim();
    let v = lattice.volume();
    let pos = lattice.positions();
    let n = pos.len() as f64;
    let m = n / v;
    let cd = coulomb_constant(dim);
    let d_min = lattice.min_distance();
    let eta_max = eta_list[0];
    if eta_max >= 0.5 * d_min {
        return Err(Error::InvalidParameter(format!(
            "η = {eta_max} must be below half the minimal distance {d_min}"
        )));
    }
    let gap = d_min - 2.0 * eta_max;
    let alpha = (PI / v.powf(2.0 / dim as f64)).max(30.0 / (gap * gap));
    let tol = opts.tail_tolerance;

    // dropped real-space cross terms, bounded through K_α(r − 2η)
    let kernel = |r: f64| {
        if dim == 2 {
            0.5 * exp_integral_e1(alpha * r * r)
        } else {
            erfc(alpha.sqrt() * r) / r
        }
    };
    let rho_c = lattice.cell_radius();
    let reach = d_min + 8.0 / alpha.sqrt() + 2.0 * rho_c;
    let vecs = lattice.vectors_within(reach);
    let mut cross = 0.0;
    for a in &pos {
        for b in &pos {
            for p in &vecs {
                let r = geom::norm(geom::add(geom::sub(*a, *b), *p));
                if r > 1e-12 && r <= reach - 2.0 * rho_c {
                    cross += kernel(r - 2.0 * eta_max);
                }
            }
        }
    }
    let cross_bound = 0.5 * cd * cross / v;
    if cross_bound > tol {
        return Err(Error::Accuracy(format!("real-space cross terms {cross_bound:e} above tolerance")));
    }

    // dual lattice sum
    let recip_rho = lattice.dual_cell_radius();
    let coef = cd * cd * n * n / (2.0 * v * v);
    let bound = |k: f64| {
        crate::lattice::shell_tail_bound(dim, v / (2.0 * PI).powi(dim as i32), recip_rho, coef, -2.0, 1.0 / (4.0 * alpha), k)
    };
    let mut kcut = 2.0 * recip_rho;
    let mut steps = 0;
    while bound(kcut) > tol {
        kcut += 0.5 * recip_rho;
        steps += 1;
        if steps > 2000 {
            return Err(Error::Accuracy("Fourier tail of the smeared energy not certified".into()));
        }
    }
    let kvecs = lattice.dual_vectors_within(kcut);
    let mut modes = Vec::with_capacity(kvecs.len());
    for k in kvecs.into_iter().skip(1) {
        let k2 = geom::norm2(k);
        let (mut re, mut im) = (0.0, 0.0);
        for a in &pos {
            let ph = geom::dot(k, *a);
            re += ph.cos();
            im += ph.sin();
        }
        modes.push((k2.sqrt(), (re * re + im * im) * (-k2 / (4.0 * alpha)).exp() / k2));
    }

    let spec0 = SmearingSpec::new(opts.shape, eta_max, dim)?;
    let (kappa, gamma2) = self_energy_constants(&spec0)?;
    let mut trace = Vec::with_capacity(eta_list.len());
    for &eta in eta_list {
        let fourier: f64 = modes.iter().map(|(k, w)| w * form_factor(opts.shape, dim, k * eta).powi(2)).sum();
        let j = screened_self_integral(opts.shape, dim, eta, alpha)?;
        let cell = cd * cd / (2.0 * v) * fourier + n * 0.5 * cd * cd * j - cd * cd * n * n / (8.0 * alpha * v);
        let g = if dim == 2 { -eta.ln() } else { 1.0 / eta };
        let counter = m * (kappa * g + if dim == 2 { gamma2 } else { 0.0 });
        trace.push((eta, cell / v - counter));
    }
    check_trace(&trace)?;
    let (value, residual) = if trace.len() >= 3 {
        extrapolate_eta_order(&trace, opts.extrapolation_order)?
    } else {
        (trace.last().expect("non-empty").1, 0.0)
    };
    Ok(RenormalizedValue {
        value,
        eta_trace: trace,
        extrapolation_residual: residual,
        convention: Convention {
            coulomb_constant: cd,
            field_energy_factor: 0.5,
            kappa_d: Some(kappa),
            gamma_2: if dim == 2 { Some(gamma2) } else { None },
            extrapolation_order: Some(opts.extrapolation_order),
            smearing_shape: Some(opts.shape.name().to_string()),
        },
        unrenormalized_trace: Vec::new(),
        tail_bound: bound(kcut) / v + cross_bound,
    })
}

// J(η) = (2π)^{-d} ∫ ρ̂(kη)²(1 − e^{−k²/4α})/k² dk in the variable q = kη
fn screened_self_integral(shape: Shape, dim: usize, eta: f64, alpha: f64) -> Result<f64> {
    let c = 4.0 * alpha * eta * eta;
    let q_max: f64 = match shape {
        Shape::UniformBall => 400.0,
        Shape::SmoothBump => 120.0,
    };
    let breaks: Vec<f64> = {
        let pieces = (q_max / PI).ceil() as usize;
        (0..=pieces).map(|i| (i as f64 * PI).min(q_max)).collect()
    };
    let tol = Tolerance { abs: 1e-14, rel: 1e-13, max_intervals: 200 };
    let screen = |q: f64| -(-q * q / c).exp_m1();
    if dim == 2 {
        let (v, _) = integrate_pieces(
            |q| if q == 0.0 { 0.0 } else { form_factor(shape, 2, q).powi(2) * screen(q) / q },
            &breaks,
            tol,
        )?;
        let tail = if shape == Shape::UniformBall { 4.0 / (3.0 * PI * q_max.powi(3)) } else { 0.0 };
        Ok((v + tail) / (2.0 * PI))
    } else {
        let (v, _) = integrate_pieces(|q| form_factor(shape, 3, q).powi(2) * screen(q), &breaks, tol)?;
        let tail = if shape == Shape::UniformBall { 1.5 / q_max.powi(3) } else { 0.0 };
        Ok((v + tail) / (2.0 * PI * PI * eta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CubicKind, EwaldParams, EwaldSum};
    use crate::renormalized::periodic_w;

    #[test]
    fn self_energy_scaling() {
        let a = smeared_self_energy(&SmearingSpec::new(Shape::UniformBall, 0.2, 3).unwrap()).unwrap();
        let b = smeared_self_energy(&SmearingSpec::new(Shape::UniformBall, 0.1, 3).unwrap()).unwrap();
        assert!((b / a - 2.0).abs() < 1e-10);
        for shape in [Shape::UniformBall, Shape::SmoothBump] {
            let s1 = SmearingSpec::new(shape, 0.2, 2).unwrap();
            let s2 = SmearingSpec::new(shape, 0.1, 2).unwrap();
            let (kappa, gamma) = self_energy_constants(&s1).unwrap();
            let e1 = smeared_self_energy(&s1).unwrap();
            let e2 = smeared_self_energy(&s2).unwrap();
            assert!((e2 - e1 - kappa * 2f64.ln()).abs() < 1e-8);
            assert!((e1 - (kappa * -(0.2f64.ln()) + gamma)).abs() < 1e-8);
            let (k2, g2) = self_energy_constants(&s2).unwrap();
            assert!((k2 - kappa).abs() < 1e-12 && (g2 - gamma).abs() < 1e-12);
        }
        // uniform ball constants agree with the generic quadrature
        let e = smeared_self_energy(&SmearingSpec::new(Shape::UniformBall, 1.0, 3).unwrap()).unwrap();
        assert!((e - 12.0 * PI / 5.0).abs() < 1e-10);
        let e = smeared_self_energy(&SmearingSpec::new(Shape::UniformBall, 1.0, 2).unwrap()).unwrap();
        assert!((e - PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn form_factors_match_quadrature() {
        for dim in [2, 3] {
            for q in [0.0, 0.5, 3.0, 17.0] {
                // direct radial transform of the uniform ball
                let s = integrate(
                    |t| {
                        let k = if dim == 2 { bessel_j01(q * t).0 * t } else if q == 0.0 { t * t } else { (q * t).sin() / q * t };
                        k * surface(dim)
                    },
                    0.0,
                    1.0,
                    QTOL,
                )
                .unwrap()
                .0 / (surface(dim) / dim as f64);
                assert!((s - form_factor(Shape::UniformBall, dim, q)).abs() < 1e-12);
            }
            assert!((form_factor(Shape::SmoothBump, dim, 0.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_theorem_on_the_torus() {
        // averaging G over a smeared charge reproduces G outside the support
        // up to the constant ⟨|w|²⟩ ΔG / (2d) = η² ⟨t²⟩ c_d / (2d|T|)
        let lat = Lattice::triangular(1.0).unwrap();
        let ew = EwaldSum::new(&lat, &EwaldParams { tail_tolerance: 1e-13, ..Default::default() }).unwrap();
        let eta = 0.1;
        let (rs, ws) = composite_gauss(0.0, eta, 4, 20);
        let m = 96;
        for x in [[0.3, 0.1, 0.0], [0.5, 0.4, 0.0]] {
            let mut avg = 0.0;
            for (r, w) in rs.iter().zip(&ws) {
                for i in 0..m {
                    let t = 2.0 * PI * i as f64 / m as f64;
                    let y = [x[0] - r * t.cos(), x[1] - r * t.sin(), 0.0];
                    avg += w * r * ew.green(y).unwrap() * 2.0 * PI / m as f64;
                }
            }
            avg /= PI * eta * eta;
            let shift = eta * eta * 0.5 * 2.0 * PI / (4.0 * lat.volume());
            assert!((avg - ew.green(x).unwrap() - shift).abs() < 1e-10, "{}", avg - ew.green(x).unwrap() - shift);
        }
    }

    #[test]
    fn smeared_equals_periodic_plus_quadratic() {
        for lat in [Lattice::square(1.0).unwrap(), Lattice::triangular(1.0).unwrap()] {
            let p = periodic_w(&lat).unwrap().value;
            let s = smeared_w_with(&lat, &[0.3, 0.2, 0.1], &SmearedOptions::default()).unwrap();
            assert!((s.value - p).abs() < 1e-8, "{} vs {p}", s.value);
            // exact curvature (c_d²/2d) m² ⟨t²⟩
            let c = (s.eta_trace[0].1 - p) / 0.09;
            assert!((c - PI * PI / 2.0).abs() < 1e-6, "{c}");
        }
        let bump = smeared_w_with(
            &Lattice::square(1.0).unwrap(),
            &[0.3, 0.2, 0.1],
            &SmearedOptions { shape: Shape::SmoothBump, ..Default::default() },
        )
        .unwrap();
        assert!((bump.value - periodic_w(&Lattice::square(1.0).unwrap()).unwrap().value).abs() < 1e-7);
    }

    #[test]
    fn cubic_smeared_matches_ewald() {
        for kind in [CubicKind::Simple, CubicKind::FaceCentered] {
            let lat = Lattice::cubic(kind, 1.0).unwrap();
            let p = periodic_w(&lat).unwrap().value;
            let s = smeared_w_with(&lat, &[0.25, 0.15, 0.1], &SmearedOptions::default()).unwrap();
            assert!((s.value - p).abs() < 1e-7, "{kind:?}: {} vs {p}", s.value);
            assert!(s.extrapolation_residual < 1e-9);
        }
    }
}
