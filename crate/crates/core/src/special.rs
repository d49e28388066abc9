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

//! Special functions not covered by `statrs`: the exponential integral, the
//! upper incomplete gamma function for real (also negative) order, and the
//! Bessel functions J0, J1 and I0.

use statrs::function::gamma::gamma;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const TINY: f64 = 1e-300;

pub use statrs::function::gamma::gamma as gamma_fn;

/// Euler–Mascheroni constant.
pub const fn euler_gamma() -> f64 {
    EULER_GAMMA
}

/// Complementary error function via Γ(1/2, x²)/√π.
pub fn erfc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x > 27.0 {
        return 0.0;
    }
    upper_gamma(0.5, x * x) / std::f64::consts::PI.sqrt()
}

/// Exponential integral E1(x) = ∫_x^∞ e^{-t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument, got {x}");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // modified Lentz on the continued fraction
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Upper incomplete gamma Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt for real `a` and x > 0.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_gamma needs x > 0, got {x}");
    if a == 0.0 {
        return exp_integral_e1(x);
    }
    if x >= 1.0 || (a > 0.0 && x >= a + 1.0) {
        return upper_gamma_cf(a, x);
    }
    if a > 0.0 {
        return gamma(a) - lower_gamma_series(a, x);
    }
    // a < 0 and x < 1: walk up to a positive order, then recur down
    let k = (-a).ceil() as i64;
    let top = a + k as f64;
    let mut val = if top == 0.0 {
        exp_integral_e1(x)
    } else if top > 0.0 {
        gamma(top) - lower_gamma_series(top, x)
    } else {
        unreachable!()
    };
    let mut order = top;
    while order > a + 0.5 {
        order -= 1.0;
        val = (val - x.powf(order) * (-x).exp()) / order;
    }
    val
}

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..1000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = if b.abs() < TINY { 1.0 / TINY } else { 1.0 / b };
    let mut h = d;
    for i in 1..2000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// Bessel functions (J0(x), J1(x)) of the first kind.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let sign1 = if x < 0.0 { -1.0 } else { 1.0 };
    if ax < 1e-8 {
        return (1.0 - 0.25 * ax * ax, sign1 * 0.5 * x.abs());
    }
    let (j0, j1) = if ax <= 25.0 { miller_j01(ax) } else { hankel_j01(ax) };
    (j0, sign1 * j1)
}

// Backward recurrence normalised with J0 + 2 Σ J_{2k} = 1.
fn miller_j01(x: f64) -> (f64, f64) {
    let start = 2 * (((x + 30.0 + 3.0 * x.sqrt()) as usize) / 2 + 1);
    let mut jp = 0.0;
    let mut j = 1e-30;
    let mut sum = 0.0;
    let (mut j0, mut j1) = (0.0, 0.0);
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            sum *= 1e-250;
            j1 *= 1e-250;
        }
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            sum += 2.0 * j;
        }
        if k - 1 == 1 {
            j1 = j;
        }
        if k - 1 == 0 {
            j0 = j;
        }
    }
    let norm = j0 + sum;
    (j0 / norm, j1 / norm)
}

fn hankel_j01(x: f64) -> (f64, f64) {
    let eval = |nu: f64| {
        let mu = 4.0 * nu * nu;
        let (mut p, mut q) = (0.0, 0.0);
        let mut term: f64 = 1.0;
        let mut k = 0usize;
        let mut last = f64::INFINITY;
        loop {
            let t = term.abs();
            if t > last || t < 1e-18 || k > 60 {
                break;
            }
            last = t;
            match k % 4 {
                0 => p += term,
                1 => q += term,
                2 => p -= term,
                _ => q -= term,
            }
            k += 1;
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        let chi = x - (0.5 * nu + 0.25) * std::f64::consts::PI;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    };
    (eval(0.0), eval(1.0))
}

/// Modified Bessel function I0(x) by its power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // E1(1) and E1(0.1), E1(5) from standard tables
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-14);
        assert!((exp_integral_e1(5.0) - 0.001_148_295_591_275_325_8).abs() < 1e-17);
    }

    #[test]
    fn upper_gamma_matches_closed_forms() {
        // Γ(1, x) = e^{-x}, Γ(1/2, x) = √π erfc(√x), Γ(-1/2, x) = 2e^{-x}/√x - 2√π erfc(√x)
        for &x in &[0.05, 0.3, 0.9, 1.5, 4.0, 20.0] {
            let pi_sqrt = std::f64::consts::PI.sqrt();
            assert!((upper_gamma(1.0, x) - (-x as f64).exp()).abs() < 1e-14);
            let half = pi_sqrt * erfc(x.sqrt());
            assert!((upper_gamma(0.5, x) - half).abs() < 1e-13 * half.max(1e-300).max(1e-10));
            let mhalf = 2.0 * (-x as f64).exp() / x.sqrt() - 2.0 * pi_sqrt * erfc(x.sqrt());
            assert!((upper_gamma(-0.5, x) - mhalf).abs() < 1e-12 * mhalf.abs().max(1e-8), "x={x}");
            // Γ(-1, x) = E2(x)/x = (e^{-x} - x E1(x))/x
            let m1 = ((-x as f64).exp() - x * exp_integral_e1(x)) / x;
            assert!((upper_gamma(-1.0, x) - m1).abs() < 1e-12 * m1.abs().max(1e-10), "x={x}");
        }
    }

    #[test]
    fn bessel_reference_values() {
        let (j0, j1) = bessel_j01(1.0);
        assert!((j1 - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j0 - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j01(10.0).1 - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert!((bessel_j01(30.0).1 + 0.118_751_062_616_622_94).abs() < 1e-14);
        // continuity across the algorithm switch
        let a = miller_j01(25.0);
        let b = hankel_j01(25.0);
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        assert!((erfc(0.3f64.sqrt()) - 0.438_578_026_080_999_9).abs() < 1e-15);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-19);
        assert!((gamma_fn(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
    }
}
