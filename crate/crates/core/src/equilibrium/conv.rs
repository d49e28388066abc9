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

//! Discrete convolutions g ∗ q on regular grids by zero-padded FFT.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Largest padded grid (complex entries) a convolution may allocate.
pub const MAX_FFT_ENTRIES: usize = 1 << 25;

fn tensor_gauss(order: usize, dims: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (x, w) = gauss_legendre(order);
    // map [−1, 1] to [0, 1]
    let x: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let w: Vec<f64> = w.iter().map(|t| 0.5 * t).collect();
    let mut s = 0.0;
    let mut idx = vec![0usize; dims];
    let mut p = vec![0.0; dims];
    loop {
        let mut wt = 1.0;
        for d in 0..dims {
            p[d] = x[idx[d]];
            wt *= w[idx[d]];
        }
        s += wt * f(&p);
        let mut d = 0;
        loop {
            if d == dims {
                return s;
            }
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Mean of −log|x − y| over x, y in the unit square.
pub fn square_pair_log_mean() -> f64 {
    25.0 / 12.0 - PI / 3.0 - 2f64.ln() / 3.0
}

/// Mean of 1/|x − y| over x, y in the unit cube.
pub fn cube_pair_inverse_mean() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    // 48 sectors u ≥ v ≥ w of the difference density, (v, w) = (s a, s a b)
    *C.get_or_init(|| {
        48.0 * tensor_gauss(24, 3, |p| {
            let (s, a, b) = (p[0], p[1], p[2]);
            s * a * (1.0 - s) * (1.0 - s * a) * (1.0 - s * a * b) / (1.0 + a * a * (1.0 + b * b)).sqrt()
        })
    })
}

/// Mean of −log|x| over the unit square centred at 0.
pub fn square_point_log_mean() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    // divergence theorem for x(−log|x|): the boundary term is a smooth 1-D integral
    *C.get_or_init(|| 0.5 + tensor_gauss(40, 1, |p| -0.5 * ((p[0] - 0.5).powi(2) + 0.25).ln()))
}

/// Mean of 1/|x| over the unit cube centred at 0.
pub fn cube_point_inverse_mean() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.5 * tensor_gauss(40, 2, |p| 1.0 / ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + 0.25).sqrt()))
}

/// How the zero offset of the kernel is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelfTerm {
    /// potential at a node of its own cell
    Point,
    /// cell–cell interaction
    Pair,
}

/// Coulomb kernel g(h·d) between grid offsets, with the d = 0 entry replaced
/// by the exact cell average.
pub fn grid_kernel(dim: usize, h: f64, self_term: SelfTerm) -> impl Fn([i64; 3]) -> f64 {
    let diag = match (dim, self_term) {
        (2, SelfTerm::Point) => -h.ln() + square_point_log_mean(),
        (2, SelfTerm::Pair) => -h.ln() + square_pair_log_mean(),
        (_, SelfTerm::Point) => cube_point_inverse_mean() / h,
        (_, SelfTerm::Pair) => cube_pair_inverse_mean() / h,
    };
    move |d: [i64; 3]| {
        let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
        if r2 == 0.0 {
            diag
        } else if dim == 2 {
            -0.5 * (h * h * r2).ln()
        } else {
            1.0 / (h * r2.sqrt())
        }
    }
}

fn good_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_nd(buf: &mut [Complex64], shape: [usize; 3], dir: FftDirection, planner: &mut FftPlanner<f64>) {
    let strides = [1, shape[0], shape[0] * shape[1]];
    for axis in 0..3 {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft(n, dir);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let total = buf.len();
        let stride = strides[axis];
        for start in 0..total {
            // first element of each line along `axis`
            if (start / stride) % n != 0 {
                continue;
            }
            for t in 0..n {
                line[t] = buf[start + t * stride];
            }
            fft.process(&mut line);
            for t in 0..n {
                buf[start + t * stride] = line[t];
            }
        }
    }
}

/// U(t) = Σ_s q(s) K(t + offset − s) for targets t in `tshape` and sources s
/// in `qshape`, all offsets in node units of one common lattice.
pub fn convolve(
    q: &[f64],
    qshape: [usize; 3],
    tshape: [usize; 3],
    offset: [i64; 3],
    kernel: impl Fn([i64; 3]) -> f64,
) -> Result<Vec<f64>> {
    let mut p = [1usize; 3];
    for a in 0..3 {
        p[a] = if qshape[a] == 1 && tshape[a] == 1 { 1 } else { good_size(qshape[a] + tshape[a] - 1) };
    }
    let total = p[0] * p[1] * p[2];
    if total > MAX_FFT_ENTRIES {
        return Err(Error::Domain(format!(
            "convolution grid {p:?} exceeds {MAX_FFT_ENTRIES} entries; use a coarser spacing"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; total];
    let mut b = vec![zero; total];
    for k in 0..qshape[2] {
        for j in 0..qshape[1] {
            for i in 0..qshape[0] {
                a[i + p[0] * (j + p[1] * k)] = Complex64::new(q[i + qshape[0] * (j + qshape[1] * k)], 0.0);
            }
        }
    }
    // B[e] = K(e + dmin), dmin = offset − (qshape − 1)
    let span = [qshape[0] + tshape[0] - 1, qshape[1] + tshape[1] - 1, qshape[2] + tshape[2] - 1];
    for k in 0..span[2] {
        for j in 0..span[1] {
            for i in 0..span[0] {
                let e = [i as i64, j as i64, k as i64];
                let d = [
                    e[0] + offset[0] - (qshape[0] as i64 - 1),
                    e[1] + offset[1] - (qshape[1] as i64 - 1),
                    e[2] + offset[2] - (qshape[2] as i64 - 1),
                ];
                b[i + p[0] * (j + p[1] * k)] = Complex64::new(kernel(d), 0.0);
            }
        }
    }
    let mut planner = FftPlanner::new();
    fft_nd(&mut a, p, FftDirection::Forward, &mut planner);
    fft_nd(&mut b, p, FftDirection::Forward, &mut planner);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_nd(&mut a, p, FftDirection::Inverse, &mut planner);
    let scale = 1.0 / total as f64;
    let mut out = vec![0.0; tshape[0] * tshape[1] * tshape[2]];
    for k in 0..tshape[2] {
        for j in 0..tshape[1] {
            for i in 0..tshape[0] {
                let m = [i + qshape[0] - 1, j + qshape[1] - 1, k + qshape[2] - 1];
                out[i + tshape[0] * (j + tshape[1] * k)] = a[m[0] + p[0] * (m[1] + p[1] * m[2])].re * scale;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn cell_constants_match_quadrature() {
        // independent nested adaptive quadrature over the difference density
        let tol = Tolerance { abs: 1e-13, rel: 1e-12, max_intervals: 400 };
        let c2 = 4.0
            * integrate(
                |u| {
                    integrate(|v| -(1.0 - u) * (1.0 - v) * 0.5 * (u * u + v * v).ln(), 0.0, 1.0, tol).unwrap().0
                },
                0.0,
                1.0,
                tol,
            )
            .unwrap()
            .0;
        assert!((c2 - square_pair_log_mean()).abs() < 1e-9, "{c2}");
        assert!((square_point_log_mean() - 1.0611754268825243).abs() < 1e-12);
        assert!((cube_point_inverse_mean() - 2.3800773639795535).abs() < 1e-12);
        assert!((cube_pair_inverse_mean() - 1.8823126443896602).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let qshape = [5, 4, 3];
        let tshape = [3, 6, 2];
        let offset = [-2, 1, 3];
        let q: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let k = |d: [i64; 3]| 1.0 / (1.0 + (d[0] * d[0] + 2 * d[1] * d[1] + 3 * d[2] * d[2]) as f64) + d[0] as f64 * 0.01;
        let u = convolve(&q, qshape, tshape, offset, k).unwrap();
        for tk in 0..2 {
            for tj in 0..6 {
                for ti in 0..3 {
                    let mut s = 0.0;
                    for sk in 0..3 {
                        for sj in 0..4 {
                            for si in 0..5 {
                                let d = [ti + offset[0] - si, tj + offset[1] - sj, tk + offset[2] - sk];
                                s += q[(si + 5 * (sj + 4 * sk)) as usize] * k(d);
                            }
                        }
                    }
                    let got = u[(ti + 3 * (tj + 6 * tk)) as usize];
                    assert!((got - s).abs() < 1e-11, "{got} {s}");
                }
            }
        }
    }
}
