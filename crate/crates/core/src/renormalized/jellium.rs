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

//! Fourier description of the jellium potential H of a periodic configuration.

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::lattice::{coulomb_constant, Lattice};
use num_complex::Complex64;

/// Periodic potential with −ΔH = c_d(Σ_j δ_{a_j} − m), stored by its Fourier
/// coefficients on the dual lattice up to a cutoff.
#[derive(Clone, Debug)]
pub struct JelliumField {
    pub lattice: Lattice,
    pub background_density: f64,
    pub modes: Vec<(Vec3, Complex64)>,
}

impl JelliumField {
    pub fn new(lattice: &Lattice, k_cutoff: f64) -> Result<Self> {
        if !(k_cutoff > 0.0) {
            return Err(Error::InvalidParameter("Fourier cutoff must be positive".into()));
        }
        let v = lattice.volume();
        let cd = coulomb_constant(lattice.dim());
        let rb = lattice.reciprocal_basis();
        let lim: Vec<i64> = (0..3)
            .map(|j| if j < lattice.dim() { (k_cutoff * geom::norm(lattice.basis_vector(j)) / (2.0 * std::f64::consts::PI)).ceil() as i64 } else { 0 })
            .collect();
        let mut modes = Vec::new();
        for i in -lim[0]..=lim[0] {
            for j in -lim[1]..=lim[1] {
                for l in -lim[2]..=lim[2] {
                    if i == 0 && j == 0 && l == 0 {
                        continue;
                    }
                    let k = geom::add(geom::add(geom::scale(rb[0], i as f64), geom::scale(rb[1], j as f64)), geom::scale(rb[2], l as f64));
                    let k2 = geom::norm2(k);
                    if k2 > k_cutoff * k_cutoff {
                        continue;
                    }
                    let s = structure_factor(lattice, k);
                    modes.push((k, s * (cd / (v * k2))));
                }
            }
        }
        Ok(Self { lattice: lattice.clone(), background_density: lattice.density(), modes })
    }

    /// Truncated Fourier synthesis of H at x.
    pub fn potential(&self, x: Vec3) -> f64 {
        self.modes.iter().map(|(k, c)| (c * Complex64::from_polar(1.0, geom::dot(*k, x))).re).sum()
    }
}

/// S(k) = Σ_j e^{−ik·a_j}.
pub fn structure_factor(lattice: &Lattice, k: Vec3) -> Complex64 {
    lattice.positions().iter().map(|a| Complex64::from_polar(1.0, -geom::dot(k, *a))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_and_real() {
        let lat = Lattice::triangular(1.0).unwrap().supercell([2, 1, 1]).unwrap();
        let f = JelliumField::new(&lat, 20.0).unwrap();
        assert!((f.background_density * lat.volume() - lat.n_offsets() as f64).abs() < 1e-12);
        for (k, c) in &f.modes {
            let partner = f.modes.iter().find(|(q, _)| geom::norm(geom::add(*q, *k)) < 1e-9).unwrap();
            assert!((partner.1 - c.conj()).norm() < 1e-12);
        }
    }
}
