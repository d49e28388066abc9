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

//! Bravais lattices with a basis of offsets, modular parameters for planar
//! lattices, Ewald-summed torus Green functions and Epstein zeta sums.

mod epstein;
mod ewald;

pub use epstein::epstein_zeta;
pub(crate) use ewald::shell_tail_bound;
pub use ewald::{coulomb_constant, green_self_constant, torus_green, EwaldParams, EwaldSum};
pub use epstein::epstein_zeta_certified;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Periodic point set: a Bravais lattice plus offsets in its unit cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    /// basis[j] is the j-th primitive vector; for d = 2 the third is e_z
    basis: [Vec3; 3],
    /// rows of the inverse basis matrix
    inverse: [Vec3; 3],
    offsets: Vec<Vec3>,
}

fn invert(b: &[Vec3; 3]) -> Option<[Vec3; 3]> {
    // columns b[0], b[1], b[2]; inverse rows are the dual vectors
    let det = geom::dot(b[0], geom::cross(b[1], b[2]));
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let r0 = geom::scale(geom::cross(b[1], b[2]), 1.0 / det);
    let r1 = geom::scale(geom::cross(b[2], b[0]), 1.0 / det);
    let r2 = geom::scale(geom::cross(b[0], b[1]), 1.0 / det);
    Some([r0, r1, r2])
}

impl Lattice {
    /// Builds a lattice from basis vectors (Cartesian) and fractional offsets.
    pub fn new(basis: &[Vec<f64>], offsets: &[Vec<f64>]) -> Result<Self> {
        let dim = basis.len();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        if basis.iter().any(|v| v.len() != dim) || offsets.iter().any(|o| o.len() != dim) {
            return Err(Error::InvalidParameter("basis/offset length does not match dimension".into()));
        }
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("at least one offset is required".into()));
        }
        let mut b = [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]];
        for (j, v) in basis.iter().enumerate() {
            b[j] = geom::pad(v);
        }
        Self::from_parts(dim, b, offsets.iter().map(|o| geom::pad(o)).collect())
    }

    fn from_parts(dim: usize, basis: [Vec3; 3], offsets: Vec<Vec3>) -> Result<Self> {
        if basis.iter().flatten().chain(offsets.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite lattice data".into()));
        }
        let inverse = invert(&basis).ok_or_else(|| Error::InvalidParameter("degenerate basis".into()))?;
        let mut offs: Vec<Vec3> = offsets
            .into_iter()
            .map(|o| {
                let mut w = o;
                for x in w.iter_mut().take(dim) {
                    *x -= x.floor();
                }
                w
            })
            .collect();
        for o in offs.iter_mut() {
            o[2] = if dim == 2 { 0.0 } else { o[2] };
        }
        let lat = Self { dim, basis, inverse, offsets: offs };
        if lat.volume() <= 0.0 || !lat.volume().is_finite() {
            return Err(Error::InvalidParameter("cell volume must be positive".into()));
        }
        for i in 0..lat.offsets.len() {
            for j in 0..i {
                let d = lat.min_image(geom::sub(lat.offset_position(i), lat.offset_position(j)));
                if geom::norm(d) < 1e-10 * lat.volume().powf(1.0 / dim as f64) {
                    return Err(Error::InvalidParameter(format!("offsets {j} and {i} coincide modulo the lattice")));
                }
            }
        }
        Ok(lat)
    }

    /// Planar lattice spanned by u and τu, scaled to the requested density.
    pub fn from_tau(tau: ModularParameter, density: f64) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
        }
        let side = (1.0 / (density * tau.im)).sqrt();
        let basis = [[side, 0.0, 0.0], [side * tau.re, side * tau.im, 0.0], [0.0, 0.0, 1.0]];
        Self::from_parts(2, basis, vec![[0.0; 3]])
    }

    pub fn square(density: f64) -> Result<Self> {
        Self::from_tau(ModularParameter::i(), density)
    }

    pub fn triangular(density: f64) -> Result<Self> {
        Self::from_tau(ModularParameter::hexagonal(), density)
    }

    /// Primitive cubic lattices at the given point density.
    pub fn cubic(kind: CubicKind, density: f64) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
        }
        let basis = match kind {
            CubicKind::Simple => {
                let a = density.powf(-1.0 / 3.0);
                [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]]
            }
            CubicKind::BodyCentered => {
                let h = 0.5 * (2.0 / density).powf(1.0 / 3.0);
                [[-h, h, h], [h, -h, h], [h, h, -h]]
            }
            CubicKind::FaceCentered => {
                let h = 0.5 * (4.0 / density).powf(1.0 / 3.0);
                [[0.0, h, h], [h, 0.0, h], [h, h, 0.0]]
            }
        };
        Self::from_parts(3, basis, vec![[0.0; 3]])
    }

    /// Conventional cubic cell with 1, 2 or 4 offsets.
    pub fn cubic_conventional(kind: CubicKind, density: f64) -> Result<Self> {
        let offsets: Vec<Vec3> = match kind {
            CubicKind::Simple => vec![[0.0; 3]],
            CubicKind::BodyCentered => vec![[0.0; 3], [0.5; 3]],
            CubicKind::FaceCentered => vec![[0.0; 3], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
        };
        let a = (offsets.len() as f64 / density).powf(1.0 / 3.0);
        Self::from_parts(3, [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]], offsets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    pub fn basis_vector(&self, j: usize) -> Vec3 {
        self.basis[j]
    }

    pub fn fractional_offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    /// Cell volume (area in 2D).
    pub fn volume(&self) -> f64 {
        let b = &self.basis;
        geom::dot(b[0], geom::cross(b[1], b[2])).abs()
    }

    /// Points per unit volume.
    pub fn density(&self) -> f64 {
        self.offsets.len() as f64 / self.volume()
    }

    pub fn to_cartesian(&self, frac: Vec3) -> Vec3 {
        let mut x = [0.0; 3];
        for j in 0..self.dim {
            x = geom::add(x, geom::scale(self.basis[j], frac[j]));
        }
        x
    }

    pub fn to_fractional(&self, x: Vec3) -> Vec3 {
        let mut f = [0.0; 3];
        for j in 0..self.dim {
            f[j] = geom::dot(self.inverse[j], x);
        }
        f
    }

    /// Cartesian position of offset `i` inside the reference cell.
    pub fn offset_position(&self, i: usize) -> Vec3 {
        self.to_cartesian(self.offsets[i])
    }

    pub fn positions(&self) -> Vec<Vec3> {
        (0..self.offsets.len()).map(|i| self.offset_position(i)).collect()
    }

    /// Reduces `x` into the cell centred at the origin (not necessarily the
    /// shortest image for skewed cells).
    pub fn reduce(&self, x: Vec3) -> Vec3 {
        let mut f = self.to_fractional(x);
        for v in f.iter_mut().take(self.dim) {
            *v -= v.round();
        }
        self.to_cartesian(f)
    }

    /// Shortest representative of `x` modulo the lattice.
    pub fn min_image(&self, x: Vec3) -> Vec3 {
        let base = self.reduce(x);
        let mut best = base;
        let mut best_n = geom::norm2(base);
        let r = if self.dim == 3 { 1 } else { 0 };
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -r..=r {
                    let y = geom::sub(base, self.to_cartesian([i as f64, j as f64, k as f64]));
                    let n = geom::norm2(y);
                    if n < best_n {
                        best_n = n;
                        best = y;
                    }
                }
            }
        }
        best
    }

    /// Largest distance from the centre of the origin-centred cell to a corner.
    pub fn cell_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        let signs: &[f64] = &[-0.5, 0.5];
        for &a in signs {
            for &b in signs {
                for &c in if self.dim == 3 { signs } else { &[0.0][..] } {
                    r = r.max(geom::norm(self.to_cartesian([a, b, c])));
                }
            }
        }
        r
    }

    /// Rows of the inverse basis times 2π: the dual basis with b_i·a_j = 2πδ_ij.
    pub fn reciprocal_basis(&self) -> [Vec3; 3] {
        let mut out = [[0.0; 3]; 3];
        for j in 0..self.dim {
            out[j] = geom::scale(self.inverse[j], 2.0 * PI);
        }
        out
    }

    /// All Bravais vectors of length at most `radius`, origin included.
    pub fn vectors_within(&self, radius: f64) -> Vec<Vec3> {
        enumerate_within(self.dim, &self.basis, &self.inverse, radius)
    }

    fn dual_frame(&self) -> ([Vec3; 3], [Vec3; 3]) {
        let mut rb = self.reciprocal_basis();
        let mut inv = [[0.0; 3]; 3];
        for j in 0..self.dim {
            inv[j] = geom::scale(self.basis[j], 1.0 / (2.0 * PI));
        }
        if self.dim == 2 {
            rb[2] = [0.0, 0.0, 1.0];
            inv[2] = [0.0, 0.0, 1.0];
        }
        (rb, inv)
    }

    /// Dual lattice vectors of length at most `radius`, origin first.
    pub fn dual_vectors_within(&self, radius: f64) -> Vec<Vec3> {
        let (rb, inv) = self.dual_frame();
        enumerate_within(self.dim, &rb, &inv, radius)
    }

    /// [`Lattice::cell_radius`] for the dual lattice.
    pub fn dual_cell_radius(&self) -> f64 {
        let (rb, _) = self.dual_frame();
        let signs: &[f64] = &[-0.5, 0.5];
        let mut r: f64 = 0.0;
        for &a in signs {
            for &b in signs {
                for &c in if self.dim == 3 { signs } else { &[0.0][..] } {
                    let v = geom::add(geom::add(geom::scale(rb[0], a), geom::scale(rb[1], b)), geom::scale(rb[2], c));
                    r = r.max(geom::norm(v));
                }
            }
        }
        r
    }

    /// Smallest distance between two distinct points of the periodic set.
    pub fn min_distance(&self) -> f64 {
        let n = self.offsets.len();
        let mut best = f64::INFINITY;
        let reach = (0..self.dim).map(|j| geom::norm(self.basis[j])).fold(0.0, f64::max) + 2.0 * self.cell_radius();
        let vecs = self.vectors_within(reach);
        for i in 0..n {
            for j in 0..n {
                let d0 = geom::sub(self.offset_position(i), self.offset_position(j));
                for p in &vecs {
                    let d = geom::norm(geom::add(d0, *p));
                    if d > 0.0 && !(i == j && geom::norm2(*p) == 0.0) {
                        best = best.min(d);
                    }
                }
            }
        }
        best
    }

    /// Dilation by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidParameter("scale factor must be positive".into()));
        }
        let mut b = self.basis;
        for j in 0..self.dim {
            b[j] = geom::scale(b[j], factor);
        }
        Self::from_parts(self.dim, b, self.offsets.clone())
    }

    /// Applies an orthogonal matrix (row-major) to the basis.
    pub fn rotated(&self, rot: [[f64; 3]; 3]) -> Result<Self> {
        let mut b = self.basis;
        for j in 0..self.dim {
            let v = self.basis[j];
            b[j] = [geom::dot(rot[0], v), geom::dot(rot[1], v), geom::dot(rot[2], v)];
        }
        Self::from_parts(self.dim, b, self.offsets.clone())
    }

    /// Replaces the basis by integer combinations `m` (rows, unimodular) of the old one.
    pub fn rebased(&self, m: [[i64; 3]; 3]) -> Result<Self> {
        let mut b = [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]];
        for i in 0..self.dim {
            let mut v = [0.0; 3];
            for j in 0..self.dim {
                v = geom::add(v, geom::scale(self.basis[j], m[i][j] as f64));
            }
            b[i] = v;
        }
        let new = Self::from_parts(self.dim, b, vec![[0.0; 3]])?;
        if (new.volume() - self.volume()).abs() > 1e-9 * self.volume() {
            return Err(Error::InvalidParameter("basis change is not unimodular".into()));
        }
        let offs = self.positions().into_iter().map(|x| new.to_fractional(x)).collect();
        Self::from_parts(self.dim, b, offs)
    }

    /// Supercell with `mult[j]` copies along basis vector j.
    pub fn supercell(&self, mult: [usize; 3]) -> Result<Self> {
        let mut b = self.basis;
        let m: Vec<usize> = (0..3).map(|j| if j < self.dim { mult[j].max(1) } else { 1 }).collect();
        for j in 0..self.dim {
            b[j] = geom::scale(b[j], m[j] as f64);
        }
        let mut offs = Vec::new();
        for i in 0..m[0] {
            for j in 0..m[1] {
                for k in 0..m[2] {
                    for o in &self.offsets {
                        offs.push([
                            (o[0] + i as f64) / m[0] as f64,
                            (o[1] + j as f64) / m[1] as f64,
                            if self.dim == 3 { (o[2] + k as f64) / m[2] as f64 } else { 0.0 },
                        ]);
                    }
                }
            }
        }
        Self::from_parts(self.dim, b, offs)
    }
}

pub(crate) fn enumerate_within(dim: usize, basis: &[Vec3; 3], inverse: &[Vec3; 3], radius: f64) -> Vec<Vec3> {
    let lim: Vec<i64> = (0..3)
        .map(|j| if j < dim { (radius * geom::norm(inverse[j])).floor() as i64 } else { 0 })
        .collect();
    let mut out = Vec::new();
    let r2 = radius * radius;
    for i in -lim[0]..=lim[0] {
        for j in -lim[1]..=lim[1] {
            for k in -lim[2]..=lim[2] {
                let mut v = geom::add(geom::scale(basis[0], i as f64), geom::scale(basis[1], j as f64));
                if dim == 3 {
                    v = geom::add(v, geom::scale(basis[2], k as f64));
                }
                if geom::norm2(v) <= r2 {
                    out.push(v);
                }
            }
        }
    }
    // deterministic order: by length, then lexicographic
    out.sort_by(|a, b| {
        geom::norm2(*a)
            .total_cmp(&geom::norm2(*b))
            .then(a[0].total_cmp(&b[0]))
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    out
}

/// The three cubic Bravais lattices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubicKind {
    Simple,
    BodyCentered,
    FaceCentered,
}

impl CubicKind {
    pub fn name(self) -> &'static str {
        match self {
            CubicKind::Simple => "sc",
            CubicKind::BodyCentered => "bcc",
            CubicKind::FaceCentered => "fcc",
        }
    }
}

/// Point τ of the upper half plane parametrising a planar lattice shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularParameter {
    pub re: f64,
    pub im: f64,
}

/// Upper edge of the truncated fundamental domain used by the scan.
pub const TAU_MAX: f64 = 2.0;

impl ModularParameter {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidParameter(format!("Im τ must be positive, got {im}")));
        }
        Ok(Self { re, im })
    }

    pub fn i() -> Self {
        Self { re: 0.0, im: 1.0 }
    }

    /// e^{iπ/3}.
    pub fn hexagonal() -> Self {
        Self { re: 0.5, im: 0.75f64.sqrt() }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn in_fundamental_domain(&self, tol: f64) -> bool {
        self.re.abs() <= 0.5 + tol && self.abs() >= 1.0 - tol
    }

    /// Mirror image −τ̄, describing the reflected lattice.
    pub fn mirrored(&self) -> Self {
        Self { re: -self.re, im: self.im }
    }

    /// Maps τ into the standard fundamental domain with τ ↦ τ + 1 and τ ↦ −1/τ.
    pub fn reduced(&self) -> Self {
        let mut t = *self;
        for _ in 0..200 {
            t.re -= t.re.round();
            let a2 = t.re * t.re + t.im * t.im;
            if a2 >= 1.0 - 1e-15 {
                break;
            }
            t = Self { re: -t.re / a2, im: t.im / a2 };
        }
        t
    }
}

/// Grid over {|Re τ| ≤ 1/2, |τ| ≥ 1, Im τ ≤ [`TAU_MAX`]}.
///
/// Re τ takes 2r − 1 equispaced values and each column has r values of Im τ
/// from the unit circle up to `TAU_MAX`, so τ = i and τ = e^{±iπ/3} are nodes.
pub fn fundamental_domain_grid(resolution: usize) -> Result<Vec<ModularParameter>> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!("resolution must be at least 2, got {resolution}")));
    }
    let cols = 2 * (resolution - 1);
    let mut out = Vec::with_capacity((cols + 1) * resolution);
    for j in 0..=cols {
        let x = if j == resolution - 1 { 0.0 } else { -0.5 + j as f64 / (2.0 * (resolution - 1) as f64) };
        let lo = if j == 0 || j == cols { 0.75f64.sqrt() } else { (1.0 - x * x).sqrt() };
        for k in 0..resolution {
            let y = if k == 0 { lo } else { lo + (TAU_MAX - lo) * k as f64 / (resolution - 1) as f64 };
            out.push(ModularParameter { re: x, im: y });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_lattices_have_requested_area() {
        let sq = Lattice::square(1.0).unwrap();
        assert!((sq.volume() - 1.0).abs() < 1e-15);
        let tri = Lattice::triangular(1.0).unwrap();
        assert!((geom::norm2(tri.basis_vector(0)) - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        let sq4 = Lattice::square(4.0).unwrap();
        assert!((geom::norm(sq4.basis_vector(0)) - 0.5).abs() < 1e-15);
        assert!(Lattice::from_tau(ModularParameter::i(), 0.0).is_err());
        assert!(ModularParameter::new(0.0, -1.0).is_err());
    }

    #[test]
    fn cubic_densities() {
        for kind in [CubicKind::Simple, CubicKind::BodyCentered, CubicKind::FaceCentered] {
            let p = Lattice::cubic(kind, 1.0).unwrap();
            let c = Lattice::cubic_conventional(kind, 1.0).unwrap();
            assert!((p.density() - 1.0).abs() < 1e-12);
            assert!((c.density() - 1.0).abs() < 1e-12);
            assert!((p.min_distance() - c.min_distance()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_offsets_are_rejected() {
        let r = Lattice::new(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn grid_contains_corners() {
        let g = fundamental_domain_grid(2).unwrap();
        assert_eq!(g.len(), 6);
        let has = |t: ModularParameter| g.iter().any(|s| (s.re - t.re).abs() < 1e-15 && (s.im - t.im).abs() < 1e-15);
        assert!(has(ModularParameter::i()));
        assert!(has(ModularParameter::hexagonal()));
        assert!(has(ModularParameter::hexagonal().mirrored()));
        for r in [2, 5, 16] {
            let g = fundamental_domain_grid(r).unwrap();
            assert_eq!(g.len(), (2 * r - 1) * r);
            assert!(g.iter().all(|t| t.im >= 0.75f64.sqrt() - 1e-15 && t.in_fundamental_domain(1e-12)));
        }
    }

    #[test]
    fn reduction_lands_in_domain() {
        let t = ModularParameter::new(3.3, 0.2).unwrap().reduced();
        assert!(t.in_fundamental_domain(1e-12));
    }
}
