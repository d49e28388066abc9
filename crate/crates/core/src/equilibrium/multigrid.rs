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

//! Geometric multigrid for −Δ_h e = r on the free nodes of a box grid, with
//! e = 0 on a fixed set (box faces and the current coincidence set).
//!
//! Mirrored axes are handled with ghost nodes. Coarse nodes are fixed when
//! any fine node of their restriction stencil is fixed, so corrections never
//! leak into the coincidence set.

/// Node layout shared by the relaxation and multigrid solvers.
#[derive(Clone, Debug)]
pub(crate) struct Geometry {
    pub dim: usize,
    /// stored nodes per axis
    pub n: [usize; 3],
    /// padded sizes (one ghost layer on used axes)
    pub p: [usize; 3],
    pub mirror: [bool; 3],
    pub h: f64,
}

impl Geometry {
    pub fn new(dim: usize, n: [usize; 3], mirror: [bool; 3], h: f64) -> Self {
        let mut p = [1usize; 3];
        for a in 0..dim {
            p[a] = n[a] + 2;
        }
        Self { dim, n, p, mirror, h }
    }

    pub fn len(&self) -> usize {
        self.p[0] * self.p[1] * self.p[2]
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.p[0], self.p[0] * self.p[1]]
    }

    pub fn pid(&self, c: [usize; 3]) -> usize {
        let g2 = usize::from(self.dim == 3);
        (c[0] + 1) + self.p[0] * ((c[1] + 1) + self.p[1] * (c[2] + g2))
    }

    pub fn is_boundary(&self, c: [usize; 3]) -> bool {
        (0..self.dim).any(|a| c[a] == self.n[a] - 1 || (!self.mirror[a] && c[a] == 0))
    }

    pub fn degree(&self) -> f64 {
        2.0 * self.dim as f64
    }

    pub fn for_nodes(&self, mut f: impl FnMut([usize; 3])) {
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    f([i, j, k]);
                }
            }
        }
    }

    /// Calls `f(j, k, id of node (0, j, k))` for every stored row.
    pub fn for_rows(&self, mut f: impl FnMut(usize, usize, usize)) {
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                f(j, k, self.pid([0, j, k]));
            }
        }
    }

    pub fn refresh_ghosts(&self, x: &mut [f64]) {
        let p = self.p;
        let s = self.strides();
        for a in 0..self.dim {
            if !self.mirror[a] {
                continue;
            }
            let (b, c) = match a {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            for u in 0..p[c] {
                for t in 0..p[b] {
                    let id = t * s[b] + u * s[c];
                    x[id] = x[id + 2 * s[a]];
                }
            }
        }
    }

    #[inline(always)]
    pub fn neighbour_sum(&self, x: &[f64], id: usize) -> f64 {
        let s = self.strides();
        let mut t = x[id - 1] + x[id + 1] + x[id - s[1]] + x[id + s[1]];
        if self.dim == 3 {
            t += x[id - s[2]] + x[id + s[2]];
        }
        t
    }

    fn coarsen(&self) -> Option<Self> {
        let mut n = [1usize; 3];
        for a in 0..self.dim {
            let cells = self.n[a] - 1;
            if cells % 2 != 0 || cells < 8 {
                return None;
            }
            n[a] = cells / 2 + 1;
        }
        Some(Self::new(self.dim, n, self.mirror, 2.0 * self.h))
    }
}

struct MgLevel {
    geo: Geometry,
    /// 1 on free nodes, 0 on fixed nodes and ghosts
    free: Vec<f64>,
    /// 1 off the box faces and ghosts
    interior: Vec<f64>,
    x: Vec<f64>,
    r: Vec<f64>,
    t: Vec<f64>,
}

impl MgLevel {
    fn new(geo: Geometry) -> Self {
        let len = geo.len();
        let mut interior = vec![0.0; len];
        geo.for_nodes(|c| {
            if !geo.is_boundary(c) {
                interior[geo.pid(c)] = 1.0;
            }
        });
        Self { geo, free: vec![0.0; len], interior, x: vec![0.0; len], r: vec![0.0; len], t: vec![0.0; len] }
    }

    // red-black Gauss–Seidel on x for A x = r
    fn smooth(&mut self, order: [usize; 2]) {
        let g = &self.geo;
        let h2 = g.h * g.h;
        let inv = 1.0 / g.degree();
        let n0 = g.n[0];
        for colour in order {
            g.refresh_ghosts(&mut self.x);
            let (x, r, free) = (&mut self.x, &self.r, &self.free);
            g.for_rows(|j, k, base| {
                let start = (colour + j + k) % 2;
                for i in (start..n0).step_by(2) {
                    let id = base + i;
                    x[id] = free[id] * (g.neighbour_sum(x, id) + h2 * r[id]) * inv;
                }
            });
        }
    }

    // t = r − A x on free nodes
    fn residual(&mut self) {
        let g = &self.geo;
        g.refresh_ghosts(&mut self.x);
        let h2 = g.h * g.h;
        let deg = g.degree();
        let n0 = g.n[0];
        let (x, r, t, free) = (&self.x, &self.r, &mut self.t, &self.free);
        g.for_rows(|_, _, base| {
            for id in base..base + n0 {
                t[id] = free[id] * (r[id] - (deg * x[id] - g.neighbour_sum(x, id)) / h2);
            }
        });
    }
}

/// Full weighting of `fine` (ghosts refreshed here) onto the free nodes of `coarse`.
fn restrict(fg: &Geometry, fine: &mut [f64], cg: &Geometry, cfree: &[f64], out: &mut [f64]) {
    fg.refresh_ghosts(fine);
    let s = fg.strides();
    let d = fg.dim;
    let mut stencil = Vec::new();
    let span = |a: usize| if a < d { -1i64..=1 } else { 0..=0 };
    for dk in span(2) {
        for dj in span(1) {
            for di in span(0) {
                let w: f64 = [di, dj, dk].iter().take(d).map(|&x| if x == 0 { 0.5 } else { 0.25 }).product();
                stencil.push((di * s[0] as i64 + dj * s[1] as i64 + dk * s[2] as i64, w));
            }
        }
    }
    cg.for_rows(|j, k, base| {
        for i in 0..cg.n[0] {
            let cid = base + i;
            if cfree[cid] == 0.0 {
                out[cid] = 0.0;
                continue;
            }
            let centre = fg.pid([2 * i, 2 * j, 2 * k]) as i64;
            out[cid] = stencil.iter().map(|&(o, w)| w * fine[(centre + o) as usize]).sum();
        }
    });
}

/// x_fine += free·(multilinear interpolation of x_coarse).
fn prolong_add(cg: &Geometry, coarse: &[f64], fg: &Geometry, ffree: &[f64], x: &mut [f64]) {
    let mut row = vec![0.0; cg.n[0]];
    let split = |c: usize| -> [(usize, f64); 2] {
        if c % 2 == 0 {
            [(c / 2, 1.0), (c / 2, 0.0)]
        } else {
            [(c / 2, 0.5), (c / 2 + 1, 0.5)]
        }
    };
    fg.for_rows(|j, k, base| {
        row.iter_mut().for_each(|v| *v = 0.0);
        let js = split(j);
        let ks = if fg.dim == 3 { split(k) } else { [(0, 1.0), (0, 0.0)] };
        for &(jc, wj) in &js {
            for &(kc, wk) in &ks {
                let w = wj * wk;
                if w == 0.0 {
                    continue;
                }
                let cb = cg.pid([0, jc, kc]);
                for (i, v) in row.iter_mut().enumerate() {
                    *v += w * coarse[cb + i];
                }
            }
        }
        for i in 0..fg.n[0] {
            let v = if i % 2 == 0 { row[i / 2] } else { 0.5 * (row[i / 2] + row[i / 2 + 1]) };
            x[base + i] += ffree[base + i] * v;
        }
    });
}

/// Multigrid hierarchy below a fine grid. Level 0 holds the fine free mask
/// and residual; the fine smoother belongs to the caller.
pub(crate) struct Hierarchy {
    levels: Vec<MgLevel>,
    coarse_sweeps: usize,
}

impl Hierarchy {
    pub fn new(geo: &Geometry) -> Self {
        let mut levels = vec![MgLevel::new(geo.clone())];
        while let Some(cg) = levels.last().expect("non-empty").geo.coarsen() {
            levels.push(MgLevel::new(cg));
        }
        Self { levels, coarse_sweeps: 40 }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Free fine nodes are the interior nodes with `w > psi`; coarse nodes
    /// are free when their coincident fine node is.
    pub fn set_free(&mut self, w: &[f64], psi: f64) {
        {
            let l = &mut self.levels[0];
            let (g, free, inner) = (&l.geo, &mut l.free, &l.interior);
            let n0 = g.n[0];
            let s = g.strides();
            let dim3 = g.dim == 3;
            g.for_rows(|_, _, base| {
                for id in base..base + n0 {
                    let mut above = w[id] > psi && w[id - 1] > psi && w[id + 1] > psi && w[id - s[1]] > psi && w[id + s[1]] > psi;
                    if dim3 {
                        above = above && w[id - s[2]] > psi && w[id + s[2]] > psi;
                    }
                    free[id] = if above { inner[id] } else { 0.0 };
                }
            });
        }
        for lv in 1..self.levels.len() {
            let (a, b) = self.levels.split_at_mut(lv);
            let fine = &a[lv - 1];
            let coarse = &mut b[0];
            let (cg, cfree, inner) = (&coarse.geo, &mut coarse.free, &coarse.interior);
            cg.for_rows(|j, k, base| {
                let fb = fine.geo.pid([0, 2 * j, 2 * k]);
                for i in 0..cg.n[0] {
                    cfree[base + i] = inner[base + i] * fine.free[fb + 2 * i];
                }
            });
        }
    }

    pub fn fine_free(&self) -> &[f64] {
        &self.levels[0].free
    }

    fn vcycle(&mut self, lv: usize) {
        let last = self.levels.len() - 1;
        self.levels[lv].x.iter_mut().for_each(|v| *v = 0.0);
        if lv == last {
            let l = &mut self.levels[lv];
            for _ in 0..self.coarse_sweeps {
                l.smooth([0, 1]);
                l.smooth([1, 0]);
            }
            return;
        }
        self.levels[lv].smooth([0, 1]);
        self.levels[lv].residual();
        self.descend(lv);
        self.levels[lv].smooth([1, 0]);
    }

    // restrict levels[lv].t, cycle on lv+1, add the interpolated correction to levels[lv].x
    fn descend(&mut self, lv: usize) {
        let (a, b) = self.levels.split_at_mut(lv + 1);
        let (f, c) = (&mut a[lv], &mut b[0]);
        restrict(&f.geo, &mut f.t, &c.geo, &c.free, &mut c.r);
        self.vcycle(lv + 1);
        let (a, b) = self.levels.split_at_mut(lv + 1);
        let (f, c) = (&mut a[lv], &b[0]);
        prolong_add(&c.geo, &c.x, &f.geo, &f.free, &mut f.x);
    }

    /// Coarse-grid correction for a fine residual (zero off the free set).
    /// Returns the fine correction, which vanishes on fixed nodes.
    pub fn coarse_correction(&mut self, residual: &[f64]) -> &[f64] {
        let l0 = &mut self.levels[0];
        l0.t.copy_from_slice(residual);
        l0.x.iter_mut().for_each(|v| *v = 0.0);
        if self.levels.len() > 1 {
            self.descend(0);
        }
        &self.levels[0].x
    }

    /// Linear V-cycle on the fine level for A x = r (used by tests).
    #[cfg(test)]
    fn fine_vcycle(&mut self, r: &[f64]) -> Vec<f64> {
        self.levels[0].r.copy_from_slice(r);
        self.vcycle(0);
        self.levels[0].x.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // stationary V-cycle iteration on a problem with a fixed ball in the middle
    fn rate(dim: usize, mirror: [bool; 3], ball: f64) -> f64 {
        let n = if dim == 2 { 65 } else { 33 };
        let mut shape = [1usize; 3];
        for a in 0..dim {
            shape[a] = n;
        }
        let geo = Geometry::new(dim, shape, mirror, 1.0 / 32.0);
        let centre = |a: usize| if mirror[a] { 0.0 } else { (n / 2) as f64 };
        let mut fixed = vec![false; geo.len()];
        geo.for_nodes(|c| {
            let r2: f64 = (0..dim).map(|a| (c[a] as f64 - centre(a)).powi(2)).sum();
            fixed[geo.pid(c)] = r2 < ball;
        });
        let mut hier = Hierarchy::new(&geo);
        assert!(hier.depth() >= 3);
        let w: Vec<f64> = fixed.iter().map(|&f| if f { 0.0 } else { 1.0 }).collect();
        hier.set_free(&w, 0.5);
        let free = hier.fine_free().to_vec();
        let mut b = vec![0.0; geo.len()];
        geo.for_nodes(|c| {
            let id = geo.pid(c);
            b[id] = free[id] * (((c[0] * 7 + c[1] * 3 + c[2]) % 5) as f64 - 2.0);
        });
        let mut x = vec![0.0; geo.len()];
        let mut norms = Vec::new();
        let deg = geo.degree();
        let h2 = geo.h * geo.h;
        for _ in 0..12 {
            geo.refresh_ghosts(&mut x);
            let mut r = vec![0.0; geo.len()];
            let mut norm: f64 = 0.0;
            geo.for_nodes(|c| {
                let id = geo.pid(c);
                r[id] = free[id] * (b[id] - (deg * x[id] - geo.neighbour_sum(&x, id)) / h2);
                norm = norm.max(r[id].abs());
            });
            norms.push(norm);
            let e = hier.fine_vcycle(&r);
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi += ei;
            }
        }
        (norms[11] / norms[4]).powf(1.0 / 7.0)
    }

    #[test]
    fn vcycle_contracts_with_fixed_ball() {
        for (dim, mirror) in [(2, [false; 3]), (2, [true, false, false]), (3, [true, true, true]), (3, [false; 3])] {
            let q = rate(dim, mirror, 90.0);
            assert!(q < 0.4, "dim {dim} mirror {mirror:?}: rate {q}");
        }
    }
}
