//! Banded symmetric positive definite systems over interior nodes.
//!
//! Both descent solvers precondition with the weighted stiffness matrix
//! `h ↦ Σ_cells vol·w·|∇h|²`, which is banded under the row-major interior
//! ordering (bandwidth 1 in 1D, `n₁ - 1` in 2D).

use crate::grid::Grid;

#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    // row i holds entries (i, i - k) for k = 0..=bw at i*(bw+1) + k
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to entry (i, j) of the symmetric matrix.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place Cholesky. Returns `None` if a pivot is not positive.
    pub fn factor(mut self) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                for k in k0..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    self.data[ij] = s.sqrt();
                } else {
                    self.data[ij] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Some(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &mut [f64]) {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= l.data[l.idx(k, i)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }
}

/// Maps global node indices to interior positions.
pub(crate) fn interior_positions(grid: &Grid) -> Vec<Option<usize>> {
    let mut pos = vec![None; grid.n_nodes()];
    for (k, &n) in grid.interior_nodes().iter().enumerate() {
        pos[n] = Some(k);
    }
    pos
}

/// Assembles `Σ_c vol_c (∇_c h)ᵀ W_c (∇_c h)` restricted to interior nodes.
/// `tensors` holds one symmetric `dim × dim` block per cell, row-major.
pub(crate) fn weighted_stiffness(grid: &Grid, pos: &[Option<usize>], tensors: &[f64]) -> BandedSpd {
    let dim = grid.dim();
    let bw = if dim == 1 { 1 } else { grid.spec().nodes_per_axis[1] - 1 };
    let mut m = BandedSpd::zeros(grid.interior_nodes().len(), bw);
    let h = grid.spacing();
    // per-axis gradient coefficients on the cell corners
    let coeffs: Vec<[f64; 4]> = if dim == 1 {
        vec![[-1.0 / h[0], 1.0 / h[0], 0.0, 0.0]]
    } else {
        let (a, b) = (0.5 / h[0], 0.5 / h[1]);
        vec![[-a, a, -a, a], [-b, -b, b, b]]
    };
    let k = 1 << dim;
    let dd = dim * dim;
    for (c, &vol) in grid.cell_volumes().iter().enumerate() {
        let w = &tensors[c * dd..(c + 1) * dd];
        let corners = grid.cell_corners(c);
        for r in 0..k {
            let Some(pr) = pos[corners[r]] else { continue };
            for s in 0..=r {
                let Some(ps) = pos[corners[s]] else { continue };
                let mut v = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        v += coeffs[i][r] * w[i * dim + j] * coeffs[j][s];
                    }
                }
                if v != 0.0 {
                    m.add(pr, ps, vol * v);
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn solves_tridiagonal() {
        let n = 6;
        let mut m = BandedSpd::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 }
            })
            .collect();
        m.factor().unwrap().solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut m = BandedSpd::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(1, 0, 2.0);
        assert!(m.factor().is_none());
    }

    #[test]
    fn stiffness_matches_quadratic_form_2d() {
        let grid = build_grid(&GridSpec::rectangle((0.0, 1.0), (0.0, 2.0), 6, 7)).unwrap();
        let pos = interior_positions(&grid);
        // symmetric positive tensors [[w, o], [o, 2w]]
        let w: Vec<f64> = (0..grid.n_cells()).map(|c| 1.0 + (c % 3) as f64).collect();
        let t: Vec<f64> = w.iter().flat_map(|&w| [w, 0.3 * w, 0.3 * w, 2.0 * w]).collect();
        let m = weighted_stiffness(&grid, &pos, &t);
        let mut u = vec![0.0; grid.n_nodes()];
        for (k, &n) in grid.interior_nodes().iter().enumerate() {
            u[n] = ((k * 13 % 7) as f64 - 3.0) * 0.3;
        }
        let mut g = vec![0.0; 2 * grid.n_cells()];
        grid.gradient_into(&u, &mut g);
        let direct: f64 = (0..grid.n_cells())
            .map(|c| {
                let (x, y) = (g[2 * c], g[2 * c + 1]);
                grid.cell_volumes()[c] * w[c] * (x * x + 0.6 * x * y + 2.0 * y * y)
            })
            .sum();
        let ui: Vec<f64> = grid.interior_nodes().iter().map(|&n| u[n]).collect();
        let mut quad = 0.0;
        for i in 0..ui.len() {
            for j in i.saturating_sub(m.bw)..=i {
                let v = m.data[m.idx(i, j)];
                quad += if i == j { v * ui[i] * ui[i] } else { 2.0 * v * ui[i] * ui[j] };
            }
        }
        assert!((quad - direct).abs() < 1e-10 * direct);
    }
}
