//! Preconditioned descent directions shared by the eigenvalue and Nehari
//! solvers.
//!
//! The metric is the Hessian of the gradient terms of the energy with the
//! coefficients frozen at the current iterate, `h ↦ ∫ ∇hᵀ H(∇u) ∇h` with
//! `H(g) = Σ_s c_s m_δ^{s-2} (I + (s-2) g gᵀ / m_δ²)` over the active
//! exponents, and `δ` a fraction of the largest cell gradient. For `p = 2`
//! a unit step on the Rayleigh quotient is one inverse-iteration sweep.

use crate::grid::Grid;
use crate::linalg::{interior_positions, weighted_stiffness};
use crate::modular::DoublePhase;
use crate::operator::grad_magnitudes;

const DELTA_FRACTION: f64 = 1e-2;
const WEIGHT_FLOOR: f64 = 1e-10;

pub(crate) struct Preconditioner {
    pos: Vec<Option<usize>>,
}

impl Preconditioner {
    pub fn new(grid: &Grid) -> Self {
        Preconditioner {
            pos: interior_positions(grid),
        }
    }

    /// Returns `-K(u)⁻¹ g` as a nodal vector (masked entries zero), or `None`
    /// if the factorization breaks down.
    pub fn direction(&self, dp: &DoublePhase, u: &[f64], g: &[f64], with_q: bool) -> Option<Vec<f64>> {
        let grid = dp.grid();
        let (p, q) = (dp.p(), dp.q());
        let dim = grid.dim();
        let (cg, mag) = grad_magnitudes(grid, u);
        let gmax = mag.iter().cloned().fold(0.0, f64::max);
        let delta = if gmax > 0.0 { DELTA_FRACTION * gmax } else { 1.0 };
        // isotropic and rank-one coefficients per cell
        let mut coef: Vec<(f64, f64)> = mag
            .iter()
            .zip(dp.weight().cell())
            .map(|(m, a)| {
                let s = m * m + delta * delta;
                let cp = a * s.powf(0.5 * (p - 2.0));
                let (mut iso, mut rank) = (cp, cp * (p - 2.0) / s);
                if with_q {
                    let cq = s.powf(0.5 * (q - 2.0));
                    iso += cq;
                    rank += cq * (q - 2.0) / s;
                }
                (iso, rank)
            })
            .collect();
        let wmax = coef.iter().map(|c| c.0).fold(0.0, f64::max);
        if !(wmax > 0.0) || !wmax.is_finite() {
            return None;
        }
        for c in &mut coef {
            if c.0 < WEIGHT_FLOOR * wmax {
                *c = (WEIGHT_FLOOR * wmax, 0.0);
            }
        }
        let mut w = vec![0.0; coef.len() * dim * dim];
        for (c, &(iso, rank)) in coef.iter().enumerate() {
            let gc = &cg[c * dim..(c + 1) * dim];
            let blk = &mut w[c * dim * dim..(c + 1) * dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    blk[i * dim + j] = rank * gc[i] * gc[j] + if i == j { iso } else { 0.0 };
                }
            }
        }
        let chol = weighted_stiffness(grid, &self.pos, &w).factor()?;
        let interior = grid.interior_nodes();
        let mut rhs: Vec<f64> = interior.iter().map(|&i| -g[i]).collect();
        chol.solve(&mut rhs);
        let mut d = vec![0.0; grid.n_nodes()];
        for (k, &i) in interior.iter().enumerate() {
            d[i] = rhs[k];
        }
        Some(d)
    }
}

pub(crate) fn axpy(u: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(x, y)| x + alpha * y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
