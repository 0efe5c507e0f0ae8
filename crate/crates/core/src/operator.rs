//! The energy `φ_λ`, the operators `A_pᵃ`, `A_q` and `V = A_pᵃ + A_q`, and
//! the derivative pairing `⟨φ'_λ(u), h⟩`.
//!
//! `φ_λ` is evaluated exactly. The pairings use the regularized magnitude
//! `m_ε(g) = (|g|² + ε²)^{1/2}` in place of `|g|` inside `|g|^{s-2}`, so they
//! stay finite where the gradient vanishes and `s < 2`.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::modular::{rho0_raw, DoublePhase};

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub dp: DoublePhase,
    pub lambda: f64,
    pub epsilon_reg: f64,
}

impl Problem {
    pub fn new(dp: DoublePhase, lambda: f64, epsilon_reg: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        if !(epsilon_reg >= 0.0) || !epsilon_reg.is_finite() {
            return Err(Error::Config(format!("epsilon_reg must be >= 0, got {epsilon_reg}")));
        }
        Ok(Problem { dp, lambda, epsilon_reg })
    }

    /// Uses the default regularization `1e-8 / diam(Ω)`.
    pub fn with_default_eps(dp: DoublePhase, lambda: f64) -> Result<Self> {
        let eps = default_epsilon(dp.grid());
        Self::new(dp, lambda, eps)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.dp.clone(), lambda, self.epsilon_reg)
    }

    pub fn grid(&self) -> &Grid {
        self.dp.grid()
    }
}

pub fn default_epsilon(grid: &Grid) -> f64 {
    1e-8 / grid.diameter()
}

/// `|x|^{s-2} x`, extended by 0 at 0.
#[inline]
pub(crate) fn signed_pow(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(s - 1.0).copysign(x)
    }
}

/// The three integrals that make up `φ_λ`, evaluated at a nodal vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// `ρ_Θ₀(∇u)`
    pub rho0_grad: f64,
    /// `‖∇u‖_q^q`
    pub lq_grad: f64,
    /// `ρ_Θ₀(u)`
    pub rho0: f64,
}

impl EnergyTerms {
    pub fn phi(&self, p: f64, q: f64, lambda: f64) -> f64 {
        self.rho0_grad / p + self.lq_grad / q - lambda * self.rho0 / p
    }

    /// `⟨φ'_λ(u), u⟩`.
    pub fn nehari_gap(&self, lambda: f64) -> f64 {
        self.rho0_grad + self.lq_grad - lambda * self.rho0
    }

    pub fn scaled(&self, t: f64, p: f64, q: f64) -> Self {
        EnergyTerms {
            rho0_grad: t.powf(p) * self.rho0_grad,
            lq_grad: t.powf(q) * self.lq_grad,
            rho0: t.powf(p) * self.rho0,
        }
    }
}

pub(crate) fn grad_magnitudes(grid: &Grid, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dim = grid.dim();
    let mut g = vec![0.0; grid.n_cells() * dim];
    grid.gradient_into(u, &mut g);
    let mag = g
        .chunks(dim)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    (g, mag)
}

pub(crate) fn cell_values(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_cells()];
    grid.cell_average_into(u, &mut out);
    out
}

pub fn energy_terms_raw(dp: &DoublePhase, u: &[f64]) -> EnergyTerms {
    let grid = dp.grid();
    let (p, q) = (dp.p(), dp.q());
    let a = dp.weight().cell();
    let (_, mag) = grad_magnitudes(grid, u);
    let ubar = cell_values(grid, u);
    let mut rho0_grad = 0.0;
    let mut lq_grad = 0.0;
    for ((m, a), w) in mag.iter().zip(a).zip(grid.cell_volumes()) {
        rho0_grad += w * a * m.powf(p);
        lq_grad += w * m.powf(q);
    }
    EnergyTerms {
        rho0_grad,
        lq_grad,
        rho0: rho0_raw(grid, a, p, &ubar),
    }
}

pub fn energy_terms(dp: &DoublePhase, u: &ScalarField) -> EnergyTerms {
    energy_terms_raw(dp, u.values())
}

/// `φ_λ(u) = (1/p)ρ_Θ₀(∇u) + (1/q)‖∇u‖_q^q − (λ/p)ρ_Θ₀(u)`.
pub fn phi_lambda(prob: &Problem, u: &ScalarField) -> f64 {
    energy_terms(&prob.dp, u).phi(prob.dp.p(), prob.dp.q(), prob.lambda)
}

fn check_same_grid(prob: &Problem, u: &ScalarField) -> Result<()> {
    if u.values().len() != prob.grid().n_nodes() {
        return Err(Error::LengthMismatch {
            expected: prob.grid().n_nodes(),
            got: u.values().len(),
        });
    }
    Ok(())
}

// Per-cell factor m_ε(g)^{s-2}, with the singular case reported.
fn flux_factor(mag: f64, s: f64, eps: f64, cell: usize) -> Result<f64> {
    if eps == 0.0 {
        if mag == 0.0 {
            if s < 2.0 {
                return Err(Error::SingularIntegrand { exponent: s, cell });
            }
            return Ok(if s == 2.0 { 1.0 } else { 0.0 });
        }
        Ok(mag.powf(s - 2.0))
    } else {
        Ok((mag * mag + eps * eps).powf(0.5 * (s - 2.0)))
    }
}

fn pairing_generic(
    prob: &Problem,
    u: &ScalarField,
    h: &ScalarField,
    s: f64,
    weighted: bool,
) -> Result<f64> {
    check_same_grid(prob, u)?;
    check_same_grid(prob, h)?;
    let grid = prob.grid();
    let dim = grid.dim();
    let (gu, mag) = grad_magnitudes(grid, u.values());
    let (gh, _) = grad_magnitudes(grid, h.values());
    let a = prob.dp.weight().cell();
    let mut total = 0.0;
    for c in 0..grid.n_cells() {
        let w = if weighted { a[c] } else { 1.0 };
        let dot: f64 = (0..dim).map(|k| gu[c * dim + k] * gh[c * dim + k]).sum();
        let f = flux_factor(mag[c], s, prob.epsilon_reg, c)?;
        total += grid.cell_volumes()[c] * w * f * dot;
    }
    Ok(total)
}

/// `⟨A_pᵃ(u), h⟩ = ∫ a m_ε(∇u)^{p−2} ∇u·∇h`.
pub fn pairing_apa(prob: &Problem, u: &ScalarField, h: &ScalarField) -> Result<f64> {
    pairing_generic(prob, u, h, prob.dp.p(), true)
}

/// `⟨A_q(u), h⟩ = ∫ m_ε(∇u)^{q−2} ∇u·∇h`.
pub fn pairing_aq(prob: &Problem, u: &ScalarField, h: &ScalarField) -> Result<f64> {
    pairing_generic(prob, u, h, prob.dp.q(), false)
}

pub fn pairing_v(prob: &Problem, u: &ScalarField, h: &ScalarField) -> Result<f64> {
    Ok(pairing_apa(prob, u, h)? + pairing_aq(prob, u, h)?)
}

/// `⟨φ'_λ(u), h⟩ = ⟨V(u), h⟩ − λ ∫ a|u|^{p−2}u h`, with the last integral
/// collocated at cell midpoints.
pub fn phi_prime_pairing(prob: &Problem, u: &ScalarField, h: &ScalarField) -> Result<f64> {
    let v = pairing_v(prob, u, h)?;
    let grid = prob.grid();
    let p = prob.dp.p();
    let ubar = cell_values(grid, u.values());
    let hbar = cell_values(grid, h.values());
    let mass: f64 = ubar
        .iter()
        .zip(&hbar)
        .zip(prob.dp.weight().cell())
        .zip(grid.cell_volumes())
        .map(|(((uc, hc), a), w)| w * a * signed_pow(*uc, p) * hc)
        .sum();
    Ok(v - prob.lambda * mass)
}

/// Nodal derivative pieces at `u`: `(∂ρ_Θ₀(∇u)/p, ∂‖∇u‖_q^q/q, ∂ρ_Θ₀(u)/p)`
/// as vectors over all nodes, i.e. `⟨A_pᵃ(u), e_i⟩`, `⟨A_q(u), e_i⟩` and
/// `∫ a|u|^{p-2}u e_i`. Masked entries are zeroed.
pub(crate) struct NodalDerivative {
    pub apa: Vec<f64>,
    pub aq: Vec<f64>,
    pub mass: Vec<f64>,
}

pub(crate) fn nodal_derivative(dp: &DoublePhase, u: &[f64], eps: f64, with_q: bool) -> Result<NodalDerivative> {
    let grid = dp.grid();
    let dim = grid.dim();
    let (p, q) = (dp.p(), dp.q());
    let a = dp.weight().cell();
    let (g, mag) = grad_magnitudes(grid, u);
    let mut flux_p = vec![0.0; g.len()];
    let mut flux_q = vec![0.0; if with_q { g.len() } else { 0 }];
    for c in 0..grid.n_cells() {
        let vol = grid.cell_volumes()[c];
        let fp = vol * a[c] * flux_factor(mag[c], p, eps, c)?;
        for k in 0..dim {
            flux_p[c * dim + k] = fp * g[c * dim + k];
        }
        if with_q {
            let fq = vol * flux_factor(mag[c], q, eps, c)?;
            for k in 0..dim {
                flux_q[c * dim + k] = fq * g[c * dim + k];
            }
        }
    }
    let n = grid.n_nodes();
    let mut apa = vec![0.0; n];
    grid.gradient_transpose_add(&flux_p, &mut apa);
    let mut aq = vec![0.0; n];
    if with_q {
        grid.gradient_transpose_add(&flux_q, &mut aq);
    }
    let ubar = cell_values(grid, u);
    let src: Vec<f64> = ubar
        .iter()
        .zip(a)
        .zip(grid.cell_volumes())
        .map(|((uc, a), w)| w * a * signed_pow(*uc, p))
        .collect();
    let mut mass = vec![0.0; n];
    grid.cell_average_transpose_add(&src, &mut mass);
    for (i, &masked) in grid.boundary_mask().iter().enumerate() {
        if masked {
            apa[i] = 0.0;
            aq[i] = 0.0;
            mass[i] = 0.0;
        }
    }
    Ok(NodalDerivative { apa, aq, mass })
}

/// Nodal gradient of `φ_λ`: `⟨φ'_λ(u), e_i⟩` for every node (masked = 0).
pub(crate) fn phi_gradient(prob: &Problem, u: &[f64]) -> Result<Vec<f64>> {
    let d = nodal_derivative(&prob.dp, u, prob.epsilon_reg, true)?;
    Ok(d.apa
        .iter()
        .zip(&d.aq)
        .zip(&d.mass)
        .map(|((a, b), m)| a + b - prob.lambda * m)
        .collect())
}

/// Volume-weighted norm of a nodal derivative vector, read as a density:
/// `sqrt(Σ_i (g_i/vol_i)² vol_i)` over interior nodes.
pub(crate) fn dual_norm(grid: &Grid, g: &[f64]) -> (Vec<f64>, f64) {
    let vol = grid.node_volume();
    let density: Vec<f64> = grid.interior_nodes().iter().map(|&i| g[i] / vol).collect();
    let norm = density.iter().map(|r| r * r * vol).sum::<f64>().sqrt();
    (density, norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// One entry per interior node, in `Grid::interior_nodes` order.
    pub values: Vec<f64>,
    pub dual_norm: f64,
}

/// Evaluates `⟨φ'_λ(u), e_i⟩` for every interior nodal basis field `e_i`.
pub fn residual(prob: &Problem, u: &ScalarField) -> Result<Residual> {
    check_same_grid(prob, u)?;
    let g = phi_gradient(prob, u.values())?;
    let (values, dual_norm) = dual_norm(prob.grid(), &g);
    Ok(Residual { values, dual_norm })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{build_grid, gradient, GridSpec};
    use crate::modular::{lq_norm_q, Exponents, Weight, WeightFamily};

    fn problem(n: usize, p: f64, q: f64, lambda: f64, eps: f64) -> Problem {
        let grid = Arc::new(build_grid(&GridSpec::interval(0.0, 1.0, n)).unwrap());
        let w = Weight::from_family(&grid, &WeightFamily::Constant { value: 1.0 }).unwrap();
        let dp = DoublePhase::new(grid, Exponents::new(p, q, 1, false).unwrap(), w).unwrap();
        Problem::new(dp, lambda, eps).unwrap()
    }

    fn field(prob: &Problem, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::admissible_from_fn(prob.dp.grid().clone(), |x| f(x[0])).unwrap()
    }

    #[test]
    fn zero_field() {
        let prob = problem(17, 3.0, 2.0, 5.0, 1e-8);
        let z = ScalarField::zeros(prob.dp.grid().clone());
        let h = field(&prob, |x| x * (1.0 - x));
        assert_eq!(phi_lambda(&prob, &z), 0.0);
        assert_eq!(pairing_apa(&prob, &z, &h).unwrap(), 0.0);
        assert_eq!(pairing_aq(&prob, &z, &h).unwrap(), 0.0);
        assert_eq!(phi_prime_pairing(&prob, &z, &h).unwrap(), 0.0);
        assert_eq!(residual(&prob, &z).unwrap().dual_norm, 0.0);
    }

    #[test]
    fn p2_reduces_to_dirichlet_energy() {
        let prob = problem(33, 2.0, 2.0, 1.0, 0.0);
        let u = field(&prob, |x| (3.0 * x).sin() * x * (1.0 - x));
        let dirichlet = lq_norm_q(&gradient(&u).magnitudes(), prob.grid(), 2.0).unwrap();
        assert!((pairing_apa(&prob, &u, &u).unwrap() - dirichlet).abs() < 1e-13);
        assert!((pairing_aq(&prob, &u, &u).unwrap() - dirichlet).abs() < 1e-13);
    }

    #[test]
    fn singular_integrand_rejected_without_regularization() {
        let prob = problem(9, 3.0, 1.5, 1.0, 0.0);
        // flat in the middle: zero gradient in some cells
        let u = field(&prob, |x| if (0.3..0.7).contains(&x) { 1.0 } else { x.min(1.0 - x) });
        let h = field(&prob, |x| x * (1.0 - x));
        assert!(pairing_apa(&prob, &u, &h).is_ok());
        assert!(matches!(
            pairing_aq(&prob, &u, &h),
            Err(Error::SingularIntegrand { .. })
        ));
        let reg = Problem::new(prob.dp.clone(), 1.0, 1e-8).unwrap();
        assert!(pairing_aq(&reg, &u, &h).is_ok());
    }

    #[test]
    fn nehari_cancellation() {
        let prob = problem(33, 3.0, 2.0, 1.0, 0.0);
        let u = field(&prob, |x| (std::f64::consts::PI * x).sin());
        let t = energy_terms(&prob.dp, &u);
        let lam = t.rho0_grad / t.rho0;
        let prob = Problem::new(prob.dp.clone(), lam, 0.0).unwrap();
        let phi = phi_lambda(&prob, &u);
        assert!((phi - t.lq_grad / 2.0).abs() < 1e-12 * phi.abs());
    }

    #[test]
    fn residual_matches_pairings() {
        let prob = problem(12, 2.5, 1.7, 3.0, 1e-8);
        let u = field(&prob, |x| (5.0 * x).sin() + x * x);
        let r = residual(&prob, &u).unwrap();
        let grid = prob.dp.grid().clone();
        let vol = grid.node_volume();
        for (k, &node) in grid.interior_nodes().iter().enumerate() {
            let mut e = vec![0.0; grid.n_nodes()];
            e[node] = 1.0;
            let e = ScalarField::new(grid.clone(), e).unwrap();
            let direct = phi_prime_pairing(&prob, &u, &e).unwrap();
            assert!((r.values[k] * vol - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn energy_is_even() {
        let prob = problem(21, 2.7, 1.4, 4.0, 0.0);
        let u = field(&prob, |x| (7.0 * x).cos() * x * (1.0 - x));
        assert_eq!(phi_lambda(&prob, &u), phi_lambda(&prob, &u.scaled(-1.0)));
    }
}
