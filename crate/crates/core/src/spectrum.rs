//! Principal eigenvalue `λ̂₁` of the weighted p-Laplacian, the threshold
//! curve for `λ*`, and nonexistence certificates below `λ̂₁`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::descent::{axpy, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::modular::DoublePhase;
use crate::operator::{default_epsilon, dual_norm, energy_terms_raw, nodal_derivative, residual, Problem};
use crate::sample;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda_hat1: f64,
    /// Normalized to `ρ_Θ₀(û) = 1`, nonnegative on interior nodes.
    pub eigenfunction: ScalarField,
    pub iterations: usize,
    /// Dual norm of `A_pᵃ(û) − λ̂₁ a|û|^{p−2}û`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Pairing regularization; `None` uses `1e-8 / diam(Ω)`.
    pub epsilon: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-7,
            max_iters: 5000,
            epsilon: None,
        }
    }
}

/// `ρ_Θ₀(∇u) / ρ_Θ₀(u)`.
pub fn rayleigh_quotient(dp: &DoublePhase, u: &ScalarField) -> Result<f64> {
    let t = energy_terms_raw(dp, u.values());
    if !(t.rho0 > 0.0) {
        return Err(Error::DegenerateDenominator(t.rho0));
    }
    Ok(t.rho0_grad / t.rho0)
}

/// The `λ*` quotient `(ρ_Θ₀(∇(tu)) + (p/q)‖∇(tu)‖_q^q) / ρ_Θ₀(tu)` at each `t`.
pub fn lambda_star_curve(dp: &DoublePhase, u: &ScalarField, t_values: &[f64]) -> Result<Vec<f64>> {
    let (p, q) = (dp.p(), dp.q());
    t_values
        .iter()
        .map(|&t| {
            let tu = u.scaled(t);
            let terms = energy_terms_raw(dp, tu.values());
            if !(terms.rho0 > 0.0) {
                return Err(Error::DegenerateDenominator(terms.rho0));
            }
            Ok((terms.rho0_grad + p / q * terms.lq_grad) / terms.rho0)
        })
        .collect()
}

/// Minimizes the Rayleigh quotient starting from the interior bump.
pub fn principal_eigenvalue(dp: &DoublePhase, opts: &EigenOptions) -> Result<EigenResult> {
    principal_eigenvalue_from(dp, &dp.grid().bump(), opts)
}

pub(crate) struct RayleighState {
    pub u: Vec<f64>,
    pub quotient: f64,
    pub residual: f64,
    pub grad: Vec<f64>,
}

fn normalize(dp: &DoublePhase, u: &mut [f64]) -> Result<f64> {
    let t = energy_terms_raw(dp, u);
    if !(t.rho0 > 0.0) || !t.rho0.is_finite() {
        return Err(Error::DegenerateDenominator(t.rho0));
    }
    let s = t.rho0.powf(-1.0 / dp.p());
    u.iter_mut().for_each(|x| *x *= s);
    Ok(t.rho0_grad / t.rho0)
}

pub(crate) fn rayleigh_state(dp: &DoublePhase, mut u: Vec<f64>, eps: f64) -> Result<RayleighState> {
    let quotient = normalize(dp, &mut u)?;
    let d = nodal_derivative(dp, &u, eps, false)?;
    let grad: Vec<f64> = d.apa.iter().zip(&d.mass).map(|(a, m)| a - quotient * m).collect();
    let (_, residual) = dual_norm(dp.grid(), &grad);
    Ok(RayleighState {
        u,
        quotient,
        residual,
        grad,
    })
}

/// Relative change of a sum-of-integrals quantity below which a decrease is
/// indistinguishable from rounding.
pub(crate) const VALUE_NOISE: f64 = 64.0 * f64::EPSILON;

/// One preconditioned descent step on the quotient with step halving.
/// Accepts a strict decrease, or a change within rounding noise that
/// lowers the residual. Returns `None` when neither was found.
pub(crate) fn rayleigh_step(
    dp: &DoublePhase,
    pre: &Preconditioner,
    state: &RayleighState,
    eps: f64,
) -> Result<Option<RayleighState>> {
    let Some(d) = pre.direction(dp, &state.u, &state.grad, false) else {
        return Ok(None);
    };
    let noise = VALUE_NOISE * state.quotient.abs();
    let mut alpha = 1.0;
    for _ in 0..60 {
        let trial = axpy(&state.u, alpha, &d);
        let t = energy_terms_raw(dp, &trial);
        if t.rho0 > 0.0 {
            let q = t.rho0_grad / t.rho0;
            if q < state.quotient - noise {
                return rayleigh_state(dp, trial, eps).map(Some);
            }
            if q <= state.quotient + noise {
                let next = rayleigh_state(dp, trial, eps)?;
                if next.residual < state.residual {
                    return Ok(Some(next));
                }
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

pub fn principal_eigenvalue_from(dp: &DoublePhase, init: &[f64], opts: &EigenOptions) -> Result<EigenResult> {
    let grid = dp.grid();
    if init.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            got: init.len(),
        });
    }
    let eps = opts.epsilon.unwrap_or_else(|| default_epsilon(grid));
    let u0: Vec<f64> = init
        .iter()
        .zip(grid.boundary_mask())
        .map(|(&v, &m)| if m { 0.0 } else { v })
        .collect();
    let pre = Preconditioner::new(grid);
    let mut state = rayleigh_state(dp, u0, eps)?;
    let mut small_changes = 0usize;
    let mut iterations = 0usize;
    let converged = loop {
        if small_changes >= 10 && state.residual <= opts.tol {
            break true;
        }
        if iterations >= opts.max_iters {
            break false;
        }
        iterations += 1;
        match rayleigh_step(dp, &pre, &state, eps)? {
            Some(next) => {
                let change = (state.quotient - next.quotient).abs() / state.quotient.abs();
                small_changes = if change < 1e-10 { small_changes + 1 } else { 0 };
                state = next;
            }
            // no further decrease at working precision
            None => break state.residual <= opts.tol,
        }
    };
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: state.residual,
            best: Box::new(ScalarField::new(grid.clone(), state.u)?),
        });
    }
    let mut u = state.u;
    let sum: f64 = grid.interior_nodes().iter().map(|&i| u[i]).sum();
    if sum < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let eigenfunction = ScalarField::new(grid.clone(), u)?;
    Ok(EigenResult {
        lambda_hat1: rayleigh_quotient(dp, &eigenfunction)?,
        eigenfunction,
        iterations,
        residual: state.residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub lambda: f64,
    pub lambda_hat1: f64,
    pub trials: usize,
    /// Trials with a positive Nehari gap or a vanishing residual.
    pub violations: usize,
    /// Largest `λρ_Θ₀(u) − ρ_Θ₀(∇u)` seen.
    pub max_gap: f64,
    pub min_residual: f64,
    /// First trial whose gap is positive, i.e. a Nehari-feasible direction.
    pub witness: Option<usize>,
}

/// Checks `λρ_Θ₀(u) − ρ_Θ₀(∇u) ≤ 0` and `φ'_λ(u) ≠ 0` on each field.
pub fn certify_fields(prob: &Problem, lambda_hat1: f64, fields: &[ScalarField]) -> Result<CertificateReport> {
    let mut report = CertificateReport {
        lambda: prob.lambda,
        lambda_hat1,
        trials: fields.len(),
        violations: 0,
        max_gap: f64::NEG_INFINITY,
        min_residual: f64::INFINITY,
        witness: None,
    };
    for (k, u) in fields.iter().enumerate() {
        let t = energy_terms_raw(&prob.dp, u.values());
        let gap = prob.lambda * t.rho0 - t.rho0_grad;
        let res = residual(prob, u)?.dual_norm;
        report.max_gap = report.max_gap.max(gap);
        report.min_residual = report.min_residual.min(res);
        if gap > 0.0 || !(res > 0.0) {
            report.violations += 1;
        }
        if gap > 0.0 && report.witness.is_none() {
            report.witness = Some(k);
        }
    }
    Ok(report)
}

/// Certificate over `trials` seeded random fields (alternating i.i.d.
/// positive noise and perturbed bumps).
pub fn nonexistence_certificate(
    prob: &Problem,
    lambda_hat1: f64,
    trials: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let grid = prob.dp.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<ScalarField> = (0..trials)
        .map(|k| {
            if k % 2 == 0 {
                sample::random_positive(grid, &mut rng)
            } else {
                sample::perturbed_bump(grid, &mut rng, 0.2)
            }
        })
        .collect();
    certify_fields(prob, lambda_hat1, &fields)
}
