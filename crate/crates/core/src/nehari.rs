//! Nehari manifold `N_λ = {u ≠ 0 : ⟨φ'_λ(u), u⟩ = 0}`: fiber map, closed-form
//! projection, constrained minimization of `φ_λ`, and eigenpair extraction.
//!
//! Along a ray `t ↦ tu` the fiber map is
//! `k_λ(t) = tᵖ(ρ_Θ₀(∇u) − λρ_Θ₀(u)) + t^q‖∇u‖_q^q`. When
//! `d = λρ_Θ₀(u) − ρ_Θ₀(∇u) > 0` it has the single positive root
//! `t₀ = (‖∇u‖_q^q / d)^{1/(p−q)}`, and `t₀u ∈ N_λ`. The minimizer works on
//! the reduced functional `u ↦ φ_λ(t₀(u)u)`, whose derivative along `h` is
//! `t₀⟨φ'_λ(t₀u), h⟩` because `k_λ(t₀) = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descent::{axpy, dot, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::operator::{dual_norm, energy_terms_raw, phi_gradient, residual, EnergyTerms, Problem};
use crate::sample;
use crate::spectrum::{principal_eigenvalue, rayleigh_state, rayleigh_step, EigenOptions, VALUE_NOISE};

#[derive(Debug, Clone, PartialEq)]
pub struct NehariPoint {
    /// The direction that was projected.
    pub u: ScalarField,
    pub t0: f64,
    /// `t₀` located independently by bisection on the sign of `k_λ`.
    pub t0_bisection: f64,
    /// `φ_λ(t₀u)`
    pub energy: f64,
    /// `⟨φ'_λ(t₀u), t₀u⟩`
    pub constraint_gap: f64,
    /// `‖∇(t₀u)‖_q^q`
    pub lq_grad: f64,
}

impl NehariPoint {
    pub fn point(&self) -> ScalarField {
        self.u.scaled(self.t0)
    }
}

/// `k_λ(t) = ⟨φ'_λ(tu), tu⟩` in homogeneity-expanded form.
pub fn fiber_map(prob: &Problem, u: &ScalarField, t: f64) -> f64 {
    let terms = energy_terms_raw(&prob.dp, u.values());
    fiber_from_terms(&terms, prob, t)
}

fn fiber_from_terms(terms: &EnergyTerms, prob: &Problem, t: f64) -> f64 {
    let (p, q) = (prob.dp.p(), prob.dp.q());
    t.powf(p) * (terms.rho0_grad - prob.lambda * terms.rho0) + t.powf(q) * terms.lq_grad
}

/// `k_λ(t)` evaluated directly on the scaled field.
pub fn fiber_map_direct(prob: &Problem, u: &ScalarField, t: f64) -> f64 {
    energy_terms_raw(&prob.dp, u.scaled(t).values()).nehari_gap(prob.lambda)
}

fn check_distinct_exponents(prob: &Problem) -> Result<()> {
    if prob.dp.p() == prob.dp.q() {
        return Err(Error::EqualExponents);
    }
    Ok(())
}

/// Bisection on the sign of `k_λ(t)/t^q = Q − d t^{p−q}` over `[lo, hi]`.
fn bisect_fiber_root(lq: f64, d: f64, expo: f64, mut lo: f64, mut hi: f64) -> f64 {
    let s = |t: f64| lq - d * t.powf(expo);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if s(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn project_terms(prob: &Problem, terms: &EnergyTerms) -> Result<(f64, f64)> {
    let (p, q) = (prob.dp.p(), prob.dp.q());
    let d = prob.lambda * terms.rho0 - terms.rho0_grad;
    let tol_feas = 1e-12 * (prob.lambda * terms.rho0 + terms.rho0_grad);
    if !(d > tol_feas) || !(terms.lq_grad > 0.0) {
        return Err(Error::Infeasible { gap: d });
    }
    let t0 = (terms.lq_grad / d).powf(1.0 / (p - q));
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::Infeasible { gap: d });
    }
    Ok((t0, d))
}

/// Scales `u` onto `N_λ` with the closed-form `t₀`.
pub fn nehari_project(prob: &Problem, u: &ScalarField) -> Result<NehariPoint> {
    check_distinct_exponents(prob)?;
    let (p, q) = (prob.dp.p(), prob.dp.q());
    let terms = energy_terms_raw(&prob.dp, u.values());
    let (t0, d) = project_terms(prob, &terms)?;
    let t0_bisection = bisect_fiber_root(terms.lq_grad, d, p - q, 0.25 * t0, 4.0 * t0);
    if (t0_bisection - t0).abs() > 1e-8 * t0 {
        return Err(Error::Infeasible { gap: d });
    }
    let at = energy_terms_raw(&prob.dp, u.scaled(t0).values());
    Ok(NehariPoint {
        u: u.clone(),
        t0,
        t0_bisection,
        energy: at.phi(p, q, prob.lambda),
        constraint_gap: at.nehari_gap(prob.lambda),
        lq_grad: at.lq_grad,
    })
}

// Projection on raw vectors for the inner loop: returns `t₀u`, `φ_λ(t₀u)`
// and the rounding scale of that energy, whose terms cancel on `N_λ`.
fn project_raw(prob: &Problem, u: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let (p, q) = (prob.dp.p(), prob.dp.q());
    let terms = energy_terms_raw(&prob.dp, u);
    let (t0, _) = project_terms(prob, &terms)?;
    let v: Vec<f64> = u.iter().map(|x| t0 * x).collect();
    let at = energy_terms_raw(&prob.dp, &v);
    let scale = at.rho0_grad / p + at.lq_grad / q + prob.lambda * at.rho0 / p;
    Ok((v, at.phi(p, q, prob.lambda), VALUE_NOISE * scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NehariOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Known `λ̂₁`; computed with `eig` when absent.
    pub lambda_hat1: Option<f64>,
    pub eig: EigenOptions,
}

impl Default for NehariOptions {
    fn default() -> Self {
        NehariOptions {
            tol: 1e-7,
            max_iters: 5000,
            lambda_hat1: None,
            eig: EigenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerResult {
    pub u_hat: ScalarField,
    pub m_lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    /// (min, max) of `û` over interior nodes.
    pub positivity: (f64, f64),
    pub converged: bool,
    /// `φ_λ` after every accepted step.
    pub energy_history: Vec<f64>,
    pub warnings: Vec<String>,
}

fn lambda_hat1_for(prob: &Problem, opts: &NehariOptions) -> Result<f64> {
    match opts.lambda_hat1 {
        Some(l) => Ok(l),
        None => Ok(principal_eigenvalue(&prob.dp, &opts.eig)?.lambda_hat1),
    }
}

/// Minimizes `φ_λ` over `N_λ` by projected preconditioned descent.
///
/// An infeasible starting direction is first moved by Rayleigh-quotient
/// descent until `λρ_Θ₀(u) > ρ_Θ₀(∇u)`, which is reachable exactly when
/// `λ > λ̂₁`.
pub fn minimize_on_nehari(prob: &Problem, init: &ScalarField, opts: &NehariOptions) -> Result<MinimizerResult> {
    check_distinct_exponents(prob)?;
    let lambda_hat1 = lambda_hat1_for(prob, opts)?;
    if prob.lambda <= lambda_hat1 {
        return Err(Error::Infeasible {
            gap: prob.lambda - lambda_hat1,
        });
    }
    let dp = &prob.dp;
    let grid = dp.grid();
    let pre = Preconditioner::new(grid);
    let mut iterations = 0usize;

    let mut u: Vec<f64> = init
        .values()
        .iter()
        .zip(grid.boundary_mask())
        .map(|(&v, &m)| if m { 0.0 } else { v })
        .collect();

    // feasibility restoration
    let (mut v, mut energy, mut noise) = loop {
        match project_raw(prob, &u) {
            Ok(x) => break x,
            Err(Error::Infeasible { gap }) => {
                if iterations >= opts.max_iters {
                    return Err(Error::Infeasible { gap });
                }
                iterations += 1;
                let state = rayleigh_state(dp, u, prob.epsilon_reg)?;
                match rayleigh_step(dp, &pre, &state, prob.epsilon_reg)? {
                    Some(next) => u = next.u,
                    None => return Err(Error::Infeasible { gap }),
                }
            }
            Err(e) => return Err(e),
        }
    };

    let mut history = vec![energy];
    let mut flat = 0usize;
    let mut g = phi_gradient(prob, &v)?;
    let mut res = dual_norm(grid, &g).1;
    let mut converged = res <= opts.tol;
    while !converged && flat < 20 {
        if iterations >= opts.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
                best: Box::new(ScalarField::new(grid.clone(), v)?),
            });
        }
        iterations += 1;
        let Some(d) = pre.direction(dp, &v, &g, true) else {
            break;
        };
        let slope = dot(&g, &d);
        if !(slope < 0.0) {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = axpy(&v, alpha, &d);
            if let Ok((tv, te, tn)) = project_raw(prob, &trial) {
                if te <= energy + 1e-4 * alpha * slope && te < energy - noise {
                    let tg = phi_gradient(prob, &tv)?;
                    accepted = Some((tv, te, tn, tg));
                    break;
                }
                // below rounding resolution: accept only a residual decrease
                if te <= energy + noise {
                    let tg = phi_gradient(prob, &tv)?;
                    if dual_norm(grid, &tg).1 < res {
                        accepted = Some((tv, te, tn, tg));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((nv, ne, nn, ng)) = accepted else {
            break;
        };
        let change = (energy - ne).abs() / energy.abs();
        flat = if change < 1e-12 { flat + 1 } else { 0 };
        v = nv;
        energy = ne;
        noise = nn;
        history.push(energy);
        g = ng;
        res = dual_norm(grid, &g).1;
        converged = res <= opts.tol;
    }

    // φ_λ(u) = φ_λ(|u|): take the nonnegative representative and re-project
    let mut warnings = Vec::new();
    let abs_v: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let (fv, fe, _) = project_raw(prob, &abs_v)?;
    if (fe - energy).abs() > 1e-10 * energy.abs() {
        warnings.push(format!(
            "stale positivity: |u| replacement changed the energy from {energy:e} to {fe:e}"
        ));
    }
    let u_hat = ScalarField::new(grid.clone(), fv)?;
    let residual = residual(prob, &u_hat)?.dual_norm;
    Ok(MinimizerResult {
        positivity: u_hat.interior_range(),
        u_hat,
        m_lambda: fe,
        residual,
        iterations,
        converged: residual <= opts.tol,
        energy_history: history,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    pub best: MinimizerResult,
    pub best_start: usize,
    /// Final energy per start; `None` where the run failed.
    pub energies: Vec<Option<f64>>,
}

/// Start 0 is the interior bump; start `k ≥ 1` is i.i.d. positive noise from
/// `seed + k`. Lowest energy wins, ties go to the lowest start index.
pub fn minimize_multistart(
    prob: &Problem,
    opts: &NehariOptions,
    starts: usize,
    seed: u64,
) -> Result<MultistartResult> {
    check_distinct_exponents(prob)?;
    let lambda_hat1 = lambda_hat1_for(prob, opts)?;
    let opts = NehariOptions {
        lambda_hat1: Some(lambda_hat1),
        ..*opts
    };
    let grid = prob.dp.grid();
    let starts = starts.max(1);
    let runs: Vec<Result<MinimizerResult>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let init = if k == 0 {
                ScalarField::new(grid.clone(), grid.bump())?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                sample::random_positive(grid, &mut rng)
            };
            minimize_on_nehari(prob, &init, &opts)
        })
        .collect();
    let energies = runs.iter().map(|r| r.as_ref().ok().map(|m| m.m_lambda)).collect();
    let mut best: Option<(usize, MinimizerResult)> = None;
    let mut first_err = None;
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok(m) => {
                if best.as_ref().is_none_or(|(_, b)| m.m_lambda < b.m_lambda) {
                    best = Some((k, m));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((best_start, best)) => Ok(MultistartResult {
            best,
            best_start,
            energies,
        }),
        None => Err(first_err.expect("at least one start")),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EigenpairDiagnostics {
    pub residual: f64,
    /// Residual without gradient regularization, where finite.
    pub residual_unregularized: Option<f64>,
    pub sup_norm: f64,
    pub interior_min: f64,
    pub interior_max: f64,
    pub positivity_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    pub u_hat: ScalarField,
    pub diagnostics: EigenpairDiagnostics,
}

/// Re-verifies `⟨φ'_λ(û), e_i⟩ ≈ 0` on every interior basis field and
/// reports sup-norm and sign diagnostics.
pub fn extract_eigenpair(prob: &Problem, res: &MinimizerResult, tol: f64) -> Result<Eigenpair> {
    check_distinct_exponents(prob)?;
    let r = residual(prob, &res.u_hat)?.dual_norm;
    if !(r <= tol) {
        return Err(Error::ResidualAboveTolerance { residual: r, tol });
    }
    let unreg = Problem {
        epsilon_reg: 0.0,
        ..prob.clone()
    };
    let residual_unregularized = residual(&unreg, &res.u_hat).ok().map(|x| x.dual_norm);
    let (interior_min, interior_max) = res.u_hat.interior_range();
    let positivity_violated = interior_min < -1e-12 || interior_min <= 0.0;
    Ok(Eigenpair {
        lambda: prob.lambda,
        u_hat: res.u_hat.clone(),
        diagnostics: EigenpairDiagnostics {
            residual: r,
            residual_unregularized,
            sup_norm: res.u_hat.sup_norm(),
            interior_min,
            interior_max,
            positivity_violated,
        },
    })
}
