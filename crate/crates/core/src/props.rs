//! Randomized property checks over the modular, operator and Nehari layers.
//!
//! Each property reports how many trials passed and the worst slack
//! `tolerance − error` seen (negative means a failure).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{nodal_to_cell, ScalarField};
use crate::modular::lq_norm_q;
use crate::nehari::nehari_project;
use crate::operator::{energy_terms, pairing_apa, pairing_aq, phi_lambda, phi_prime_pairing, Problem};
use crate::sample;
use crate::spectrum::rayleigh_quotient;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    pub worst_slack: f64,
}

impl PropertyOutcome {
    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropsReport {
    pub trials: usize,
    pub seed: u64,
    pub properties: Vec<PropertyOutcome>,
    pub all_passed: bool,
    pub first_failure: Option<&'static str>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

type Check = fn(&Problem, &mut ChaCha8Rng) -> Result<f64>;

// Each check returns `tolerance − error` for one random trial.
const CHECKS: &[(&str, Check)] = &[
    ("norm_modular", check_norm_modular),
    ("modular_identities", check_modular_identities),
    ("growth_envelope", check_growth_envelope),
    ("gradient_consistency", check_gradient_consistency),
    ("pairing_linearity", check_pairing_linearity),
    ("even_energy", check_even_energy),
    ("operator_monotonicity", check_monotonicity),
    ("quotient_scale_invariance", check_quotient_scaling),
    ("nehari_projection", check_projection),
];

/// Runs every property `trials` times. Trials are independent and seeded
/// from `(seed, property index, trial index)`.
pub fn run_properties(prob: &Problem, trials: usize, seed: u64) -> Result<PropsReport> {
    if trials == 0 {
        return Err(Error::Config("props.trials must be >= 1".into()));
    }
    let mut properties = Vec::new();
    for (k, &(name, check)) in CHECKS.iter().enumerate() {
        if name == "nehari_projection" && prob.dp.p() == prob.dp.q() {
            continue;
        }
        let slacks: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((k as u64) << 32) | t as u64);
                check(prob, &mut rng).unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        properties.push(PropertyOutcome {
            name,
            trials,
            passed: slacks.iter().filter(|&&s| s >= 0.0).count(),
            worst_slack: slacks.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let first_failure = properties.iter().find(|p| !p.ok()).map(|p| p.name);
    Ok(PropsReport {
        trials,
        seed,
        all_passed: first_failure.is_none(),
        first_failure,
        properties,
    })
}

fn random_field(prob: &Problem, rng: &mut ChaCha8Rng) -> ScalarField {
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    sample::random_signed(prob.dp.grid(), rng).scaled(scale)
}

fn check_norm_modular(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    const TOL: f64 = 1e-10;
    let dp = &prob.dp;
    let (p, q) = (dp.p(), dp.q());
    let v = nodal_to_cell(&random_field(prob, rng)).iter().map(|x| x.abs()).collect::<Vec<_>>();
    let norm = dp.luxemburg_norm(&v)?;
    let rho = dp.rho_theta(&v)?;
    let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let mut err = (dp.rho_theta(&unit)? - 1.0).abs();
    // (b): same side of 1, unless both sit on it within tolerance
    if (norm - 1.0).signum() != (rho - 1.0).signum() && (rho - 1.0).abs() > TOL {
        err = f64::INFINITY;
    }
    let (lo, hi) = if norm < 1.0 { (norm.powf(p), norm.powf(q)) } else { (norm.powf(q), norm.powf(p)) };
    err = err.max((lo - rho).max(rho - hi).max(0.0) / (1.0 + rho));
    // (e): geometric scalings
    let mut prev_small = rho;
    let mut prev_large = rho;
    for n in 1..=8 {
        let s = 2f64.powi(n);
        let small = dp.rho_theta(&v.iter().map(|x| x / s).collect::<Vec<_>>())?;
        let large = dp.rho_theta(&v.iter().map(|x| x * s).collect::<Vec<_>>())?;
        if !(small < prev_small && large > prev_large) {
            err = f64::INFINITY;
        }
        prev_small = small;
        prev_large = large;
    }
    if !(prev_small <= rho * 2f64.powf(-8.0 * q) * (1.0 + 1e-12) && prev_large >= rho * 2f64.powf(8.0 * q)) {
        err = f64::INFINITY;
    }
    Ok(TOL - err)
}

fn check_modular_identities(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let dp = &prob.dp;
    let grid = dp.grid();
    let v: Vec<f64> = nodal_to_cell(&random_field(prob, rng)).iter().map(|x| x.abs()).collect();
    let t = 10f64.powf(rng.gen_range(-1.0..1.0));
    let split = rel(dp.rho_theta(&v)?, dp.rho_theta0(&v)? + lq_norm_q(&v, grid, dp.q())?);
    let tv: Vec<f64> = v.iter().map(|x| t * x).collect();
    let r0 = dp.rho_theta0(&v)?;
    let homog = (dp.rho_theta0(&tv)? - t.powf(dp.p()) * r0).abs() / (1.0 + t.powf(dp.p()) * r0);
    // monotonicity under a componentwise increase
    let w: Vec<f64> = v.iter().map(|x| x + rng.gen::<f64>()).collect();
    let mono = (dp.rho_theta(&v)? - dp.rho_theta(&w)?).max(0.0);
    Ok(1e-12 - split.max(homog).max(mono))
}

fn check_growth_envelope(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let dp = &prob.dp;
    let samples: Vec<(usize, f64)> = (0..10)
        .map(|_| (rng.gen_range(0..dp.grid().n_cells()), 10f64.powf(rng.gen_range(-3.0..3.0))))
        .collect();
    Ok(if dp.growth_envelope_check(&samples) { 0.0 } else { -1.0 })
}

fn check_gradient_consistency(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = random_field(prob, rng);
    let h = sample::random_signed(prob.dp.grid(), rng);
    let pairing = phi_prime_pairing(prob, &u, &h)?;
    let mut worst = f64::NEG_INFINITY;
    for delta in [1e-5, 1e-6] {
        let plus = ScalarField::new(u.grid().clone(), u.values().iter().zip(h.values()).map(|(a, b)| a + delta * b).collect())?;
        let minus = ScalarField::new(u.grid().clone(), u.values().iter().zip(h.values()).map(|(a, b)| a - delta * b).collect())?;
        let cd = (phi_lambda(prob, &plus) - phi_lambda(prob, &minus)) / (2.0 * delta);
        worst = worst.max((pairing - cd).abs() / (1.0 + pairing.abs()));
    }
    Ok(1e-4 - worst)
}

fn check_pairing_linearity(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = random_field(prob, rng);
    let h1 = sample::random_signed(prob.dp.grid(), rng);
    let h2 = sample::random_signed(prob.dp.grid(), rng);
    let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let combo = ScalarField::new(
        u.grid().clone(),
        h1.values().iter().zip(h2.values()).map(|(x, y)| a * x + b * y).collect(),
    )?;
    let lhs = phi_prime_pairing(prob, &u, &combo)?;
    let rhs = a * phi_prime_pairing(prob, &u, &h1)? + b * phi_prime_pairing(prob, &u, &h2)?;
    Ok(1e-10 - rel(lhs, rhs))
}

fn check_even_energy(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = random_field(prob, rng);
    let e = phi_lambda(prob, &u);
    Ok(if phi_lambda(prob, &u.scaled(-1.0)) == e { 0.0 } else { -1.0 })
}

fn check_monotonicity(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = random_field(prob, rng);
    let v = random_field(prob, rng);
    let diff = ScalarField::new(u.grid().clone(), u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect())?;
    let v_part = |w: &ScalarField| -> Result<f64> { Ok(pairing_apa(prob, w, &diff)? + pairing_aq(prob, w, &diff)?) };
    let (vu, vv) = (v_part(&u)?, v_part(&v)?);
    let m = vu - vv;
    let scale = 1.0 + vu.abs() + vv.abs();
    Ok(m / scale + 1e-12)
}

fn check_quotient_scaling(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = random_field(prob, rng);
    let t = 10f64.powf(rng.gen_range(-2.0..2.0)) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let r = rayleigh_quotient(&prob.dp, &u)?;
    Ok(1e-12 - rel(rayleigh_quotient(&prob.dp, &u.scaled(t))?, r))
}

fn check_projection(prob: &Problem, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u = sample::random_positive(prob.dp.grid(), rng);
    // any λ above the field's own quotient makes it feasible
    let r = rayleigh_quotient(&prob.dp, &u)?;
    let lp = prob.with_lambda(r * rng.gen_range(1.1..3.0))?;
    let np = nehari_project(&lp, &u)?;
    let terms = energy_terms(&lp.dp, &np.point());
    let gap = np.constraint_gap.abs() / (1.0 + np.energy.abs());
    let (p, q) = (lp.dp.p(), lp.dp.q());
    let identity = rel(np.energy, (1.0 / q - 1.0 / p) * terms.lq_grad);
    let again = nehari_project(&lp, &np.point())?;
    let s = 10f64.powf(rng.gen_range(-1.0..1.0));
    let scaled = nehari_project(&lp, &u.scaled(s))?;
    let idem = (again.t0 - 1.0).abs();
    let homog = (scaled.t0 * s - np.t0).abs() / np.t0;
    if !(np.energy > 0.0 && terms.lq_grad > 0.0) {
        return Ok(-1.0);
    }
    Ok((1e-9 - gap.max(identity)).min(1e-10 - idem.max(homog)))
}
