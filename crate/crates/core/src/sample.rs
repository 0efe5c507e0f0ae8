//! Random admissible trial fields for multistarts and certificates.

use std::sync::Arc;

use rand::Rng;

use crate::grid::{Grid, ScalarField};

/// Independent uniform `[0, 1)` values on interior nodes.
pub fn random_positive(grid: &Arc<Grid>, rng: &mut impl Rng) -> ScalarField {
    let values = grid
        .boundary_mask()
        .iter()
        .map(|&m| if m { 0.0 } else { rng.gen::<f64>() })
        .collect();
    ScalarField::new(grid.clone(), values).expect("finite by construction")
}

/// Independent uniform `[-1, 1)` values on interior nodes.
pub fn random_signed(grid: &Arc<Grid>, rng: &mut impl Rng) -> ScalarField {
    let values = grid
        .boundary_mask()
        .iter()
        .map(|&m| if m { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect();
    ScalarField::new(grid.clone(), values).expect("finite by construction")
}

/// The interior bump with multiplicative noise `1 + amp·U(-1, 1)`.
pub fn perturbed_bump(grid: &Arc<Grid>, rng: &mut impl Rng, amp: f64) -> ScalarField {
    let values = grid
        .bump()
        .into_iter()
        .map(|b| b * (1.0 + amp * rng.gen_range(-1.0..1.0)))
        .collect();
    ScalarField::new(grid.clone(), values).expect("finite by construction")
}
