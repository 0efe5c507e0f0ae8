//! Python bindings for the double-phase eigenvalue solver.

use std::sync::Arc;

use dphase::grid::{build_grid, gradient, nodal_to_cell, GridSpec, ScalarField};
use dphase::modular::{DoublePhase as CoreDoublePhase, Exponents, Weight, WeightFamily};
use dphase::nehari::{extract_eigenpair, minimize_multistart, nehari_project, NehariOptions};
use dphase::operator::{phi_lambda, residual, Problem};
use dphase::spectrum::{
    lambda_star_curve, nonexistence_certificate, principal_eigenvalue, rayleigh_quotient, EigenOptions,
};
use dphase::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(dphase_py, DPhaseError, PyException);
create_exception!(dphase_py, InfeasibleError, DPhaseError);
create_exception!(dphase_py, NonConvergenceError, DPhaseError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Infeasible { .. } => InfeasibleError::new_err(err.to_string()),
        Error::NonConvergence { .. } | Error::ResidualAboveTolerance { .. } => {
            NonConvergenceError::new_err(err.to_string())
        }
        _ => DPhaseError::new_err(err.to_string()),
    }
}

fn family(kind: &str, param: Option<f64>) -> PyResult<WeightFamily> {
    Ok(match kind {
        "constant" => WeightFamily::Constant {
            value: param.unwrap_or(1.0),
        },
        "x1" => WeightFamily::X1,
        "distance_to_boundary" => WeightFamily::DistanceToBoundary,
        "power_x1" => WeightFamily::PowerX1 {
            alpha: param.ok_or_else(|| PyValueError::new_err("power_x1 needs weight_param"))?,
        },
        other => return Err(PyValueError::new_err(format!("unknown weight kind {other:?}"))),
    })
}

/// Result of the principal eigenvalue solve.
#[pyclass(frozen, get_all, module = "dphase_py")]
pub struct EigenResult {
    lambda_hat1: f64,
    eigenfunction: Vec<f64>,
    residual: f64,
    iterations: usize,
}

#[pymethods]
impl EigenResult {
    fn __repr__(&self) -> String {
        format!(
            "EigenResult(lambda_hat1={}, residual={:e}, iterations={})",
            self.lambda_hat1, self.residual, self.iterations
        )
    }
}

#[pyclass(frozen, get_all, module = "dphase_py")]
pub struct NehariPoint {
    t0: f64,
    t0_bisection: f64,
    energy: f64,
    constraint_gap: f64,
    point: Vec<f64>,
}

#[pymethods]
impl NehariPoint {
    fn __repr__(&self) -> String {
        format!("NehariPoint(t0={}, energy={})", self.t0, self.energy)
    }
}

/// Nehari minimizer and the eigenpair read off from it.
#[pyclass(frozen, get_all, module = "dphase_py")]
pub struct Solution {
    lambda_: f64,
    m_lambda: f64,
    residual: f64,
    residual_unregularized: Option<f64>,
    iterations: usize,
    best_start: usize,
    u_hat: Vec<f64>,
    min_u: f64,
    max_u: f64,
    energy_history: Vec<f64>,
    warnings: Vec<String>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(lambda={}, m_lambda={}, residual={:e})",
            self.lambda_, self.m_lambda, self.residual
        )
    }
}

#[pyclass(frozen, get_all, module = "dphase_py")]
pub struct Certificate {
    lambda_: f64,
    lambda_hat1: f64,
    trials: usize,
    violations: usize,
    max_gap: f64,
    min_residual: f64,
}

#[pymethods]
impl Certificate {
    fn __repr__(&self) -> String {
        format!(
            "Certificate(lambda={}, trials={}, violations={}, max_gap={:e})",
            self.lambda_, self.trials, self.violations, self.max_gap
        )
    }
}

/// Double-phase problem data on a uniform grid over a box.
///
/// `weight` is a family name (`constant`, `x1`, `distance_to_boundary`,
/// `power_x1`) or a list of nodal values.
#[pyclass(frozen, module = "dphase_py")]
pub struct DoublePhase {
    inner: CoreDoublePhase,
}

impl DoublePhase {
    fn field(&self, u: Vec<f64>) -> PyResult<ScalarField> {
        ScalarField::new(self.inner.grid().clone(), u).map_err(to_py)
    }

    fn problem(&self, lam: f64, epsilon: Option<f64>) -> PyResult<Problem> {
        match epsilon {
            Some(e) => Problem::new(self.inner.clone(), lam, e),
            None => Problem::with_default_eps(self.inner.clone(), lam),
        }
        .map_err(to_py)
    }
}

#[pymethods]
impl DoublePhase {
    #[new]
    #[pyo3(signature = (extents, nodes, p, q, weight=None, weight_param=None, strict=false))]
    fn new(
        extents: Vec<(f64, f64)>,
        nodes: Vec<usize>,
        p: f64,
        q: f64,
        weight: Option<&Bound<'_, PyAny>>,
        weight_param: Option<f64>,
        strict: bool,
    ) -> PyResult<Self> {
        let grid = Arc::new(
            build_grid(&GridSpec {
                extents,
                nodes_per_axis: nodes,
            })
            .map_err(to_py)?,
        );
        let exps = Exponents::new(p, q, grid.dim(), strict).map_err(to_py)?;
        let w = match weight {
            None => Weight::from_family(&grid, &family("constant", weight_param)?),
            Some(w) => match w.extract::<String>() {
                Ok(kind) => Weight::from_family(&grid, &family(&kind, weight_param)?),
                Err(_) => Weight::from_nodal(&grid, w.extract::<Vec<f64>>()?),
            },
        }
        .map_err(to_py)?;
        let inner = CoreDoublePhase::new(grid, exps, w).map_err(to_py)?;
        Ok(DoublePhase { inner })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.grid().n_nodes()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.grid().n_cells()
    }

    fn node_coords(&self) -> Vec<Vec<f64>> {
        let g = self.inner.grid();
        (0..g.n_nodes()).map(|i| g.node_coord(i).to_vec()).collect()
    }

    /// Interior bump vanishing on the boundary.
    fn bump(&self) -> Vec<f64> {
        self.inner.grid().bump()
    }

    fn hypothesis_warnings(&self) -> Vec<String> {
        self.inner.hypothesis_warnings()
    }

    /// Modular of nonnegative cell values.
    fn rho_theta(&self, v: Vec<f64>) -> PyResult<f64> {
        self.inner.rho_theta(&v).map_err(to_py)
    }

    fn rho_theta0(&self, v: Vec<f64>) -> PyResult<f64> {
        self.inner.rho_theta0(&v).map_err(to_py)
    }

    fn luxemburg_norm(&self, v: Vec<f64>) -> PyResult<f64> {
        self.inner.luxemburg_norm(&v).map_err(to_py)
    }

    /// `|u|` sampled per cell.
    fn cell_values(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(nodal_to_cell(&self.field(u)?).iter().map(|x| x.abs()).collect())
    }

    fn gradient_magnitudes(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(gradient(&self.field(u)?).magnitudes())
    }

    #[pyo3(signature = (u, lam, epsilon=None))]
    fn phi(&self, u: Vec<f64>, lam: f64, epsilon: Option<f64>) -> PyResult<f64> {
        let prob = self.problem(lam, epsilon)?;
        Ok(phi_lambda(&prob, &self.field(u)?))
    }

    /// Dual norm of `φ'_λ(u)`.
    #[pyo3(signature = (u, lam, epsilon=None))]
    fn residual(&self, u: Vec<f64>, lam: f64, epsilon: Option<f64>) -> PyResult<f64> {
        let prob = self.problem(lam, epsilon)?;
        Ok(residual(&prob, &self.field(u)?).map_err(to_py)?.dual_norm)
    }

    fn rayleigh_quotient(&self, u: Vec<f64>) -> PyResult<f64> {
        rayleigh_quotient(&self.inner, &self.field(u)?).map_err(to_py)
    }

    fn lambda_star(&self, u: Vec<f64>, t: Vec<f64>) -> PyResult<Vec<f64>> {
        lambda_star_curve(&self.inner, &self.field(u)?, &t).map_err(to_py)
    }

    #[pyo3(signature = (tol=1e-7, max_iters=5000))]
    fn principal_eigenvalue(&self, py: Python<'_>, tol: f64, max_iters: usize) -> PyResult<EigenResult> {
        let opts = EigenOptions {
            tol,
            max_iters,
            epsilon: None,
        };
        let r = py.detach(|| principal_eigenvalue(&self.inner, &opts)).map_err(to_py)?;
        Ok(EigenResult {
            lambda_hat1: r.lambda_hat1,
            eigenfunction: r.eigenfunction.into_values(),
            residual: r.residual,
            iterations: r.iterations,
        })
    }

    #[pyo3(signature = (u, lam, epsilon=None))]
    fn nehari_project(&self, u: Vec<f64>, lam: f64, epsilon: Option<f64>) -> PyResult<NehariPoint> {
        let prob = self.problem(lam, epsilon)?;
        let np = nehari_project(&prob, &self.field(u)?).map_err(to_py)?;
        Ok(NehariPoint {
            t0: np.t0,
            t0_bisection: np.t0_bisection,
            energy: np.energy,
            constraint_gap: np.constraint_gap,
            point: np.point().into_values(),
        })
    }

    /// Minimizes `φ_λ` on the Nehari set; raises `InfeasibleError` when
    /// `λ ≤ λ̂₁`.
    #[pyo3(signature = (lam, tol=1e-7, max_iters=5000, starts=1, seed=0))]
    fn solve(
        &self,
        py: Python<'_>,
        lam: f64,
        tol: f64,
        max_iters: usize,
        starts: usize,
        seed: u64,
    ) -> PyResult<Solution> {
        let prob = self.problem(lam, None)?;
        let opts = NehariOptions {
            tol,
            max_iters,
            ..Default::default()
        };
        py.detach(|| {
            let ms = minimize_multistart(&prob, &opts, starts, seed)?;
            let pair = extract_eigenpair(&prob, &ms.best, tol)?;
            let res = ms.best;
            Ok(Solution {
                lambda_: lam,
                m_lambda: res.m_lambda,
                residual: res.residual,
                residual_unregularized: pair.diagnostics.residual_unregularized,
                iterations: res.iterations,
                best_start: ms.best_start,
                min_u: pair.diagnostics.interior_min,
                max_u: pair.diagnostics.interior_max,
                u_hat: pair.u_hat.into_values(),
                energy_history: res.energy_history,
                warnings: res.warnings,
            })
        })
        .map_err(to_py)
    }

    /// Random-field check that nothing is Nehari-feasible at `λ`.
    #[pyo3(signature = (lam, lambda_hat1, trials=100, seed=0))]
    fn certificate(&self, py: Python<'_>, lam: f64, lambda_hat1: f64, trials: usize, seed: u64) -> PyResult<Certificate> {
        let prob = self.problem(lam, None)?;
        let r = py
            .detach(|| nonexistence_certificate(&prob, lambda_hat1, trials, seed))
            .map_err(to_py)?;
        Ok(Certificate {
            lambda_: r.lambda,
            lambda_hat1: r.lambda_hat1,
            trials: r.trials,
            violations: r.violations,
            max_gap: r.max_gap,
            min_residual: r.min_residual,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DoublePhase(p={}, q={}, nodes={:?})",
            self.inner.p(),
            self.inner.q(),
            self.inner.grid().spec().nodes_per_axis
        )
    }
}

#[pymodule]
fn dphase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DPhaseError", m.py().get_type::<DPhaseError>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_class::<DoublePhase>()?;
    m.add_class::<EigenResult>()?;
    m.add_class::<NehariPoint>()?;
    m.add_class::<Solution>()?;
    m.add_class::<Certificate>()?;
    Ok(())
}
