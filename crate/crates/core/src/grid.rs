//! Uniform tensor grids on boxes in one or two dimensions.
//!
//! Nodes are numbered row-major over the axis tuple (last axis fastest), and
//! cells likewise. Every integral is a midpoint rule: one sample per cell,
//! weighted by the cell volume. Nodal fields are collocated at cell midpoints
//! by averaging the cell corners, and gradients are per-cell first
//! differences, so both live on the same quadrature.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Per-axis `(lo, hi)` bounds. The dimension is the number of axes.
    pub extents: Vec<(f64, f64)>,
    pub nodes_per_axis: Vec<usize>,
}

impl GridSpec {
    pub fn interval(lo: f64, hi: f64, nodes: usize) -> Self {
        GridSpec {
            extents: vec![(lo, hi)],
            nodes_per_axis: vec![nodes],
        }
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Self {
        GridSpec {
            extents: vec![x, y],
            nodes_per_axis: vec![nx, ny],
        }
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    fn validate(&self) -> Result<()> {
        let dim = self.extents.len();
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if self.nodes_per_axis.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} node counts for {dim} axes",
                self.nodes_per_axis.len()
            )));
        }
        for (axis, (&(lo, hi), &n)) in self.extents.iter().zip(&self.nodes_per_axis).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::InvalidGrid(format!("axis {axis}: need lo < hi, got ({lo}, {hi})")));
            }
            if n < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: need at least 3 nodes for an interior node, got {n}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    spacing: Vec<f64>,
    node_coords: Vec<f64>,
    cell_volumes: Vec<f64>,
    boundary_mask: Vec<bool>,
    interior: Vec<usize>,
}

/// Builds the uniform grid described by `spec`.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    spec.validate()?;
    let dim = spec.dimension();
    let spacing: Vec<f64> = spec
        .extents
        .iter()
        .zip(&spec.nodes_per_axis)
        .map(|(&(lo, hi), &n)| (hi - lo) / (n - 1) as f64)
        .collect();

    let n_nodes: usize = spec.nodes_per_axis.iter().product();
    let n_cells: usize = spec.nodes_per_axis.iter().map(|n| n - 1).product();
    let mut node_coords = Vec::with_capacity(n_nodes * dim);
    let mut boundary_mask = Vec::with_capacity(n_nodes);
    let coord = |axis: usize, i: usize| {
        let (lo, hi) = spec.extents[axis];
        let n = spec.nodes_per_axis[axis];
        // pin the last node to hi exactly
        if i == n - 1 {
            hi
        } else {
            lo + i as f64 * spacing[axis]
        }
    };
    match dim {
        1 => {
            let n = spec.nodes_per_axis[0];
            for i in 0..n {
                node_coords.push(coord(0, i));
                boundary_mask.push(i == 0 || i == n - 1);
            }
        }
        _ => {
            let (n0, n1) = (spec.nodes_per_axis[0], spec.nodes_per_axis[1]);
            for i in 0..n0 {
                for j in 0..n1 {
                    node_coords.push(coord(0, i));
                    node_coords.push(coord(1, j));
                    boundary_mask.push(i == 0 || i == n0 - 1 || j == 0 || j == n1 - 1);
                }
            }
        }
    }
    let volume: f64 = spacing.iter().product();
    let interior = (0..n_nodes).filter(|&i| !boundary_mask[i]).collect();
    Ok(Grid {
        spec: spec.clone(),
        spacing,
        node_coords,
        cell_volumes: vec![volume; n_cells],
        boundary_mask,
        interior,
    })
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn n_nodes(&self) -> usize {
        self.boundary_mask.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_volumes.len()
    }

    pub fn node_coord(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.node_coords[node * d..(node + 1) * d]
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    /// Indices of the unmasked nodes, ascending.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Volume of the dual cell around an interior node.
    pub fn node_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn box_volume(&self) -> f64 {
        self.spec.extents.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn diameter(&self) -> f64 {
        self.spec
            .extents
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Corner node indices of a cell; the first `1 << dim` entries are used.
    pub fn cell_corners(&self, cell: usize) -> [usize; 4] {
        match self.dim() {
            1 => [cell, cell + 1, 0, 0],
            _ => {
                let n1 = self.spec.nodes_per_axis[1];
                let (c0, c1) = (cell / (n1 - 1), cell % (n1 - 1));
                let base = c0 * n1 + c1;
                [base, base + n1, base + 1, base + n1 + 1]
            }
        }
    }

    pub fn cell_midpoint(&self, cell: usize) -> Vec<f64> {
        let corners = self.cell_corners(cell);
        let k = 1 << self.dim();
        (0..self.dim())
            .map(|axis| corners[..k].iter().map(|&n| self.node_coord(n)[axis]).sum::<f64>() / k as f64)
            .collect()
    }

    /// Writes per-cell gradient components (`dim` per cell, cell-major).
    pub(crate) fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        match self.dim() {
            1 => {
                let h = self.spacing[0];
                for (c, g) in out.iter_mut().enumerate() {
                    *g = (u[c + 1] - u[c]) / h;
                }
            }
            _ => {
                let n1 = self.spec.nodes_per_axis[1];
                let (h0, h1) = (self.spacing[0], self.spacing[1]);
                for c in 0..self.n_cells() {
                    let b = (c / (n1 - 1)) * n1 + c % (n1 - 1);
                    let (u00, u10, u01, u11) = (u[b], u[b + n1], u[b + 1], u[b + n1 + 1]);
                    out[2 * c] = ((u10 - u00) + (u11 - u01)) / (2.0 * h0);
                    out[2 * c + 1] = ((u01 - u00) + (u11 - u10)) / (2.0 * h1);
                }
            }
        }
    }

    /// Accumulates the transpose of the gradient map: `out += Gᵀ flux`.
    pub(crate) fn gradient_transpose_add(&self, flux: &[f64], out: &mut [f64]) {
        match self.dim() {
            1 => {
                let h = self.spacing[0];
                for (c, &f) in flux.iter().enumerate() {
                    out[c] -= f / h;
                    out[c + 1] += f / h;
                }
            }
            _ => {
                let n1 = self.spec.nodes_per_axis[1];
                let (h0, h1) = (self.spacing[0], self.spacing[1]);
                for c in 0..self.n_cells() {
                    let b = (c / (n1 - 1)) * n1 + c % (n1 - 1);
                    let fx = flux[2 * c] / (2.0 * h0);
                    let fy = flux[2 * c + 1] / (2.0 * h1);
                    out[b] += -fx - fy;
                    out[b + n1] += fx - fy;
                    out[b + 1] += -fx + fy;
                    out[b + n1 + 1] += fx + fy;
                }
            }
        }
    }

    pub(crate) fn cell_average_into(&self, u: &[f64], out: &mut [f64]) {
        match self.dim() {
            1 => {
                for (c, v) in out.iter_mut().enumerate() {
                    *v = 0.5 * (u[c] + u[c + 1]);
                }
            }
            _ => {
                let n1 = self.spec.nodes_per_axis[1];
                for (c, v) in out.iter_mut().enumerate() {
                    let b = (c / (n1 - 1)) * n1 + c % (n1 - 1);
                    *v = 0.25 * (u[b] + u[b + n1] + u[b + 1] + u[b + n1 + 1]);
                }
            }
        }
    }

    /// `out += Avgᵀ cv`.
    pub(crate) fn cell_average_transpose_add(&self, cv: &[f64], out: &mut [f64]) {
        match self.dim() {
            1 => {
                for (c, &v) in cv.iter().enumerate() {
                    out[c] += 0.5 * v;
                    out[c + 1] += 0.5 * v;
                }
            }
            _ => {
                let n1 = self.spec.nodes_per_axis[1];
                for (c, &v) in cv.iter().enumerate() {
                    let b = (c / (n1 - 1)) * n1 + c % (n1 - 1);
                    let w = 0.25 * v;
                    out[b] += w;
                    out[b + n1] += w;
                    out[b + 1] += w;
                    out[b + n1 + 1] += w;
                }
            }
        }
    }

    /// Interior bump `∏ sin(π (x_i - lo_i) / (hi_i - lo_i))`, zero on the boundary.
    pub fn bump(&self) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|n| {
                if self.boundary_mask[n] {
                    return 0.0;
                }
                self.node_coord(n)
                    .iter()
                    .zip(&self.spec.extents)
                    .map(|(&x, &(lo, hi))| (std::f64::consts::PI * (x - lo) / (hi - lo)).sin())
                    .product()
            })
            .collect()
    }
}

/// Nodal values on a grid.
#[derive(Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("nodes_per_axis", &self.grid.spec().nodes_per_axis)
            .field("sup_norm", &self.sup_norm())
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.n_nodes()];
        ScalarField { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes()).map(|n| f(grid.node_coord(n))).collect();
        Self::new(grid, values)
    }

    /// Like `from_fn`, with masked nodes forced to zero.
    pub fn admissible_from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes())
            .map(|n| if grid.boundary_mask[n] { 0.0 } else { f(grid.node_coord(n)) })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Zero at every masked node.
    pub fn is_admissible(&self) -> bool {
        self.values
            .iter()
            .zip(self.grid.boundary_mask())
            .all(|(&v, &masked)| !masked || v == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// (min, max) over interior nodes.
    pub fn interior_range(&self) -> (f64, f64) {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&n| self.values[n])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    grid: Arc<Grid>,
    components: Vec<f64>,
}

impl GradientField {
    /// Components laid out cell-major, `dim` per cell.
    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.components
            .chunks(self.grid.dim())
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }
}

pub fn gradient(u: &ScalarField) -> GradientField {
    let grid = u.grid.clone();
    let mut components = vec![0.0; grid.n_cells() * grid.dim()];
    grid.gradient_into(&u.values, &mut components);
    GradientField { grid, components }
}

/// Midpoint quadrature `Σ f_cell · vol_cell`.
pub fn integrate_cells(f: &[f64], grid: &Grid) -> Result<f64> {
    if f.len() != grid.n_cells() {
        return Err(Error::LengthMismatch {
            expected: grid.n_cells(),
            got: f.len(),
        });
    }
    Ok(f.iter().zip(&grid.cell_volumes).map(|(v, w)| v * w).sum())
}

/// Average of each cell's corner values.
pub fn nodal_to_cell(u: &ScalarField) -> Vec<f64> {
    let mut out = vec![0.0; u.grid.n_cells()];
    u.grid.cell_average_into(&u.values, &mut out);
    out
}
