//! Double-phase integrands `Θ(x,t) = a(x)tᵖ + t^q` and `Θ₀(x,t) = a(x)tᵖ`,
//! their modulars, and the Luxemburg norm.
//!
//! All modulars take per-cell magnitudes: either `|u|` collocated at cell
//! midpoints (see [`crate::grid::nodal_to_cell`]) or `|∇u|` per cell.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_cells, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    /// Ambient dimension used by the hypothesis checks.
    pub n: usize,
    pub strict: bool,
}

impl Exponents {
    /// Always requires `q > 1` and `p ≥ q`. `p = q` is only accepted with
    /// `strict = false`, where it serves the linear reference cases.
    pub fn new(p: f64, q: f64, n: usize, strict: bool) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::Exponents(format!("p and q must be finite (p = {p}, q = {q})")));
        }
        if q <= 1.0 {
            return Err(Error::Exponents(format!("q > 1 required, got q = {q}")));
        }
        if q > p {
            return Err(Error::Exponents(format!("q < p required, got q = {q} > p = {p}")));
        }
        if q == p && strict {
            return Err(Error::Exponents(format!("q < p required in strict mode, got q = p = {p}")));
        }
        if n == 0 {
            return Err(Error::Exponents("dimension N must be positive".into()));
        }
        Ok(Exponents { p, q, n, strict })
    }

    /// `Nq/(N - q)`, or `None` when `q ≥ N` (every finite exponent embeds).
    pub fn q_star(&self) -> Option<f64> {
        let n = self.n as f64;
        (self.q < n).then(|| n * self.q / (n - self.q))
    }

    /// Violated structural hypotheses. Empty unless `strict` is set.
    pub fn hypothesis_warnings(&self) -> Vec<String> {
        if !self.strict {
            return Vec::new();
        }
        let n = self.n as f64;
        let mut out = Vec::new();
        if self.p >= n {
            out.push(format!("hypothesis p < N violated (p = {}, N = {})", self.p, self.n));
        }
        if self.p / self.q >= 1.0 + 1.0 / n {
            out.push(format!(
                "hypothesis p/q < 1 + 1/N violated (p/q = {}, 1 + 1/N = {})",
                self.p / self.q,
                1.0 + 1.0 / n
            ));
        }
        if let Some(qs) = self.q_star() {
            if self.p >= qs {
                out.push(format!("hypothesis p < q* violated (p = {}, q* = {qs})", self.p));
            }
        }
        out
    }
}

/// Named analytic weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFamily {
    Constant { value: f64 },
    /// `a(x) = x₁ - lo₁`
    X1,
    DistanceToBoundary,
    /// `a(x) = (x₁ - lo₁)^α`
    PowerX1 { alpha: f64 },
}

impl WeightFamily {
    fn eval(&self, grid: &Grid, x: &[f64]) -> f64 {
        let extents = &grid.spec().extents;
        let x1 = x[0] - extents[0].0;
        match *self {
            WeightFamily::Constant { value } => value,
            WeightFamily::X1 => x1,
            WeightFamily::PowerX1 { alpha } => x1.max(0.0).powf(alpha),
            WeightFamily::DistanceToBoundary => x
                .iter()
                .zip(extents)
                .map(|(&xi, &(lo, hi))| (xi - lo).min(hi - xi))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    nodal: Vec<f64>,
    cell: Vec<f64>,
    sup_norm: f64,
}

impl Weight {
    pub fn from_nodal(grid: &Grid, nodal: Vec<f64>) -> Result<Self> {
        if nodal.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: nodal.len(),
            });
        }
        if nodal.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("weight"));
        }
        if let Some(a) = nodal.iter().find(|&&a| a < 0.0) {
            return Err(Error::InvalidWeight(format!("negative sample {a}")));
        }
        let sup_norm = nodal.iter().cloned().fold(0.0, f64::max);
        if sup_norm <= 0.0 {
            return Err(Error::InvalidWeight("weight vanishes identically".into()));
        }
        let mut cell = vec![0.0; grid.n_cells()];
        grid.cell_average_into(&nodal, &mut cell);
        Ok(Weight { nodal, cell, sup_norm })
    }

    pub fn from_family(grid: &Grid, family: &WeightFamily) -> Result<Self> {
        if let WeightFamily::PowerX1 { alpha } = family {
            if !(*alpha > 0.0) {
                return Err(Error::InvalidWeight(format!("alpha must be positive, got {alpha}")));
            }
        }
        let nodal = (0..grid.n_nodes()).map(|n| family.eval(grid, grid.node_coord(n))).collect();
        Self::from_nodal(grid, nodal)
    }

    /// One decimal per line, row-major node order. Blank lines are skipped.
    pub fn read_file(grid: &Grid, path: &Path) -> Result<Self> {
        let nodal = read_nodal_file(path)?;
        Self::from_nodal(grid, nodal)
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    pub fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Envelope constant `c₀ = ‖a‖_∞ + 1`.
    pub fn c0(&self) -> f64 {
        self.sup_norm + 1.0
    }

    /// Positivity in the interior: every interior node and every cell sample is > 0.
    pub fn positive_in_interior(&self, grid: &Grid) -> bool {
        grid.interior_nodes().iter().all(|&n| self.nodal[n] > 0.0) && self.cell.iter().all(|&a| a > 0.0)
    }
}

pub fn read_nodal_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublePhase {
    exponents: Exponents,
    weight: Weight,
    grid: Arc<Grid>,
}

impl DoublePhase {
    pub fn new(grid: Arc<Grid>, exponents: Exponents, weight: Weight) -> Result<Self> {
        if weight.nodal.len() != grid.n_nodes() || weight.cell.len() != grid.n_cells() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: weight.nodal.len(),
            });
        }
        Ok(DoublePhase { exponents, weight, grid })
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn p(&self) -> f64 {
        self.exponents.p
    }

    pub fn q(&self) -> f64 {
        self.exponents.q
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Hypothesis violations for strict mode, including weight positivity.
    pub fn hypothesis_warnings(&self) -> Vec<String> {
        let mut out = self.exponents.hypothesis_warnings();
        if self.exponents.strict && !self.weight.positive_in_interior(&self.grid) {
            out.push("hypothesis a(x) > 0 in the interior violated".into());
        }
        out
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.grid.n_cells() {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_cells(),
                got: cell,
            });
        }
        Ok(())
    }

    /// `Θ(x_cell, t) = a tᵖ + t^q`.
    pub fn theta(&self, cell: usize, t: f64) -> Result<f64> {
        self.check_cell(cell)?;
        if t < 0.0 {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.weight.cell[cell] * t.powf(self.p()) + t.powf(self.q()))
    }

    pub fn theta0(&self, cell: usize, t: f64) -> Result<f64> {
        self.check_cell(cell)?;
        if t < 0.0 {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.weight.cell[cell] * t.powf(self.p()))
    }

    /// True iff `t^q ≤ Θ(x,t) ≤ c₀(tᵖ + 1)` at every sample.
    pub fn growth_envelope_check(&self, samples: &[(usize, f64)]) -> bool {
        let c0 = self.weight.c0();
        samples.iter().all(|&(cell, t)| match self.theta(cell, t) {
            Ok(th) => t.powf(self.q()) <= th && th <= c0 * (t.powf(self.p()) + 1.0),
            Err(_) => false,
        })
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.n_cells() {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_cells(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `ρ_Θ(v) = ∫ a|v|ᵖ + |v|^q`.
    pub fn rho_theta(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        let (p, q) = (self.p(), self.q());
        let f: Vec<f64> = v
            .iter()
            .zip(&self.weight.cell)
            .map(|(x, a)| {
                let t = x.abs();
                a * t.powf(p) + t.powf(q)
            })
            .collect();
        integrate_cells(&f, &self.grid)
    }

    /// `ρ_Θ₀(v) = ∫ a|v|ᵖ`.
    pub fn rho_theta0(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(rho0_raw(&self.grid, &self.weight.cell, self.p(), v))
    }

    /// Luxemburg norm `inf{λ > 0 : ρ_Θ(v/λ) ≤ 1}`.
    ///
    /// `λ ↦ ρ_Θ(v/λ)` is strictly decreasing for `v ≢ 0`, so the norm is the
    /// unique root of `ρ_Θ(v/λ) = 1`. It is bracketed by doubling or halving
    /// from `λ = 1` and then bisected to relative width `1e-12`.
    pub fn luxemburg_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("luxemburg_norm input"));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Ok(0.0);
        }
        const CAP: usize = 200;
        let (p, q) = (self.p(), self.q());
        let a = &self.weight.cell;
        let vol = self.grid.cell_volumes();
        let rho_scaled = |lam: f64| -> f64 {
            v.iter()
                .zip(a)
                .zip(vol)
                .map(|((x, a), w)| {
                    let t = x.abs() / lam;
                    w * (a * t.powf(p) + t.powf(q))
                })
                .sum()
        };

        let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
        if rho_scaled(1.0) > 1.0 {
            let mut k = 0;
            while rho_scaled(hi) > 1.0 {
                lo = hi;
                hi *= 2.0;
                k += 1;
                if k > CAP {
                    return Err(Error::Bracket(CAP));
                }
            }
        } else {
            let mut k = 0;
            while rho_scaled(lo) <= 1.0 {
                hi = lo;
                lo *= 0.5;
                k += 1;
                if k > CAP {
                    return Err(Error::Bracket(CAP));
                }
            }
        }
        // invariant: rho(v/lo) > 1 >= rho(v/hi)
        for _ in 0..CAP {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if rho_scaled(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `∫ |v|^q`, the q-th power of the Lebesgue norm.
pub fn lq_norm_q(v: &[f64], grid: &Grid, q: f64) -> Result<f64> {
    let f: Vec<f64> = v.iter().map(|x| x.abs().powf(q)).collect();
    integrate_cells(&f, grid)
}

pub(crate) fn rho0_raw(grid: &Grid, a: &[f64], p: f64, v: &[f64]) -> f64 {
    v.iter()
        .zip(a)
        .zip(grid.cell_volumes())
        .map(|((x, a), w)| w * a * x.abs().powf(p))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, gradient, nodal_to_cell, GridSpec, ScalarField};

    fn setup(n: usize, p: f64, q: f64, family: WeightFamily) -> DoublePhase {
        let grid = Arc::new(build_grid(&GridSpec::interval(0.0, 1.0, n)).unwrap());
        let w = Weight::from_family(&grid, &family).unwrap();
        DoublePhase::new(grid, Exponents::new(p, q, 1, false).unwrap(), w).unwrap()
    }

    #[test]
    fn exponent_rules() {
        assert!(Exponents::new(3.0, 2.0, 1, false).is_ok());
        assert!(Exponents::new(2.0, 2.0, 1, false).is_ok());
        assert!(Exponents::new(2.0, 2.0, 1, true).is_err());
        assert!(matches!(Exponents::new(2.0, 2.5, 2, false), Err(Error::Exponents(_))));
        assert!(Exponents::new(2.0, 1.0, 2, false).is_err());

        let ok = Exponents::new(1.8, 1.5, 2, true).unwrap();
        assert!(ok.hypothesis_warnings().is_empty());
        assert!((ok.q_star().unwrap() - 6.0).abs() < 1e-12);
        let bad = Exponents::new(3.0, 2.0, 1, true).unwrap();
        let w = bad.hypothesis_warnings();
        assert!(w.iter().any(|m| m.contains("p < N")));
        assert!(Exponents::new(3.0, 2.0, 1, false).unwrap().hypothesis_warnings().is_empty());
    }

    #[test]
    fn theta_values() {
        let dp = setup(5, 3.0, 2.0, WeightFamily::Constant { value: 2.0 });
        assert_eq!(dp.theta(0, 1.0).unwrap(), 3.0);
        assert_eq!(dp.theta(2, 0.0).unwrap(), 0.0);
        assert!(matches!(dp.theta(0, -1.0), Err(Error::NegativeArgument(_))));

        let dp = setup(5, 2.5, 1.5, WeightFamily::Constant { value: 0.5 });
        let expected = 0.5 * 2f64.sqrt().powi(5) + 2f64.sqrt().powi(3);
        assert!((dp.theta(1, 2.0).unwrap() - expected).abs() < 1e-12);
        assert!((dp.theta(1, 2.0).unwrap() - 5.656854249492381).abs() < 1e-12);
    }

    #[test]
    fn envelope() {
        let dp = setup(5, 3.0, 2.0, WeightFamily::Constant { value: 1.0 });
        assert!(dp.growth_envelope_check(&[(0, 0.0), (1, 2.0), (3, 0.3)]));
        assert!(!dp.growth_envelope_check(&[(0, -1.0)]));
    }

    #[test]
    fn modular_values() {
        let dp = setup(9, 2.0, 2.0, WeightFamily::Constant { value: 1.0 });
        let two = vec![2.0; 8];
        assert!((dp.rho_theta(&two).unwrap() - 8.0).abs() < 1e-12);
        assert!((dp.rho_theta0(&two).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(dp.rho_theta(&[0.0; 8]).unwrap(), 0.0);
        assert_eq!(dp.rho_theta0(&[0.0; 8]).unwrap(), 0.0);

        let dp = setup(17, 3.0, 2.0, WeightFamily::X1);
        let ones = vec![1.0; 16];
        assert!((dp.rho_theta(&ones).unwrap() - 1.5).abs() <= 1e-12);
        assert!((dp.rho_theta0(&ones).unwrap() - 0.5).abs() <= 1e-12);
        assert!(dp.rho_theta(&[1.0; 3]).is_err());
    }

    #[test]
    fn lq_of_sine_gradient() {
        let grid = Arc::new(build_grid(&GridSpec::interval(0.0, 1.0, 1025)).unwrap());
        let u = ScalarField::from_fn(grid.clone(), |x| (std::f64::consts::PI * x[0]).sin()).unwrap();
        let g = gradient(&u).magnitudes();
        let val = lq_norm_q(&g, &grid, 2.0).unwrap();
        assert!((val - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-4);
        assert!((lq_norm_q(&vec![2.0; 1024], &grid, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((lq_norm_q(&vec![1.0; 1024], &grid, 1.7).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn luxemburg_homogeneous_case() {
        let dp = setup(11, 2.0, 2.0, WeightFamily::Constant { value: 1.0 });
        assert_eq!(dp.luxemburg_norm(&[0.0; 10]).unwrap(), 0.0);
        let n = dp.luxemburg_norm(&[1.0; 10]).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-11);
        let mut bad = vec![1.0; 10];
        bad[3] = f64::NAN;
        assert!(matches!(dp.luxemburg_norm(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn weight_validation_and_families() {
        let grid = build_grid(&GridSpec::rectangle((0.0, 2.0), (0.0, 1.0), 5, 5)).unwrap();
        assert!(Weight::from_nodal(&grid, vec![0.0; 25]).is_err());
        let mut neg = vec![1.0; 25];
        neg[0] = -0.1;
        assert!(Weight::from_nodal(&grid, neg).is_err());

        let d = Weight::from_family(&grid, &WeightFamily::DistanceToBoundary).unwrap();
        assert!((d.sup_norm() - 0.5).abs() < 1e-15);
        assert!(d.positive_in_interior(&grid));
        let x1 = Weight::from_family(&grid, &WeightFamily::X1).unwrap();
        assert_eq!(x1.sup_norm(), 2.0);
        assert_eq!(x1.c0(), 3.0);
        assert!(x1.positive_in_interior(&grid));
        let pw = Weight::from_family(&grid, &WeightFamily::PowerX1 { alpha: 0.5 }).unwrap();
        assert!((pw.sup_norm() - 2f64.sqrt()).abs() < 1e-15);
        assert!(Weight::from_family(&grid, &WeightFamily::PowerX1 { alpha: 0.0 }).is_err());

        // a vanishing on the left half: not positive in the interior
        let half: Vec<f64> = (0..25).map(|n| if grid.node_coord(n)[0] > 1.0 { 1.0 } else { 0.0 }).collect();
        assert!(!Weight::from_nodal(&grid, half).unwrap().positive_in_interior(&grid));
    }

    #[test]
    fn weight_file_roundtrip() {
        let grid = build_grid(&GridSpec::interval(0.0, 1.0, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        std::fs::write(&path, "0\n0.5\n\n1.25\n0\n").unwrap();
        let w = Weight::read_file(&grid, &path).unwrap();
        assert_eq!(w.nodal(), &[0.0, 0.5, 1.25, 0.0]);
        std::fs::write(&path, "0\nabc\n").unwrap();
        assert!(matches!(Weight::read_file(&grid, &path), Err(Error::Config(_))));
        assert!(matches!(Weight::read_file(&grid, &dir.path().join("missing")), Err(Error::Io(_))));
    }

    #[test]
    fn collocated_rho_of_field() {
        let dp = setup(9, 3.0, 2.0, WeightFamily::Constant { value: 1.0 });
        let u = ScalarField::from_fn(dp.grid().clone(), |_| 2.0).unwrap();
        let cells = nodal_to_cell(&u);
        assert!((dp.rho_theta0(&cells).unwrap() - 8.0).abs() < 1e-12);
    }
}
