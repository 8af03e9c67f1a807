//! Problem instances, plans and optimality certificates.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result, ValidationError, ValidationErrors};
use crate::linalg::Matrix;

/// Default bound on the number of cells `N·L`. Dense penalized routines hold
/// `(NL)²` entries, so front ends reject larger inputs unless told otherwise.
pub const DEFAULT_MAX_CELLS: usize = 4096;

/// Relative tolerance for the balance test `Σμ = Σν`.
pub const BALANCE_RTOL: f64 = 1e-9;

/// Absolute slack allowed below zero for plan entries.
pub const NONNEG_ATOL: f64 = 1e-12;

/// Tolerance used when testing marginals for integrality.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// A plan is interior when every entry exceeds this value.
pub const INTERIOR_TOL: f64 = 1e-9;

/// Marginals and cost coefficients of a matching problem between `N` types and `L` schools.
///
/// `fixed_cost` (d) never influences the optimizer; it only enters reported objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub n_types: usize,
    pub n_schools: usize,
    pub fixed_cost: Matrix,
    pub linear_cost: Matrix,
    pub quad_cost: Matrix,
    pub supply: Vec<f64>,
    pub capacity: Vec<f64>,
}

/// A problem instance plus the supply and capacity penalty weights of the penalized model.
///
/// The trade-off weight between direct cost and penalties is fixed at one half.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedInstance {
    pub base: ProblemInstance,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Result of comparing total supply against total capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Balance {
    pub balanced: bool,
    /// `Σμ − Σν`.
    pub imbalance: f64,
}

impl ProblemInstance {
    /// Instance with zero fixed and quadratic costs.
    pub fn linear(linear_cost: Matrix, supply: Vec<f64>, capacity: Vec<f64>) -> Self {
        let (n, l) = (supply.len(), capacity.len());
        Self {
            n_types: n,
            n_schools: l,
            fixed_cost: Matrix::zeros(n, l),
            quad_cost: Matrix::zeros(n, l),
            linear_cost,
            supply,
            capacity,
        }
    }

    /// Instance with zero fixed costs.
    pub fn congestion(linear_cost: Matrix, quad_cost: Matrix, supply: Vec<f64>, capacity: Vec<f64>) -> Self {
        let (n, l) = (supply.len(), capacity.len());
        Self {
            n_types: n,
            n_schools: l,
            fixed_cost: Matrix::zeros(n, l),
            linear_cost,
            quad_cost,
            supply,
            capacity,
        }
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_types * self.n_schools
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_types, self.n_schools)
    }

    pub fn total_supply(&self) -> f64 {
        self.supply.iter().sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacity.iter().sum()
    }

    pub fn total_fixed_cost(&self) -> f64 {
        self.fixed_cost.as_slice().iter().sum()
    }

    /// Checks every invariant with the default size cap.
    pub fn validate(&self) -> core::result::Result<(), ValidationErrors> {
        self.validate_with_cap(DEFAULT_MAX_CELLS)
    }

    pub fn validate_with_cap(&self, max_cells: usize) -> core::result::Result<(), ValidationErrors> {
        let mut errs = Vec::new();
        self.collect_violations(max_cells, &mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errs))
        }
    }

    fn collect_violations(&self, max_cells: usize, errs: &mut Vec<ValidationError>) {
        let (n, l) = self.shape();
        if n == 0 {
            errs.push(ValidationError::EmptyDimension { field: "N" });
        }
        if l == 0 {
            errs.push(ValidationError::EmptyDimension { field: "L" });
        }
        if n.saturating_mul(l) > max_cells {
            errs.push(ValidationError::TooLarge {
                nl: n.saturating_mul(l),
                cap: max_cells,
            });
        }
        for (field, m) in [
            ("d", &self.fixed_cost),
            ("c", &self.linear_cost),
            ("a", &self.quad_cost),
        ] {
            if m.shape() != (n, l) {
                errs.push(ValidationError::DimensionMismatch {
                    field,
                    expected: format!("{n}x{l}"),
                    found: format!("{}x{}", m.rows(), m.cols()),
                });
            } else if !m.all_finite() {
                errs.push(ValidationError::NonFinite { field });
            }
        }
        if self.quad_cost.shape() == (n, l) {
            for i in 0..n {
                for j in 0..l {
                    let v = self.quad_cost[(i, j)];
                    if v < 0.0 {
                        errs.push(ValidationError::NegativeCost {
                            field: "a",
                            row: i,
                            col: j,
                            value: v,
                        });
                    }
                }
            }
        }
        for (field, v, want) in [("mu", &self.supply, n), ("nu", &self.capacity, l)] {
            if v.len() != want {
                errs.push(ValidationError::DimensionMismatch {
                    field,
                    expected: want.to_string(),
                    found: v.len().to_string(),
                });
                continue;
            }
            for (index, &value) in v.iter().enumerate() {
                if !value.is_finite() {
                    errs.push(ValidationError::NonFinite { field });
                } else if value <= 0.0 {
                    errs.push(ValidationError::NonPositiveMarginal { field, index, value });
                }
            }
        }
    }

    /// `Σμ` against `Σν` with relative tolerance [`BALANCE_RTOL`].
    pub fn balance(&self) -> Balance {
        let s = self.total_supply();
        let t = self.total_capacity();
        let imbalance = s - t;
        Balance {
            balanced: imbalance.abs() <= BALANCE_RTOL * s.max(t),
            imbalance,
        }
    }

    /// Validates and requires a balanced instance.
    pub(crate) fn check_balanced(&self) -> Result<()> {
        self.validate_with_cap(usize::MAX)?;
        let b = self.balance();
        if !b.balanced {
            return Err(Error::Unbalanced { imbalance: b.imbalance });
        }
        Ok(())
    }

    /// Requires every quadratic coefficient to be strictly positive.
    pub(crate) fn check_positive_quad(&self) -> Result<()> {
        for i in 0..self.n_types {
            for j in 0..self.n_schools {
                let v = self.quad_cost[(i, j)];
                if !(v > 0.0) {
                    return Err(Error::NonPositiveQuadCost {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Rounds marginals to integers when they are integral within [`INTEGRALITY_TOL`].
    pub fn integral_marginals(&self) -> Result<(Vec<u64>, Vec<u64>)> {
        Ok((
            round_integral("mu", &self.supply)?,
            round_integral("nu", &self.capacity)?,
        ))
    }

    /// Integral supplies only; the counting bounds do not look at capacities.
    pub fn integral_supply(&self) -> Result<Vec<u64>> {
        round_integral("mu", &self.supply)
    }

    pub(crate) fn check_plan_shape(&self, plan: &Matrix) -> Result<()> {
        if plan.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: plan.shape(),
            });
        }
        Ok(())
    }
}

fn round_integral(field: &'static str, v: &[f64]) -> Result<Vec<u64>> {
    v.iter()
        .enumerate()
        .map(|(index, &value)| {
            let r = libm::round(value);
            if (value - r).abs() > INTEGRALITY_TOL || r < 0.0 {
                Err(Error::NonIntegral { field, index, value })
            } else {
                Ok(r as u64)
            }
        })
        .collect()
}

impl PenalizedInstance {
    pub fn new(base: ProblemInstance, eps: Vec<f64>, delta: Vec<f64>) -> Self {
        Self { base, eps, delta }
    }

    /// Wraps a plain instance with all penalty weights set to zero.
    pub fn unpenalized(base: ProblemInstance) -> Self {
        let (n, l) = base.shape();
        Self {
            base,
            eps: alloc::vec![0.0; n],
            delta: alloc::vec![0.0; l],
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.base.shape()
    }

    pub fn validate(&self) -> core::result::Result<(), ValidationErrors> {
        self.validate_with_cap(DEFAULT_MAX_CELLS)
    }

    pub fn validate_with_cap(&self, max_cells: usize) -> core::result::Result<(), ValidationErrors> {
        let mut errs = Vec::new();
        self.base.collect_violations(max_cells, &mut errs);
        let (n, l) = self.shape();
        for (field, v, want) in [("eps", &self.eps, n), ("delta", &self.delta, l)] {
            if v.len() != want {
                errs.push(ValidationError::DimensionMismatch {
                    field,
                    expected: want.to_string(),
                    found: v.len().to_string(),
                });
                continue;
            }
            for (index, &value) in v.iter().enumerate() {
                if !value.is_finite() {
                    errs.push(ValidationError::NonFinite { field });
                } else if value < 0.0 {
                    errs.push(ValidationError::NegativePenalty { field, index, value });
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errs))
        }
    }

    /// Right-hand side `b_ij = ε_i μ_i + δ_j ν_j − c_ij / 2`, row-major.
    pub fn rhs(&self) -> Vec<f64> {
        let (n, l) = self.shape();
        let base = &self.base;
        let mut b = Vec::with_capacity(n * l);
        for i in 0..n {
            for j in 0..l {
                b.push(
                    self.eps[i] * base.supply[i] + self.delta[j] * base.capacity[j] - 0.5 * base.linear_cost[(i, j)],
                );
            }
        }
        b
    }
}

/// A matching `π` together with the objective value it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub pi: Matrix,
    pub objective: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.pi.row_sums()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.pi.col_sums()
    }

    /// Cells with `π_ij > tol`.
    pub fn positive_cells(&self, tol: f64) -> usize {
        self.pi.as_slice().iter().filter(|&&v| v > tol).count()
    }

    pub fn is_interior(&self, tol: f64) -> bool {
        self.pi.as_slice().iter().all(|&v| v > tol)
    }
}

/// Multipliers certifying optimality: `ξ` for supply rows, `λ` for capacity
/// columns, `γ ≥ 0` for the sign constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Matrix,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
}

/// Which cost function to evaluate a plan under.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `Σ d + cπ`
    Linear(&'a ProblemInstance),
    /// `Σ d + cπ + aπ²`
    Congestion(&'a ProblemInstance),
    /// `½ Σ (d + cπ + aπ²) + ½ [Σ ε_i (rowsum_i − μ_i)² + Σ δ_j (colsum_j − ν_j)²]`
    Penalized(&'a PenalizedInstance),
}

/// Selector mirroring [`Objective`] without borrowing an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Congestion,
    Penalized,
}

impl<'a> Objective<'a> {
    pub fn from_kind(kind: ModelKind, instance: &'a PenalizedInstance) -> Self {
        match kind {
            ModelKind::Linear => Objective::Linear(&instance.base),
            ModelKind::Congestion => Objective::Congestion(&instance.base),
            ModelKind::Penalized => Objective::Penalized(instance),
        }
    }

    fn base(&self) -> &'a ProblemInstance {
        match *self {
            Objective::Linear(p) | Objective::Congestion(p) => p,
            Objective::Penalized(p) => &p.base,
        }
    }
}

/// Evaluates a plan under the selected model. Fixed costs are included.
pub fn evaluate_cost(objective: Objective<'_>, plan: &Matrix) -> Result<f64> {
    let base = objective.base();
    base.check_plan_shape(plan)?;
    let (n, l) = base.shape();
    let mut direct = 0.0;
    for i in 0..n {
        for j in 0..l {
            let p = plan[(i, j)];
            direct += base.fixed_cost[(i, j)] + base.linear_cost[(i, j)] * p;
            if !matches!(objective, Objective::Linear(_)) {
                direct += base.quad_cost[(i, j)] * p * p;
            }
        }
    }
    Ok(match objective {
        Objective::Linear(_) | Objective::Congestion(_) => direct,
        Objective::Penalized(inst) => {
            let rows = plan.row_sums();
            let cols = plan.col_sums();
            let supply: f64 = rows
                .iter()
                .zip(&base.supply)
                .zip(&inst.eps)
                .map(|((r, m), e)| e * (r - m) * (r - m))
                .sum();
            let capacity: f64 = cols
                .iter()
                .zip(&base.capacity)
                .zip(&inst.delta)
                .map(|((c, v), d)| d * (c - v) * (c - v))
                .sum();
            0.5 * direct + 0.5 * (supply + capacity)
        }
    })
}
