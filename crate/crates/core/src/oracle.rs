//! Slow, independent reference computations used to cross-check the solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, ModelKind, Objective, PenalizedInstance, TransportPlan};
use crate::linalg::{norm_inf, power_iteration, Matrix};
use crate::penalized::{apply_x, assemble};

/// Default cap on the total mass `M` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    /// Number of integer plans with the given marginals.
    pub count: u64,
    /// Cheapest plan under the selected model; ties keep the lexicographically smallest.
    pub best: Option<TransportPlan>,
}

/// Exhaustive search over integer plans with marginals `μ`, `ν`.
///
/// Rows are filled in order, cells left to right with values ascending, and
/// each cell is capped by what its column still needs. The penalized model is
/// evaluated on the same feasible set.
pub fn enumerate_integer_plans(inst: &PenalizedInstance, model: ModelKind, cap: u64) -> Result<EnumerationResult> {
    let base = &inst.base;
    base.check_balanced()?;
    let (mu, nu) = base.integral_marginals()?;
    let mass: u64 = mu.iter().sum();
    if mass > cap {
        return Err(Error::EnumerationCap { mass, cap });
    }
    let (n, l) = base.shape();
    let objective = Objective::from_kind(model, inst);
    let mut state = Search {
        n,
        l,
        plan: vec![0u64; n * l],
        col_left: nu,
        count: 0,
        best: None,
        objective,
    };
    state.fill(&mu, 0, 0, mu[0]);
    Ok(EnumerationResult {
        count: state.count,
        best: state.best,
    })
}

struct Search<'a> {
    n: usize,
    l: usize,
    plan: Vec<u64>,
    col_left: Vec<u64>,
    count: u64,
    best: Option<TransportPlan>,
    objective: Objective<'a>,
}

impl Search<'_> {
    fn fill(&mut self, mu: &[u64], i: usize, j: usize, row_left: u64) {
        let (n, l) = (self.n, self.l);
        if i == n {
            self.leaf();
            return;
        }
        if j + 1 == l {
            // last cell of the row takes whatever is left
            if row_left > self.col_left[j] {
                return;
            }
            self.set(i, j, row_left);
            if i + 1 == n {
                if self.col_left.iter().all(|&c| c == 0) {
                    self.fill(mu, n, 0, 0);
                }
            } else {
                self.fill(mu, i + 1, 0, mu[i + 1]);
            }
            self.unset(i, j, row_left);
            return;
        }
        let hi = row_left.min(self.col_left[j]);
        for v in 0..=hi {
            self.set(i, j, v);
            self.fill(mu, i, j + 1, row_left - v);
            self.unset(i, j, v);
        }
    }

    fn set(&mut self, i: usize, j: usize, v: u64) {
        self.plan[i * self.l + j] = v;
        self.col_left[j] -= v;
    }

    fn unset(&mut self, i: usize, j: usize, v: u64) {
        self.plan[i * self.l + j] = 0;
        self.col_left[j] += v;
    }

    fn leaf(&mut self) {
        self.count += 1;
        let pi = Matrix::from_vec(self.n, self.l, self.plan.iter().map(|&v| v as f64).collect()).expect("shape");
        let value = evaluate_cost(self.objective, &pi).expect("shape checked");
        if self.best.as_ref().is_none_or(|b| value < b.objective) {
            self.best = Some(TransportPlan { pi, objective: value });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGradientResult {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// `‖π − max(0, π − ∇F(π))‖_∞` at exit.
    pub residual: f64,
}

/// Projected gradient descent on the penalized objective over `π ≥ 0`,
/// step `1/λ_max(A)`, until the projection residual drops below `tol`.
pub fn projected_gradient_reference(
    inst: &PenalizedInstance,
    tol: f64,
    max_iter: usize,
) -> Result<ProjectedGradientResult> {
    let sys = assemble(inst)?;
    let nl = sys.n_cells();
    let apply_a = |v: &[f64]| -> Vec<f64> {
        let mut out = apply_x(&sys.eps, &sys.delta, v);
        out.iter_mut()
            .zip(v.iter().zip(&sys.d))
            .for_each(|(o, (x, d))| *o += d * x);
        out
    };
    let lipschitz = power_iteration(nl, apply_a, 500, 1e-14);
    let step = 1.0 / lipschitz;
    let mut pi = vec![0.0; nl];
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let mut grad = apply_a(&pi);
        grad.iter_mut().zip(&sys.b).for_each(|(g, b)| *g -= b);
        let proj: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| (p - g).max(0.0)).collect();
        residual = norm_inf(&pi.iter().zip(&proj).map(|(p, q)| p - q).collect::<Vec<_>>());
        if residual < tol {
            let (n, l) = inst.shape();
            let pi = Matrix::from_vec(n, l, pi).expect("shape");
            let objective = evaluate_cost(Objective::Penalized(inst), &pi)?;
            return Ok(ProjectedGradientResult {
                plan: TransportPlan { pi, objective },
                iterations: it,
                residual,
            });
        }
        pi.iter_mut()
            .zip(&grad)
            .for_each(|(p, g)| *p = (*p - step * g).max(0.0));
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Central-difference gradient of `f` at `point`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|k| {
            x[k] = point[k] + step;
            let up = f(&x);
            x[k] = point[k] - step;
            let down = f(&x);
            x[k] = point[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}
