//! The congestion model: `min Σ d_ij + c_ij π_ij + a_ij π_ij²` over plans with fixed marginals.
//!
//! The marginal constraints are linearly dependent (one row of `B` is a
//! combination of the others), so the multipliers `(ξ, λ)` are never unique.
//! The solver therefore recovers them as the minimum-norm solution of a
//! singular system; the plan itself is unique because the objective is strictly
//! convex.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::audit::{audit_assumptions, Gated};
use crate::error::{Error, Result};
use crate::instance::{
    evaluate_cost, KktCertificate, Objective, PenalizedInstance, ProblemInstance, TransportPlan, INTERIOR_TOL,
};
use crate::linalg::{determinant, norm_inf, pinv_solve_symmetric, Determinant, Matrix};
use crate::linear::{northwest_corner, solve_linear};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative eigenvalue cut-off used for the multiplier pseudo-inverse.
const PINV_RTOL: f64 = 1e-12;

/// Vertex used to seed the working set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartBasis {
    /// Optimal vertex of the linear model with the same `c`.
    #[default]
    LinearOptimum,
    /// Northwest-corner vertex, independent of the costs.
    NorthwestCorner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionOptions {
    /// Stationarity tolerance, scaled by `max(1, ‖∇f‖_∞)`.
    pub tol: f64,
    /// Iteration cap; `None` means `50·NL`.
    pub max_iter: Option<usize>,
    pub start: StartBasis,
}

impl Default for CongestionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
            start: StartBasis::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionSolution {
    pub plan: TransportPlan,
    pub certificate: KktCertificate,
    pub iterations: usize,
    /// Cells held at zero by the final working set.
    pub active_cells: usize,
}

/// Solves the congestion model with default options and the given tolerance.
pub fn solve_congestion(inst: &ProblemInstance, tol: f64) -> Result<CongestionSolution> {
    solve_congestion_with(
        inst,
        &CongestionOptions {
            tol,
            ..CongestionOptions::default()
        },
    )
}

/// Equality-constrained step on the free cells together with the min-norm multipliers.
struct EqpStep {
    p: Vec<f64>,
    xi: Vec<f64>,
    lambda: Vec<f64>,
}

fn eqp_step(inst: &ProblemInstance, grad: &[f64], free: &[bool]) -> Result<EqpStep> {
    let (n, l) = inst.shape();
    let a = inst.quad_cost.as_slice();
    let mut m = Matrix::zeros(n + l, n + l);
    let mut r = vec![0.0; n + l];
    for i in 0..n {
        for j in 0..l {
            let k = i * l + j;
            if !free[k] {
                continue;
            }
            let w = 1.0 / (2.0 * a[k]);
            m[(i, i)] += w;
            m[(n + j, n + j)] += w;
            m[(i, n + j)] += w;
            m[(n + j, i)] += w;
            r[i] += grad[k] * w;
            r[n + j] += grad[k] * w;
        }
    }
    let (y, _rank) = pinv_solve_symmetric(&m, &r, PINV_RTOL)?;
    let (xi, lambda) = (y[..n].to_vec(), y[n..].to_vec());
    let p = (0..n * l)
        .map(|k| {
            if free[k] {
                (xi[k / l] + lambda[k % l] - grad[k]) / (2.0 * a[k])
            } else {
                0.0
            }
        })
        .collect();
    Ok(EqpStep { p, xi, lambda })
}

pub fn solve_congestion_with(inst: &ProblemInstance, opts: &CongestionOptions) -> Result<CongestionSolution> {
    inst.check_balanced()?;
    inst.check_positive_quad()?;
    let (n, l) = inst.shape();
    let nl = n * l;
    let c = inst.linear_cost.as_slice();
    let a = inst.quad_cost.as_slice();

    let (start, basis) = match opts.start {
        StartBasis::LinearOptimum => {
            let sol = solve_linear(inst)?;
            (sol.plan.pi, sol.basis.cells)
        }
        StartBasis::NorthwestCorner => northwest_corner(&inst.supply, &inst.capacity),
    };
    let mut pi = start.into_vec();
    // Basic cells start free (a spanning tree keeps the free graph connected);
    // everything else starts in the working set at zero.
    let mut free = vec![false; nl];
    for &(i, j) in &basis {
        free[i * l + j] = true;
    }

    let max_iter = opts.max_iter.unwrap_or(50 * nl);
    let mut iterations = 0;
    loop {
        let grad: Vec<f64> = (0..nl).map(|k| c[k] + 2.0 * a[k] * pi[k]).collect();
        let scale = norm_inf(&grad).max(1.0);
        let step = eqp_step(inst, &grad, &free)?;
        let stationarity = (0..nl)
            .filter(|&k| free[k])
            .map(|k| (2.0 * a[k] * step.p[k]).abs())
            .fold(0.0, f64::max);

        if stationarity <= opts.tol * scale {
            // Multipliers of the working set: γ = ∇f − ξ − λ.
            let mut worst: Option<(usize, f64)> = None;
            for k in (0..nl).filter(|&k| !free[k]) {
                let g = grad[k] - step.xi[k / l] - step.lambda[k % l];
                if g < -opts.tol * scale && worst.is_none_or(|(_, w)| g < w) {
                    worst = Some((k, g));
                }
            }
            match worst {
                Some((k, _)) => free[k] = true,
                None => return finish(inst, pi, &grad, &free, step, iterations),
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for k in (0..nl).filter(|&k| free[k] && step.p[k] < 0.0) {
                let t = -pi[k] / step.p[k];
                if t < alpha {
                    alpha = t;
                    blocking = Some(k);
                }
            }
            for k in 0..nl {
                pi[k] += alpha * step.p[k];
            }
            if let Some(k) = blocking {
                pi[k] = 0.0;
                free[k] = false;
            }
        }

        iterations += 1;
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: stationarity,
            });
        }
    }
}

fn finish(
    inst: &ProblemInstance,
    mut pi: Vec<f64>,
    grad: &[f64],
    free: &[bool],
    step: EqpStep,
    iterations: usize,
) -> Result<CongestionSolution> {
    let (n, l) = inst.shape();
    for (k, v) in pi.iter_mut().enumerate() {
        if !free[k] {
            *v = 0.0;
        }
    }
    // Degenerate free cells sitting at zero would report γ = 0. Prefer the
    // multipliers of the strict support when they are dual feasible.
    let top = pi.iter().fold(1.0f64, |m, &v| m.max(v));
    let support: Vec<bool> = (0..pi.len()).map(|k| free[k] && pi[k] > 1e-12 * top).collect();
    let (free, step) = if support != free {
        let alt = eqp_step(inst, grad, &support)?;
        let scale = norm_inf(grad).max(1.0);
        let dual_feasible = (0..pi.len())
            .filter(|&k| !support[k])
            .all(|k| grad[k] - alt.xi[k / l] - alt.lambda[k % l] >= -1e-9 * scale);
        if dual_feasible {
            (support, alt)
        } else {
            (free.to_vec(), step)
        }
    } else {
        (free.to_vec(), step)
    };
    let plan = Matrix::from_vec(n, l, pi).expect("shape");
    let mut gamma = Matrix::zeros(n, l);
    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for i in 0..n {
        for j in 0..l {
            let k = i * l + j;
            let g = grad[k] - step.xi[i] - step.lambda[j];
            if free[k] {
                stationarity = stationarity.max(g.abs());
            } else {
                gamma[(i, j)] = g;
            }
            complementarity = complementarity.max((gamma[(i, j)] * plan[(i, j)]).abs());
        }
    }
    let objective = evaluate_cost(Objective::Congestion(inst), &plan)?;
    let active_cells = free.iter().filter(|&&f| !f).count();
    Ok(CongestionSolution {
        plan: TransportPlan { pi: plan, objective },
        certificate: KktCertificate {
            xi: step.xi,
            lambda: step.lambda,
            gamma,
            stationarity_residual: stationarity,
            complementarity_residual: complementarity,
        },
        iterations,
        active_cells,
    })
}

/// The `(N+L)×(N+L)` system in `(ξ, λ)` obtained by summing the interior
/// stationarity conditions `π_ij = (ξ_i + λ_j − c_ij) / (2 a_ij)` over rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    /// Diagonal part: `Σ_j 1/(2a_ij)` for rows, then `Σ_i 1/(2a_ij)` for columns.
    pub lambda_diag: Vec<f64>,
    /// `Υ_ij = 1/(2a_ij)`, N×L.
    pub upsilon: Matrix,
    /// Off-diagonal part `[[0, Υ], [Υᵀ, 0]]`.
    pub t: Matrix,
    /// `R = Λ + T`.
    pub r: Matrix,
    pub rhs: Vec<f64>,
}

impl SingularSystem {
    pub fn n_types(&self) -> usize {
        self.upsilon.rows()
    }

    /// `max |R − (Λ + T)|`.
    pub fn reconstruction_error(&self) -> f64 {
        self.r.sub(&Matrix::from_diag(&self.lambda_diag).add(&self.t)).max_abs()
    }

    /// Combination `Σ_{k>N} X_k − Σ_{k=2}^{N} X_k` of the rows of `R` (or entries of the rhs).
    fn combine<F: Fn(usize) -> f64>(&self, at: F) -> f64 {
        let n = self.n_types();
        let total = self.r.rows();
        (n..total).map(&at).sum::<f64>() - (1..n).map(&at).sum::<f64>()
    }

    /// `max_col |R_1 − (Σ_{k>N} R_k − Σ_{k=2}^{N} R_k)|`.
    pub fn row_dependency_residual(&self) -> f64 {
        (0..self.r.cols())
            .map(|c| (self.r[(0, c)] - self.combine(|k| self.r[(k, c)])).abs())
            .fold(0.0, f64::max)
    }

    /// Same combination on the right-hand side. It vanishes exactly when the
    /// instance is balanced, which makes the singular system consistent.
    pub fn rhs_dependency_residual(&self) -> f64 {
        (self.rhs[0] - self.combine(|k| self.rhs[k])).abs()
    }

    pub fn determinant(&self) -> Determinant {
        determinant(&self.r).expect("R is square")
    }
}

pub fn build_singular_system(inst: &ProblemInstance) -> Result<SingularSystem> {
    inst.validate_with_cap(usize::MAX)?;
    inst.check_positive_quad()?;
    let (n, l) = inst.shape();
    let upsilon = Matrix::from_fn(n, l, |i, j| 1.0 / (2.0 * inst.quad_cost[(i, j)]));
    let mut lambda_diag = upsilon.row_sums();
    lambda_diag.extend(upsilon.col_sums());
    let mut t = Matrix::zeros(n + l, n + l);
    for i in 0..n {
        for j in 0..l {
            t[(i, n + j)] = upsilon[(i, j)];
            t[(n + j, i)] = upsilon[(i, j)];
        }
    }
    let r = Matrix::from_diag(&lambda_diag).add(&t);
    let cw = Matrix::from_fn(n, l, |i, j| inst.linear_cost[(i, j)] * upsilon[(i, j)]);
    let mut rhs: Vec<f64> = inst.supply.iter().zip(cw.row_sums()).map(|(m, s)| m + s).collect();
    rhs.extend(inst.capacity.iter().zip(cw.col_sums()).map(|(v, s)| v + s));
    Ok(SingularSystem {
        lambda_diag,
        upsilon,
        t,
        r,
        rhs,
    })
}

/// Jacobian of the interior KKT system in `(π, ξ, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedHessian {
    pub n_types: usize,
    /// `a_ij` in row-major cell order.
    pub d: Vec<f64>,
    /// `(N+L)×NL` incidence matrix: row `i` marks the cells of type `i`, row `N+j` the cells of school `j`.
    pub b: Matrix,
    /// `[[D, −Bᵀ], [−B, 0]]`.
    pub block: Matrix,
}

impl BorderedHessian {
    /// `max |B_1 − (Σ_{k>N} B_k − Σ_{k=2}^{N} B_k)|`.
    pub fn row_dependency_residual(&self) -> f64 {
        let n = self.n_types;
        (0..self.b.cols())
            .map(|c| {
                let combo = (n..self.b.rows()).map(|k| self.b[(k, c)]).sum::<f64>()
                    - (1..n).map(|k| self.b[(k, c)]).sum::<f64>();
                (self.b[(0, c)] - combo).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn determinant(&self) -> Determinant {
        determinant(&self.block).expect("block is square")
    }
}

pub fn build_bordered_hessian(inst: &ProblemInstance) -> Result<BorderedHessian> {
    inst.validate_with_cap(usize::MAX)?;
    inst.check_positive_quad()?;
    let (n, l) = inst.shape();
    let nl = n * l;
    let d = inst.quad_cost.as_slice().to_vec();
    let b = Matrix::from_fn(n + l, nl, |k, cell| {
        let (i, j) = (cell / l, cell % l);
        if (k < n && k == i) || (k >= n && k - n == j) {
            1.0
        } else {
            0.0
        }
    });
    let size = nl + n + l;
    let mut block = Matrix::zeros(size, size);
    for (cell, &v) in d.iter().enumerate() {
        block[(cell, cell)] = v;
    }
    for k in 0..n + l {
        for cell in 0..nl {
            block[(cell, nl + k)] = -b[(k, cell)];
            block[(nl + k, cell)] = -b[(k, cell)];
        }
    }
    Ok(BorderedHessian {
        n_types: n,
        d,
        b,
        block,
    })
}

/// Integer-setting closed form: under Assumptions 1–3 every type goes entirely
/// to its strict cheapest school, `π_ij = μ_i` if `j = t_i` and 0 otherwise.
pub fn theorem_diagonal_plan(inst: &ProblemInstance) -> Result<Gated<TransportPlan>> {
    inst.validate_with_cap(usize::MAX)?;
    let audit = audit_assumptions(&PenalizedInstance::unpenalized(inst.clone()));
    for check in [
        &audit.a1_square_uniform,
        &audit.a2_distinct_top_choice,
        &audit.a3_top_choice_gap,
    ] {
        if !check.holds {
            return Ok(Gated::inapplicable(check.detail.clone()));
        }
    }
    if let Err(e) = inst.integral_marginals() {
        return Ok(Gated::inapplicable(format!("{e}")));
    }
    let (n, l) = inst.shape();
    let mut pi = Matrix::zeros(n, l);
    for (i, t) in audit.top_choice.iter().enumerate() {
        pi[(i, t.expect("A2 holds"))] = inst.supply[i];
    }
    let objective = evaluate_cost(Objective::Congestion(inst), &pi)?;
    Ok(Gated::Applicable(TransportPlan { pi, objective }))
}

/// Envelope derivatives of the optimal value at an interior optimum:
/// `∂V/∂c_ij = π_ij` and `∂V/∂a_ij = π_ij²`.
pub fn envelope_gradients(inst: &ProblemInstance, plan: &TransportPlan) -> Result<(Matrix, Matrix)> {
    inst.check_plan_shape(&plan.pi)?;
    let (n, l) = inst.shape();
    for i in 0..n {
        for j in 0..l {
            let v = plan.pi[(i, j)];
            if !(v > INTERIOR_TOL) {
                return Err(Error::NonInterior {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let dc = plan.pi.clone();
    let da = Matrix::from_fn(n, l, |i, j| plan.pi[(i, j)] * plan.pi[(i, j)]);
    Ok((dc, da))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn assert_plan(got: &Matrix, want: &Matrix, tol: f64) {
        assert!(got.max_abs_diff(want) <= tol, "got {got:?}, want {want:?}");
    }

    #[test]
    fn example_3_1_interior() {
        let sol = solve_congestion(&fixtures::example_3_1(), DEFAULT_TOL).unwrap();
        let want = Matrix::from_rows(&[[4.0, 6.0], [2.0, 8.0]]).unwrap();
        assert_plan(&sol.plan.pi, &want, 1e-7);
        assert_eq!(sol.active_cells, 0);
        assert!(sol.certificate.stationarity_residual < 1e-8);
    }

    #[test]
    fn example_3_2_corner_has_positive_gamma() {
        let sol = solve_congestion(&fixtures::example_3_2(), DEFAULT_TOL).unwrap();
        let want = Matrix::from_rows(&[[0.0, 5.0], [5.0, 0.0]]).unwrap();
        assert_plan(&sol.plan.pi, &want, 1e-7);
        assert!(sol.certificate.gamma[(0, 0)] > 0.0);
        assert!(sol.certificate.gamma[(1, 1)] > 0.0);
        assert_eq!(sol.certificate.gamma[(0, 1)], 0.0);
    }

    #[test]
    fn appendix_a_quadratic_diagonal() {
        let inst = fixtures::appendix_a_quadratic();
        let sol = solve_congestion(&inst, DEFAULT_TOL).unwrap();
        assert_plan(&sol.plan.pi, &fixtures::appendix_a_quadratic_plan(), 1e-7);
        let thm = theorem_diagonal_plan(&inst).unwrap().applicable().unwrap();
        assert_eq!(thm.pi, fixtures::appendix_a_quadratic_plan());
    }

    #[test]
    fn start_basis_does_not_change_plan() {
        for inst in [
            fixtures::example_3_1(),
            fixtures::example_3_2(),
            fixtures::appendix_a_quadratic(),
        ] {
            let a = solve_congestion(&inst, DEFAULT_TOL).unwrap();
            let opts = CongestionOptions {
                start: StartBasis::NorthwestCorner,
                ..Default::default()
            };
            let b = solve_congestion_with(&inst, &opts).unwrap();
            assert_plan(&a.plan.pi, &b.plan.pi, 1e-7);
        }
    }

    #[test]
    fn zero_quadratic_cost_rejected() {
        let mut inst = fixtures::example_3_1();
        inst.quad_cost[(1, 0)] = 0.0;
        assert!(matches!(
            solve_congestion(&inst, DEFAULT_TOL),
            Err(Error::NonPositiveQuadCost { row: 1, col: 0, .. })
        ));
    }

    #[test]
    fn singular_system_unit_a() {
        let inst = ProblemInstance::congestion(
            Matrix::zeros(2, 2),
            Matrix::filled(2, 2, 1.0),
            vec![1.0; 2],
            vec![1.0; 2],
        );
        let sys = build_singular_system(&inst).unwrap();
        assert_eq!(sys.lambda_diag, vec![1.0; 4]);
        assert_eq!(sys.upsilon, Matrix::filled(2, 2, 0.5));
        assert_eq!(sys.reconstruction_error(), 0.0);
    }

    #[test]
    fn singular_system_example_3_1() {
        let sys = build_singular_system(&fixtures::example_3_1()).unwrap();
        assert_eq!(sys.rhs, vec![28.0, 20.0, 16.0, 32.0]);
        assert!(sys.row_dependency_residual() <= 1e-12);
        assert!(sys.rhs_dependency_residual() <= 1e-12);
        assert!(sys.determinant().hadamard_ratio <= 1e-8);
    }

    #[test]
    fn bordered_hessian_incidence() {
        let inst = ProblemInstance::congestion(
            Matrix::zeros(2, 2),
            Matrix::filled(2, 2, 1.0),
            vec![1.0; 2],
            vec![1.0; 2],
        );
        let h = build_bordered_hessian(&inst).unwrap();
        let want = Matrix::from_rows(&[
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
        ]);
        assert_eq!(h.b, want.unwrap());
        assert!(h.determinant().hadamard_ratio <= 1e-8);
        assert_eq!(h.row_dependency_residual(), 0.0);

        let inst = ProblemInstance::congestion(
            Matrix::zeros(2, 3),
            Matrix::filled(2, 3, 2.0),
            vec![3.0; 2],
            vec![2.0; 3],
        );
        let h = build_bordered_hessian(&inst).unwrap();
        assert!(h.b.col_sums().iter().all(|&s| s == 2.0));
    }

    #[test]
    fn theorem_small_square() {
        let inst = ProblemInstance::congestion(
            Matrix::from_rows(&[[1.0, 100.0], [100.0, 1.0]]).unwrap(),
            Matrix::filled(2, 2, 1.0),
            vec![3.0; 2],
            vec![3.0; 2],
        );
        let plan = theorem_diagonal_plan(&inst).unwrap().applicable().unwrap();
        assert_eq!(plan.pi, Matrix::from_rows(&[[3.0, 0.0], [0.0, 3.0]]).unwrap());
    }

    #[test]
    fn theorem_gated_on_duplicate_argmin() {
        let mut inst = fixtures::appendix_a_quadratic();
        inst.linear_cost[(1, 1)] = 1.0;
        assert!(!theorem_diagonal_plan(&inst).unwrap().is_applicable());
    }

    #[test]
    fn envelope_on_example_3_1() {
        let inst = fixtures::example_3_1();
        let sol = solve_congestion(&inst, DEFAULT_TOL).unwrap();
        let (dc, da) = envelope_gradients(&inst, &sol.plan).unwrap();
        assert_plan(&dc, &Matrix::from_rows(&[[4.0, 6.0], [2.0, 8.0]]).unwrap(), 1e-7);
        assert_plan(&da, &Matrix::from_rows(&[[16.0, 36.0], [4.0, 64.0]]).unwrap(), 1e-6);
    }

    #[test]
    fn envelope_rejects_corner() {
        let inst = fixtures::example_3_2();
        let sol = solve_congestion(&inst, DEFAULT_TOL).unwrap();
        assert!(matches!(
            envelope_gradients(&inst, &sol.plan),
            Err(Error::NonInterior { row: 0, col: 0, .. })
        ));
    }
}
