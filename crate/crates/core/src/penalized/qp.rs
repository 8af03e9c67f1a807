//! Primal active-set method for the penalized model with sign constraints.

use alloc::vec::Vec;

use super::{assemble, PenalizedSystem};
use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, KktCertificate, Objective, PenalizedInstance, TransportPlan};
use crate::linalg::{norm_inf, Cholesky, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedQpSolution {
    pub plan: TransportPlan,
    /// `ξ_i = ε_i (μ_i − Σ_j π_ij)` and `λ_j = δ_j (ν_j − Σ_i π_ij)` are the
    /// penalty prices implied by the plan; `γ = 2(Aπ − b)` on zero cells.
    pub certificate: KktCertificate,
    pub iterations: usize,
    pub active_cells: usize,
}

/// Minimizes the penalized objective over `π ≥ 0`; default iteration cap `50·NL`.
pub fn solve_penalized_qp(inst: &PenalizedInstance, tol: f64) -> Result<PenalizedQpSolution> {
    solve_penalized_qp_with(inst, tol, None)
}

pub fn solve_penalized_qp_with(
    inst: &PenalizedInstance,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<PenalizedQpSolution> {
    let sys = assemble(inst)?;
    let nl = sys.n_cells();
    let scale = norm_inf(&sys.b).max(1.0);
    let max_iter = max_iter.unwrap_or(50 * nl);

    // π = 0 is feasible for any working set; start with the cells the
    // gradient −b already pushes upward.
    let mut pi = alloc::vec![0.0; nl];
    let mut free: Vec<bool> = sys.b.iter().map(|&b| b > 0.0).collect();
    let mut iterations = 0;
    loop {
        let idx: Vec<usize> = (0..nl).filter(|&k| free[k]).collect();
        let target = free_subproblem(&sys, &idx)?;
        let mut p = alloc::vec![0.0; nl];
        for (t, &k) in target.iter().zip(&idx) {
            p[k] = t - pi[k];
        }

        if target.iter().all(|&t| t > 0.0) {
            for (t, &k) in target.iter().zip(&idx) {
                pi[k] = *t;
            }
            let grad = sys.residual(&pi);
            let mut worst: Option<(usize, f64)> = None;
            for k in (0..nl).filter(|&k| !free[k]) {
                if grad[k] < -tol * scale && worst.is_none_or(|(_, w)| grad[k] < w) {
                    worst = Some((k, grad[k]));
                }
            }
            match worst {
                Some((k, _)) => free[k] = true,
                None => return certify(inst, &sys, pi, &free, iterations),
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for &k in &idx {
                if p[k] < 0.0 {
                    let t = pi[k] / -p[k];
                    if t < alpha || blocking.is_none() && t <= alpha {
                        alpha = t;
                        blocking = Some(k);
                    }
                }
            }
            for k in 0..nl {
                pi[k] += alpha * p[k];
            }
            let k = blocking.expect("a nonpositive target entry blocks the step");
            pi[k] = 0.0;
            free[k] = false;
        }

        iterations += 1;
        if iterations >= max_iter {
            let grad = sys.residual(&pi);
            return Err(Error::NotConverged {
                iterations,
                residual: norm_inf(&grad),
            });
        }
    }
}

/// Solves `A_FF z = b_F` on the free cells.
fn free_subproblem(sys: &PenalizedSystem, idx: &[usize]) -> Result<Vec<f64>> {
    if idx.is_empty() {
        return Ok(Vec::new());
    }
    let sub = Matrix::from_fn(idx.len(), idx.len(), |r, c| sys.a[(idx[r], idx[c])]);
    let rhs: Vec<f64> = idx.iter().map(|&k| sys.b[k]).collect();
    Ok(Cholesky::new(&sub)?.solve(&rhs))
}

pub(super) fn certify(
    inst: &PenalizedInstance,
    sys: &PenalizedSystem,
    pi: Vec<f64>,
    free: &[bool],
    iterations: usize,
) -> Result<PenalizedQpSolution> {
    let (n, l) = inst.shape();
    let grad = sys.residual(&pi);
    let plan = Matrix::from_vec(n, l, pi).expect("shape");
    let mut gamma = Matrix::zeros(n, l);
    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for i in 0..n {
        for j in 0..l {
            let k = i * l + j;
            if free[k] {
                stationarity = stationarity.max((2.0 * grad[k]).abs());
            } else {
                gamma[(i, j)] = 2.0 * grad[k];
            }
            complementarity = complementarity.max((gamma[(i, j)] * plan[(i, j)]).abs());
        }
    }
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let xi = (0..n).map(|i| inst.eps[i] * (inst.base.supply[i] - rows[i])).collect();
    let lambda = (0..l)
        .map(|j| inst.delta[j] * (inst.base.capacity[j] - cols[j]))
        .collect();
    let objective = evaluate_cost(Objective::Penalized(inst), &plan)?;
    Ok(PenalizedQpSolution {
        plan: TransportPlan { pi: plan, objective },
        certificate: KktCertificate {
            xi,
            lambda,
            gamma,
            stationarity_residual: stationarity,
            complementarity_residual: complementarity,
        },
        iterations,
        active_cells: free.iter().filter(|&&f| !f).count(),
    })
}
