//! The penalized model
//!
//! `F(π) = ½ Σ (d + cπ + aπ²) + ½ [Σ ε_i (Σ_j π_ij − μ_i)² + Σ δ_j (Σ_i π_ij − ν_j)²]`
//! minimized over `π ≥ 0`. Its gradient is exactly `Aπ − b` with
//! `A = D + E + F`, `D = Diag(a)`, `E = Diag(ε) ⊗ 1_{L×L}`, `F = 1_{N×N} ⊗ Diag(δ)`
//! and `b_ij = ε_i μ_i + δ_j ν_j − c_ij / 2`, all in row-major cell order.
//! When `A⁻¹b` is strictly positive it is the optimum; otherwise the
//! nonnegativity constraints bind and [`solve_penalized_qp`] takes over.

mod aggregate;
mod bounds;
mod inverse;
mod neumann;
mod qp;

pub use aggregate::aggregate_mass_special;
pub use bounds::{
    build_y, c1, c2, describe_containment, entry_bounds, y_lemma_check, BoundContainment, EntryBounds, IntMatrix,
    YLemmaCheck,
};
pub use inverse::{closed_form_inverse, closed_form_plan, dense_inverse, sherman_morrison_inverse, SmwInverse};
pub use neumann::{neumann_solve, NeumannOptions, NeumannSolution, NeumannStep, NeumannTrace, SpectralGate};
pub use qp::{solve_penalized_qp, solve_penalized_qp_with, PenalizedQpSolution};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::instance::{evaluate_cost, Objective, PenalizedInstance, TransportPlan, INTERIOR_TOL};
use crate::linalg::{power_iteration, Cholesky, Matrix};

/// The linear system `Aπ = b` of the penalized model.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSystem {
    pub n_types: usize,
    pub n_schools: usize,
    pub a: Matrix,
    pub b: Vec<f64>,
    /// Diagonal of `D`, i.e. `a_ij` row-major.
    pub d: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
}

impl PenalizedSystem {
    pub fn n_cells(&self) -> usize {
        self.n_types * self.n_schools
    }

    pub fn d_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.d)
    }

    /// `E = Diag(ε) ⊗ 1_{L×L}`.
    pub fn e_matrix(&self) -> Matrix {
        let l = self.n_schools;
        let nl = self.n_cells();
        Matrix::from_fn(nl, nl, |p, q| if p / l == q / l { self.eps[p / l] } else { 0.0 })
    }

    /// `F = 1_{N×N} ⊗ Diag(δ)`.
    pub fn f_matrix(&self) -> Matrix {
        let l = self.n_schools;
        let nl = self.n_cells();
        Matrix::from_fn(nl, nl, |p, q| if p % l == q % l { self.delta[p % l] } else { 0.0 })
    }

    /// `X = E + F`.
    pub fn x_matrix(&self) -> Matrix {
        self.e_matrix().add(&self.f_matrix())
    }

    /// `max |A − (D + E + F)|`.
    pub fn reconstruction_error(&self) -> f64 {
        self.a.sub(&self.d_matrix().add(&self.x_matrix())).max_abs()
    }

    /// `Xv` in `O(NL)`: `ε_i Σ_ℓ v_iℓ + δ_j Σ_k v_kj`.
    pub fn apply_x(&self, v: &[f64]) -> Vec<f64> {
        apply_x(&self.eps, &self.delta, v)
    }

    pub fn residual(&self, pi: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(pi);
        r.iter_mut().zip(&self.b).for_each(|(r, b)| *r -= b);
        r
    }
}

pub(crate) fn apply_x(eps: &[f64], delta: &[f64], v: &[f64]) -> Vec<f64> {
    let (n, l) = (eps.len(), delta.len());
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; l];
    for i in 0..n {
        for j in 0..l {
            rows[i] += v[i * l + j];
            cols[j] += v[i * l + j];
        }
    }
    (0..n * l)
        .map(|k| eps[k / l] * rows[k / l] + delta[k % l] * cols[k % l])
        .collect()
}

/// Assembles `A` and `b` by index arithmetic; requires `a > 0`.
pub fn assemble(inst: &PenalizedInstance) -> Result<PenalizedSystem> {
    inst.validate_with_cap(usize::MAX)?;
    inst.base.check_positive_quad()?;
    let (n, l) = inst.shape();
    let nl = n * l;
    let d = inst.base.quad_cost.as_slice().to_vec();
    let a = Matrix::from_fn(nl, nl, |p, q| {
        let e = if p / l == q / l { inst.eps[p / l] } else { 0.0 };
        let f = if p % l == q % l { inst.delta[p % l] } else { 0.0 };
        if p == q {
            d[p] + (e + f)
        } else {
            e + f
        }
    });
    Ok(PenalizedSystem {
        n_types: n,
        n_schools: l,
        a,
        b: inst.rhs(),
        d,
        eps: inst.eps.clone(),
        delta: inst.delta.clone(),
    })
}

/// Condition number above which [`det_positive_check`] warns.
pub const ILL_CONDITIONED: f64 = 1e12;
/// Smallest factorization pivot below which [`det_positive_check`] warns.
pub const NEAR_SINGULAR_PIVOT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionWarning {
    IllConditioned { estimate: f64 },
    NearSingular { min_pivot: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantCheck {
    pub positive: bool,
    /// `log det A` when the factorization succeeded.
    pub log_det: Option<f64>,
    /// `log det D = Σ log a_ij`; the determinant of `A` is at least this large.
    pub log_det_d: f64,
    pub min_pivot: Option<f64>,
    /// 2-norm condition number estimate `λ_max / λ_min`.
    pub condition_estimate: Option<f64>,
    pub warnings: Vec<ConditionWarning>,
}

/// Positive definiteness of `A` through a Cholesky factorization, which implies `det A > 0`.
pub fn det_positive_check(system: &PenalizedSystem) -> DeterminantCheck {
    let log_det_d = system.d.iter().map(|&v| libm::log(v)).sum();
    let Ok(chol) = Cholesky::new(&system.a) else {
        return DeterminantCheck {
            positive: false,
            log_det: None,
            log_det_d,
            min_pivot: None,
            condition_estimate: None,
            warnings: Vec::new(),
        };
    };
    let min_pivot = chol.pivots().into_iter().fold(f64::INFINITY, f64::min);
    let nl = system.n_cells();
    let lmax = power_iteration(nl, |v| system.a.mul_vec(v), 200, 1e-12);
    let inv_max = power_iteration(nl, |v| chol.solve(v), 200, 1e-12);
    let cond = lmax * inv_max;
    let mut warnings = Vec::new();
    if cond > ILL_CONDITIONED {
        warnings.push(ConditionWarning::IllConditioned { estimate: cond });
    }
    if min_pivot < NEAR_SINGULAR_PIVOT {
        warnings.push(ConditionWarning::NearSingular { min_pivot });
    }
    DeterminantCheck {
        positive: true,
        log_det: Some(chol.log_det()),
        log_det_d,
        min_pivot: Some(min_pivot),
        condition_estimate: Some(cond),
        warnings,
    }
}

/// Solution of `Aπ = b` without the sign constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectSolution {
    /// `A⁻¹b` evaluated under the penalized objective. Entries may be negative
    /// when `interior` is false; the constrained optimum then differs.
    pub plan: TransportPlan,
    /// Every entry exceeds [`INTERIOR_TOL`]; the plan is then the unique optimum.
    pub interior: bool,
    /// `‖Aπ − b‖_∞`.
    pub residual: f64,
}

pub fn solve_direct(inst: &PenalizedInstance) -> Result<DirectSolution> {
    let system = assemble(inst)?;
    solve_system(inst, &system)
}

pub(crate) fn solve_system(inst: &PenalizedInstance, system: &PenalizedSystem) -> Result<DirectSolution> {
    let chol = Cholesky::new(&system.a)?;
    let pi = chol.solve(&system.b);
    let residual = crate::linalg::norm_inf(&system.residual(&pi));
    let interior = pi.iter().all(|&v| v > INTERIOR_TOL);
    let pi = Matrix::from_vec(system.n_types, system.n_schools, pi).expect("shape");
    let objective = evaluate_cost(Objective::Penalized(inst), &pi)?;
    Ok(DirectSolution {
        plan: TransportPlan { pi, objective },
        interior,
        residual,
    })
}

/// How the penalized optimum was obtained by [`solve_penalized`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenalizedRoute {
    /// `A⁻¹b` was interior.
    Direct,
    /// Sign constraints were active; the QP solver was used.
    Qp,
}

/// Direct solve when interior, otherwise the constrained QP.
pub fn solve_penalized(inst: &PenalizedInstance, tol: f64) -> Result<(PenalizedQpSolution, PenalizedRoute)> {
    let direct = solve_direct(inst)?;
    if direct.interior {
        let system = assemble(inst)?;
        Ok((
            qp::certify(
                inst,
                &system,
                direct.plan.pi.into_vec(),
                &vec![true; inst.base.n_cells()],
                0,
            )?,
            PenalizedRoute::Direct,
        ))
    } else {
        Ok((solve_penalized_qp(inst, tol)?, PenalizedRoute::Qp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::ProblemInstance;
    use approx::assert_relative_eq;

    fn scalar() -> PenalizedInstance {
        let base = ProblemInstance::congestion(Matrix::zeros(1, 1), Matrix::filled(1, 1, 1.0), vec![10.0], vec![10.0]);
        PenalizedInstance::new(base, vec![0.1], vec![0.1])
    }

    #[test]
    fn scalar_assembly_and_solve() {
        let sys = assemble(&scalar()).unwrap();
        assert_relative_eq!(sys.a[(0, 0)], 1.2);
        assert_relative_eq!(sys.b[0], 2.0);
        let sol = solve_direct(&scalar()).unwrap();
        assert!(sol.interior);
        assert_relative_eq!(sol.plan.pi[(0, 0)], 2.0 / 1.2, max_relative = 1e-15);
    }

    #[test]
    fn appendix_c_assembly() {
        let sys = assemble(&fixtures::appendix_c()).unwrap();
        assert_relative_eq!(sys.a[(0, 0)], 1.02308 + 0.130457 + 0.196703, max_relative = 1e-15);
        assert_eq!(sys.reconstruction_error(), 0.0);
        assert!(sys.a.is_symmetric(0.0));
        let v: Vec<f64> = (0..6).map(|k| k as f64 - 2.5).collect();
        let dense = sys.x_matrix().mul_vec(&v);
        for (x, y) in sys.apply_x(&v).iter().zip(&dense) {
            assert_relative_eq!(x, y, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_penalties_leave_d() {
        let inst = PenalizedInstance::unpenalized(fixtures::example_3_1());
        let sys = assemble(&inst).unwrap();
        assert_eq!(sys.a, sys.d_matrix());
    }

    #[test]
    fn appendix_c_direct() {
        let sol = solve_direct(&fixtures::appendix_c()).unwrap();
        assert!(sol.interior);
        assert!(sol.plan.pi.max_abs_diff(&fixtures::appendix_c_plan()) < 1e-3);
    }

    #[test]
    fn large_costs_are_not_interior() {
        let mut inst = fixtures::appendix_c();
        inst.base.linear_cost = Matrix::filled(3, 2, 1000.0);
        assert!(!solve_direct(&inst).unwrap().interior);
    }

    #[test]
    fn det_check_cases() {
        let chk = det_positive_check(&assemble(&fixtures::appendix_c()).unwrap());
        assert!(chk.positive && chk.warnings.is_empty());
        assert!(chk.log_det.unwrap() >= chk.log_det_d);

        let mut inst = PenalizedInstance::unpenalized(fixtures::example_3_1());
        let chk = det_positive_check(&assemble(&inst).unwrap());
        assert!(chk.positive);
        assert_relative_eq!(chk.log_det.unwrap(), 0.0);

        inst.base.quad_cost = Matrix::filled(2, 2, 1e-12);
        let chk = det_positive_check(&assemble(&inst).unwrap());
        assert!(chk.positive);
        assert!(matches!(
            chk.warnings.as_slice(),
            [ConditionWarning::NearSingular { .. }]
        ));
    }
}
