//! Comparative statics of interior penalized optima.
//!
//! At an interior optimum `Aπ = b`. Writing `H = 2A` for the Hessian of the
//! unscaled objective `Σ(d + cπ + aπ²) + Σε(·)² + Σδ(·)²`, differentiating gives
//! `H ∂π = −[I | 2 Diag(π)] ∂(c, a)`, i.e.
//!
//! * `∂π/∂c = −½ A⁻¹`
//! * `∂π/∂a = −A⁻¹ Diag(π)`
//!
//! Both blocks are NL×NL with rows indexing the plan cell and columns the
//! perturbed parameter, row-major.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{PenalizedInstance, TransportPlan, INTERIOR_TOL};
use crate::linalg::{power_iteration, Cholesky, Matrix};
use crate::penalized::{apply_x, assemble, solve_direct, PenalizedSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensitivityOrder {
    Exact,
    /// `A⁻¹ ≈ D⁻¹`.
    Order0,
    /// `A⁻¹ ≈ D⁻¹ − D⁻¹ X D⁻¹`, the first two Neumann terms.
    Order1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub order: SensitivityOrder,
    /// `∂π_p / ∂c_q`.
    pub wrt_c: Matrix,
    /// `∂π_p / ∂a_q`.
    pub wrt_a: Matrix,
}

/// Signs of the cost block compared against the substitution pattern:
/// own effects negative, same-type and same-school effects positive, unrelated cells zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignTable {
    pub own_negative: bool,
    pub same_type_positive: bool,
    pub same_school_positive: bool,
    pub unrelated_zero: bool,
}

impl SignTable {
    pub fn holds(&self) -> bool {
        self.own_negative && self.same_type_positive && self.same_school_positive && self.unrelated_zero
    }
}

impl SensitivityMatrix {
    /// Classifies every entry of the cost block; `n_schools` fixes the cell layout.
    pub fn sign_table(&self, n_schools: usize) -> SignTable {
        let l = n_schools;
        let s = &self.wrt_c;
        let mut t = SignTable {
            own_negative: true,
            same_type_positive: true,
            same_school_positive: true,
            unrelated_zero: true,
        };
        for p in 0..s.rows() {
            for q in 0..s.cols() {
                let v = s[(p, q)];
                if p == q {
                    t.own_negative &= v < 0.0;
                } else if p / l == q / l {
                    t.same_type_positive &= v > 0.0;
                } else if p % l == q % l {
                    t.same_school_positive &= v > 0.0;
                } else {
                    t.unrelated_zero &= v == 0.0;
                }
            }
        }
        t
    }

    /// `‖H · S_c + I‖_max` and `‖H · S_a + 2 Diag(π)‖_max` with `H = 2A`.
    pub fn residuals(&self, system: &PenalizedSystem, plan: &TransportPlan) -> (f64, f64) {
        let h = system.a.scale(2.0);
        let nl = system.n_cells();
        let rc = h.matmul(&self.wrt_c).add(&Matrix::identity(nl)).max_abs();
        let two_pi: Vec<f64> = plan.pi.as_slice().iter().map(|v| 2.0 * v).collect();
        let ra = h.matmul(&self.wrt_a).add(&Matrix::from_diag(&two_pi)).max_abs();
        (rc, ra)
    }
}

fn require_interior(inst: &PenalizedInstance, plan: &TransportPlan) -> Result<()> {
    inst.base.check_plan_shape(&plan.pi)?;
    let l = inst.base.n_schools;
    for (k, &v) in plan.pi.as_slice().iter().enumerate() {
        if !(v > INTERIOR_TOL) {
            return Err(Error::NonInterior {
                row: k / l,
                col: k % l,
                value: v,
            });
        }
    }
    Ok(())
}

fn from_inverse(order: SensitivityOrder, inv: &Matrix, plan: &TransportPlan) -> SensitivityMatrix {
    let pi = plan.pi.as_slice();
    let nl = inv.rows();
    SensitivityMatrix {
        order,
        wrt_c: inv.scale(-0.5),
        wrt_a: Matrix::from_fn(nl, nl, |p, q| -inv[(p, q)] * pi[q]),
    }
}

/// Exact sensitivities at an interior plan.
pub fn sensitivity_exact(inst: &PenalizedInstance, plan: &TransportPlan) -> Result<SensitivityMatrix> {
    require_interior(inst, plan)?;
    let system = assemble(inst)?;
    let inv = Cholesky::new(&system.a)?.inverse();
    Ok(from_inverse(SensitivityOrder::Exact, &inv, plan))
}

/// `D⁻¹ − D⁻¹XD⁻¹` (order 1) or `D⁻¹` (order 0), by index arithmetic.
fn truncated_inverse(inst: &PenalizedInstance, order: SensitivityOrder) -> Matrix {
    let (n, l) = inst.shape();
    let a = inst.base.quad_cost.as_slice();
    Matrix::from_fn(n * l, n * l, |p, q| {
        let own = if p == q { 1.0 / a[p] } else { 0.0 };
        if order == SensitivityOrder::Order0 {
            return own;
        }
        let e = if p / l == q / l { inst.eps[p / l] } else { 0.0 };
        let f = if p % l == q % l { inst.delta[p % l] } else { 0.0 };
        own - (e + f) / (a[p] * a[q])
    })
}

/// Truncated-series sensitivities. Meaningful when the spectral gate holds.
///
/// At order 1 the cost block has entries
/// `−½(1/a_ij − (ε_i + δ_j)/a_ij²)` on the diagonal,
/// `½ ε_i / (a_ij a_iℓ)` for another school of the same type,
/// `½ δ_j / (a_ij a_kj)` for another type at the same school, and 0 otherwise.
pub fn sensitivity_truncated(
    inst: &PenalizedInstance,
    plan: &TransportPlan,
    order: SensitivityOrder,
) -> Result<SensitivityMatrix> {
    if order == SensitivityOrder::Exact {
        return sensitivity_exact(inst, plan);
    }
    require_interior(inst, plan)?;
    inst.validate_with_cap(usize::MAX)?;
    inst.base.check_positive_quad()?;
    Ok(from_inverse(order, &truncated_inverse(inst, order), plan))
}

/// Spectral radius `s` of `D⁻¹X`, via the symmetric `D^{-1/2} X D^{-1/2}`.
pub fn coupling_radius(inst: &PenalizedInstance) -> f64 {
    let a = inst.base.quad_cost.as_slice();
    let w: Vec<f64> = a.iter().map(|&v| 1.0 / libm::sqrt(v)).collect();
    power_iteration(
        a.len(),
        |v| {
            let s: Vec<f64> = v.iter().zip(&w).map(|(x, w)| x * w).collect();
            apply_x(&inst.eps, &inst.delta, &s)
                .iter()
                .zip(&w)
                .map(|(x, w)| x * w)
                .collect()
        },
        200,
        1e-12,
    )
}

/// Bound `½ s² / ((1 − s) min a)` on `max |S_c^(1) − S_c|`, when `s < 1`.
///
/// With `K = D^{-1/2} X D^{-1/2}` the remainder of `A⁻¹` after two terms is
/// `D^{-1/2} Σ_{k≥2} (−K)^k D^{-1/2}`, whose 2-norm is at most `s²/((1−s) min a)`.
pub fn order1_remainder_bound(inst: &PenalizedInstance) -> Option<f64> {
    let s = coupling_radius(inst);
    let min_a = inst.base.quad_cost.min();
    (s < 1.0 && min_a > 0.0).then(|| 0.5 * s * s / ((1.0 - s) * min_a))
}

/// Order-0 partials of `π_ij` with respect to the parameters of its own type and school.
/// These come from `π ≈ D⁻¹b` and are approximations only.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximateMarginalPartials {
    /// `∂π_ij/∂ε_i ≈ μ_i / a_ij`.
    pub wrt_eps: Matrix,
    /// `∂π_ij/∂δ_j ≈ ν_j / a_ij`.
    pub wrt_delta: Matrix,
    /// `∂π_ij/∂μ_i ≈ ε_i / a_ij`.
    pub wrt_mu: Matrix,
    /// `∂π_ij/∂ν_j ≈ δ_j / a_ij`.
    pub wrt_nu: Matrix,
}

pub fn order0_marginal_partials(inst: &PenalizedInstance) -> Result<ApproximateMarginalPartials> {
    inst.validate_with_cap(usize::MAX)?;
    inst.base.check_positive_quad()?;
    let (n, l) = inst.shape();
    let b = &inst.base;
    let a = &b.quad_cost;
    Ok(ApproximateMarginalPartials {
        wrt_eps: Matrix::from_fn(n, l, |i, j| b.supply[i] / a[(i, j)]),
        wrt_delta: Matrix::from_fn(n, l, |i, j| b.capacity[j] / a[(i, j)]),
        wrt_mu: Matrix::from_fn(n, l, |i, j| inst.eps[i] / a[(i, j)]),
        wrt_nu: Matrix::from_fn(n, l, |i, j| inst.delta[j] / a[(i, j)]),
    })
}

/// A single scalar parameter of a penalized instance (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    C(usize, usize),
    A(usize, usize),
    Eps(usize),
    Delta(usize),
    Mu(usize),
    Nu(usize),
}

impl Parameter {
    fn slot<'a>(&self, inst: &'a mut PenalizedInstance) -> Result<&'a mut f64> {
        let (n, l) = inst.shape();
        let bad = |what: &str| Error::BadCoordinate {
            detail: format!("{what} outside {n}x{l}"),
        };
        Ok(match *self {
            Parameter::C(i, j) if i < n && j < l => &mut inst.base.linear_cost[(i, j)],
            Parameter::A(i, j) if i < n && j < l => &mut inst.base.quad_cost[(i, j)],
            Parameter::Eps(i) if i < n => &mut inst.eps[i],
            Parameter::Delta(j) if j < l => &mut inst.delta[j],
            Parameter::Mu(i) if i < n => &mut inst.base.supply[i],
            Parameter::Nu(j) if j < l => &mut inst.base.capacity[j],
            other => return Err(bad(&format!("{other:?}"))),
        })
    }
}

/// Central difference `(π(θ + h) − π(θ − h)) / 2h` of the direct solution.
///
/// All three solves must be interior; a perturbation that loses interiority is an error.
pub fn finite_difference_check(inst: &PenalizedInstance, param: Parameter, step: f64) -> Result<Matrix> {
    if !(step != 0.0 && step.is_finite()) {
        return Err(Error::InvalidStep { step });
    }
    let solve = |delta: f64| -> Result<Matrix> {
        let mut p = inst.clone();
        *param.slot(&mut p)? += delta;
        let sol = solve_direct(&p)?;
        if !sol.interior {
            let l = inst.base.n_schools;
            let (k, v) = sol
                .plan
                .pi
                .as_slice()
                .iter()
                .copied()
                .enumerate()
                .find(|&(_, v)| !(v > INTERIOR_TOL))
                .expect("non-interior plan has a nonpositive entry");
            return Err(Error::NonInterior {
                row: k / l,
                col: k % l,
                value: v,
            });
        }
        Ok(sol.plan.pi)
    };
    solve(0.0)?;
    let up = solve(step)?;
    let down = solve(-step)?;
    Ok(up.sub(&down).scale(1.0 / (2.0 * step)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::ProblemInstance;
    use approx::assert_relative_eq;

    fn scalar() -> PenalizedInstance {
        let base = ProblemInstance::congestion(
            Matrix::zeros(1, 1),
            Matrix::filled(1, 1, 1.0),
            alloc::vec![10.0],
            alloc::vec![10.0],
        );
        PenalizedInstance::new(base, alloc::vec![0.1], alloc::vec![0.1])
    }

    #[test]
    fn scalar_exact() {
        let inst = scalar();
        let plan = solve_direct(&inst).unwrap().plan;
        let s = sensitivity_exact(&inst, &plan).unwrap();
        assert_relative_eq!(s.wrt_c[(0, 0)], -1.0 / 2.4, max_relative = 1e-14);
        assert_relative_eq!(s.wrt_a[(0, 0)], -plan.pi[(0, 0)] / 1.2, max_relative = 1e-14);
        let fd = finite_difference_check(&inst, Parameter::A(0, 0), 1e-5).unwrap();
        assert_relative_eq!(fd[(0, 0)], s.wrt_a[(0, 0)], max_relative = 1e-8);
    }

    #[test]
    fn appendix_c_residuals_and_fd() {
        let inst = fixtures::appendix_c();
        let plan = solve_direct(&inst).unwrap().plan;
        let s = sensitivity_exact(&inst, &plan).unwrap();
        let sys = assemble(&inst).unwrap();
        let (rc, ra) = s.residuals(&sys, &plan);
        assert!(rc <= 1e-8 && ra <= 1e-8);
        let fd = finite_difference_check(&inst, Parameter::C(1, 0), 1e-5).unwrap();
        for p in 0..6 {
            assert!((fd.as_slice()[p] - s.wrt_c[(p, 2)]).abs() < 1e-6);
        }
    }

    #[test]
    fn uncoupled_diagonal() {
        let inst = PenalizedInstance::unpenalized(fixtures::example_3_1());
        let mut inst = inst;
        inst.base.linear_cost = Matrix::filled(2, 2, -1.0);
        let plan = solve_direct(&inst).unwrap().plan;
        let s = sensitivity_exact(&inst, &plan).unwrap();
        assert_eq!(s.wrt_c, Matrix::identity(4).scale(-0.5));
    }

    #[test]
    fn truncations() {
        let inst = fixtures::appendix_c();
        let plan = solve_direct(&inst).unwrap().plan;
        let s0 = sensitivity_truncated(&inst, &plan, SensitivityOrder::Order0).unwrap();
        let t0 = s0.sign_table(2);
        assert!(t0.own_negative && !t0.same_type_positive);
        for p in 0..6 {
            for q in 0..6 {
                if p != q {
                    assert_eq!(s0.wrt_c[(p, q)], 0.0);
                }
            }
        }
        let s1 = sensitivity_truncated(&inst, &plan, SensitivityOrder::Order1).unwrap();
        assert!(s1.sign_table(2).holds());
        let exact = sensitivity_exact(&inst, &plan).unwrap();
        let d1 = s1.wrt_c.max_abs_diff(&exact.wrt_c);
        assert!(d1 <= s0.wrt_c.max_abs_diff(&exact.wrt_c));
        assert!(d1 <= order1_remainder_bound(&inst).unwrap());
    }

    #[test]
    fn fd_rejects_bad_input() {
        let inst = fixtures::appendix_c();
        assert!(matches!(
            finite_difference_check(&inst, Parameter::C(0, 0), 0.0),
            Err(Error::InvalidStep { .. })
        ));
        assert!(matches!(
            finite_difference_check(&inst, Parameter::Mu(5), 1e-3),
            Err(Error::BadCoordinate { .. })
        ));
        assert!(matches!(
            finite_difference_check(&inst, Parameter::C(0, 0), 40.0),
            Err(Error::NonInterior { .. })
        ));
    }

    #[test]
    fn non_interior_plan_rejected() {
        let inst = fixtures::appendix_c();
        let mut plan = solve_direct(&inst).unwrap().plan;
        plan.pi[(2, 1)] = 0.0;
        assert!(matches!(
            sensitivity_exact(&inst, &plan),
            Err(Error::NonInterior { row: 2, col: 1, .. })
        ));
    }
}
