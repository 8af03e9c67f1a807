//! Inverses of `A`: rank-one updates, the block closed form, and a dense reference.

use alloc::format;
use alloc::vec::Vec;

use super::assemble;
use crate::audit::{audit_assumptions, Gated};
use crate::error::{Error, RankOneUpdate, Result};
use crate::instance::{evaluate_cost, Objective, PenalizedInstance, TransportPlan};
use crate::linalg::{Cholesky, Matrix};

/// Guard on `1 + wᵀA⁻¹w` for each rank-one update.
pub const PIVOT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmwInverse {
    pub inverse: Matrix,
    /// Updates actually applied; zero weights are skipped.
    pub updates_applied: usize,
}

/// `A⁻¹` from `D⁻¹` by `N + L` Sherman–Morrison updates with
/// `u_i = √ε_i (e_i ⊗ 1_L)` and `v_j = √δ_j (1_N ⊗ e_j)`.
pub fn sherman_morrison_inverse(inst: &PenalizedInstance) -> Result<SmwInverse> {
    inst.validate_with_cap(usize::MAX)?;
    inst.base.check_positive_quad()?;
    let (n, l) = inst.shape();
    let nl = n * l;
    let a = inst.base.quad_cost.as_slice();
    let mut inv = Matrix::from_diag(&a.iter().map(|&v| 1.0 / v).collect::<Vec<_>>());
    let mut z = alloc::vec![0.0; nl];
    let mut updates_applied = 0;

    let mut apply = |inv: &mut Matrix, cells: &mut dyn Iterator<Item = usize>, weight: f64, which: RankOneUpdate| {
        let cells: Vec<usize> = cells.collect();
        let s = libm::sqrt(weight);
        // z = A⁻¹ w, using symmetry: sum of the selected rows.
        z.iter_mut().for_each(|v| *v = 0.0);
        for &c in &cells {
            for (zv, &x) in z.iter_mut().zip(inv.row(c)) {
                *zv += s * x;
            }
        }
        let pivot = 1.0 + s * cells.iter().map(|&c| z[c]).sum::<f64>();
        if !(pivot >= PIVOT_GUARD) {
            return Err(Error::PivotVanished {
                update: which,
                value: pivot,
            });
        }
        for r in 0..nl {
            let f = z[r] / pivot;
            if f != 0.0 {
                for (x, &zc) in inv.row_mut(r).iter_mut().zip(z.iter()) {
                    *x -= f * zc;
                }
            }
        }
        updates_applied += 1;
        Ok(())
    };

    for i in 0..n {
        if inst.eps[i] > 0.0 {
            apply(
                &mut inv,
                &mut (i * l..(i + 1) * l),
                inst.eps[i],
                RankOneUpdate::Supply(i),
            )?;
        }
    }
    for j in 0..l {
        if inst.delta[j] > 0.0 {
            apply(
                &mut inv,
                &mut (0..n).map(|i| i * l + j),
                inst.delta[j],
                RankOneUpdate::Capacity(j),
            )?;
        }
    }
    Ok(SmwInverse {
        inverse: inv,
        updates_applied,
    })
}

/// Reference inverse from a Cholesky factorization of the assembled `A`.
pub fn dense_inverse(inst: &PenalizedInstance) -> Result<Matrix> {
    let sys = assemble(inst)?;
    Ok(Cholesky::new(&sys.a)?.inverse())
}

fn closed_form_gate(inst: &PenalizedInstance) -> Result<core::result::Result<f64, alloc::string::String>> {
    inst.validate_with_cap(usize::MAX)?;
    let audit = audit_assumptions(inst);
    for check in [&audit.a5_delta_zero_uniform_d, &audit.a6_small_supply_penalty] {
        if !check.holds {
            return Ok(Err(check.detail.clone()));
        }
    }
    Ok(Ok(audit.beta.expect("A5 fixes beta")))
}

/// `A⁻¹ = I/β − (1/β) Diag(ε_i / (β + L ε_i)) ⊗ 1_{L×L}` when `δ ≡ 0` and `D = βI`.
pub fn closed_form_inverse(inst: &PenalizedInstance) -> Result<Gated<Matrix>> {
    let beta = match closed_form_gate(inst)? {
        Ok(b) => b,
        Err(reason) => return Ok(Gated::inapplicable(reason)),
    };
    let (n, l) = inst.shape();
    let lf = l as f64;
    let shrink: Vec<f64> = inst.eps.iter().map(|&e| e / (beta * (beta + lf * e))).collect();
    let inv = Matrix::from_fn(n * l, n * l, |p, q| {
        let mut v = if p == q { 1.0 / beta } else { 0.0 };
        if p / l == q / l {
            v -= shrink[p / l];
        }
        v
    });
    Ok(Gated::Applicable(inv))
}

/// `π_ij = b_ij/β − Σ_ℓ b_iℓ ε_i / (β² + L ε_i β)`, applicable only when every entry is positive.
pub fn closed_form_plan(inst: &PenalizedInstance) -> Result<Gated<TransportPlan>> {
    let beta = match closed_form_gate(inst)? {
        Ok(b) => b,
        Err(reason) => return Ok(Gated::inapplicable(reason)),
    };
    let (n, l) = inst.shape();
    let b = inst.rhs();
    let lf = l as f64;
    let mut pi = Matrix::zeros(n, l);
    for i in 0..n {
        let row_sum: f64 = b[i * l..(i + 1) * l].iter().sum();
        let coef = inst.eps[i] / (beta * beta + lf * inst.eps[i] * beta);
        for j in 0..l {
            let v = b[i * l + j] / beta - row_sum * coef;
            if !(v > 0.0) {
                return Ok(Gated::inapplicable(format!(
                    "closed-form entry ({}, {}) = {v} is not positive",
                    i + 1,
                    j + 1
                )));
            }
            pi[(i, j)] = v;
        }
    }
    let objective = evaluate_cost(Objective::Penalized(inst), &pi)?;
    Ok(Gated::Applicable(TransportPlan { pi, objective }))
}
