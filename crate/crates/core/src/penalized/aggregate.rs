//! Aggregate assignments when costs are linear and constant along each row.

use alloc::format;
use alloc::vec::Vec;

use crate::audit::{audit_assumptions, Assumption};
use crate::error::{Error, Result};
use crate::instance::PenalizedInstance;

/// Row totals `x_i = (2 ε_i μ_i − c_i) / (2 ε_i)` of the penalized optimum
/// when `δ ≡ 0`, `a ≡ 0` and `0 < c_ij = c_i < 2 ε_i μ_i`. Each satisfies `0 < x_i < μ_i`.
pub fn aggregate_mass_special(inst: &PenalizedInstance) -> Result<Vec<f64>> {
    inst.validate_with_cap(usize::MAX)?;
    let audit = audit_assumptions(inst);
    if !audit.a7_linear_row_costs.holds {
        return Err(Error::Gate {
            assumption: Assumption::LinearRowCosts,
            detail: audit.a7_linear_row_costs.detail,
        });
    }
    let base = &inst.base;
    let mut x = Vec::with_capacity(base.n_types);
    for i in 0..base.n_types {
        let (c, e, mu) = (base.linear_cost[(i, 0)], inst.eps[i], base.supply[i]);
        if !(c > 0.0) {
            return Err(Error::Gate {
                assumption: Assumption::LinearRowCosts,
                detail: format!("row cost c_{} = {c} must be strictly positive", i + 1),
            });
        }
        x.push((2.0 * e * mu - c) / (2.0 * e));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::ProblemInstance;
    use crate::linalg::Matrix;

    fn inst(c: f64, eps: f64, mu: f64) -> PenalizedInstance {
        let base = ProblemInstance::linear(Matrix::filled(1, 2, c), alloc::vec![mu], alloc::vec![mu / 2.0; 2]);
        PenalizedInstance::new(base, alloc::vec![eps], alloc::vec![0.0; 2])
    }

    #[test]
    fn scalar_formula() {
        assert_eq!(aggregate_mass_special(&inst(2.0, 1.0, 10.0)).unwrap(), alloc::vec![9.0]);
    }

    #[test]
    fn zero_cost_excluded() {
        assert!(matches!(
            aggregate_mass_special(&inst(0.0, 1.0, 10.0)),
            Err(Error::Gate { .. })
        ));
    }

    #[test]
    fn expensive_rows_fail_gate() {
        assert!(matches!(
            aggregate_mass_special(&inst(25.0, 1.0, 10.0)),
            Err(Error::Gate {
                assumption: Assumption::LinearRowCosts,
                ..
            })
        ));
    }
}
