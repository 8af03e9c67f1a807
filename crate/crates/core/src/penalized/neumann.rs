//! Neumann-series solve `π_n = Σ_{k≤n} (−D⁻¹X)^k D⁻¹ b`.

use alloc::format;
use alloc::vec::Vec;

use super::{apply_x, assemble, solve_system};
use crate::audit::{audit_assumptions, Assumption};
use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, Objective, PenalizedInstance, TransportPlan, INTERIOR_TOL};
use crate::linalg::{norm_inf, power_iteration, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannOptions {
    pub eps_target: f64,
    /// Hard cap on the number of series terms.
    pub max_iter: usize,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            eps_target: 1e-8,
            max_iter: 100_000,
        }
    }
}

/// Both convergence gates: the stated weighted-maxima inequality and the measured norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGate {
    pub assumption_holds: bool,
    /// `min a − (max ε · L + max δ · N)`.
    pub margin: f64,
    /// `‖D⁻¹X‖₂`, the largest singular value.
    pub norm: f64,
    /// Spectral radius of `D⁻¹X`, measured on the similar matrix `D^{-1/2} X D^{-1/2}`.
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannStep {
    pub n: usize,
    /// `√NL · r^{n+1} · ‖D⁻¹b‖_∞ / (1 − r)` with `r = ‖D⁻¹X‖₂`.
    pub error_bound: f64,
    /// `‖π_n − A⁻¹b‖_∞` against a Cholesky solve.
    pub measured_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannTrace {
    pub gate: SpectralGate,
    /// Number of terms prescribed by the error bound for `eps_target`.
    pub n_eps: usize,
    /// First `n` whose measured error is below `eps_target`.
    pub first_below_target: Option<usize>,
    pub steps: Vec<NeumannStep>,
    /// Floating-point floor on the measured error: the reference solve and
    /// the series both carry rounding of order `ε_mach · ‖π‖_∞` per term.
    pub roundoff_allowance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSolution {
    /// `π_{N_ε}`; may contain negative entries when `interior` is false.
    pub plan: TransportPlan,
    pub interior: bool,
    pub trace: NeumannTrace,
}

fn measure_gate(inst: &PenalizedInstance) -> SpectralGate {
    let (n, l) = inst.shape();
    let nl = n * l;
    let a = inst.base.quad_cost.as_slice();
    let inv_d2: Vec<f64> = a.iter().map(|&v| 1.0 / (v * v)).collect();
    // ‖D⁻¹X‖₂² = λ_max(X D⁻² X)
    let lam = power_iteration(
        nl,
        |v| {
            let xv = apply_x(&inst.eps, &inst.delta, v);
            let scaled: Vec<f64> = xv.iter().zip(&inv_d2).map(|(x, w)| x * w).collect();
            apply_x(&inst.eps, &inst.delta, &scaled)
        },
        200,
        1e-12,
    );
    let inv_sqrt_d: Vec<f64> = a.iter().map(|&v| 1.0 / libm::sqrt(v)).collect();
    let radius = power_iteration(
        nl,
        |v| {
            let s: Vec<f64> = v.iter().zip(&inv_sqrt_d).map(|(x, w)| x * w).collect();
            apply_x(&inst.eps, &inst.delta, &s)
                .iter()
                .zip(&inv_sqrt_d)
                .map(|(x, w)| x * w)
                .collect()
        },
        200,
        1e-12,
    );
    let audit = audit_assumptions(inst);
    let max_eps = inst.eps.iter().copied().fold(0.0, f64::max);
    let max_delta = inst.delta.iter().copied().fold(0.0, f64::max);
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    SpectralGate {
        assumption_holds: audit.a4_spectral_gate.holds,
        margin: min_a - (max_eps * l as f64 + max_delta * n as f64),
        norm: libm::sqrt(lam.max(0.0)),
        spectral_radius: radius.max(0.0),
    }
}

/// Number of terms after which the geometric bound drops below `eps_target`.
pub(crate) fn n_epsilon(r: f64, nl: usize, dinv_b: f64, eps_target: f64) -> usize {
    if r == 0.0 || dinv_b == 0.0 {
        return 0;
    }
    let arg = eps_target * (1.0 - r) / (libm::sqrt(nl as f64) * dinv_b);
    let n = libm::ceil((libm::log(arg) / libm::log(r)).abs());
    (n as usize).max(1)
}

/// Runs the series to `N_ε` terms. Refuses when the measured norm is at least one.
pub fn neumann_solve(inst: &PenalizedInstance, opts: &NeumannOptions) -> Result<NeumannSolution> {
    let sys = assemble(inst)?;
    let gate = measure_gate(inst);
    if !(gate.norm < 1.0) {
        return Err(Error::Gate {
            assumption: Assumption::SpectralGate,
            detail: format!(
                "measured ||D^-1 X||_2 = {} >= 1 (assumption holds: {}, margin {})",
                gate.norm, gate.assumption_holds, gate.margin
            ),
        });
    }
    if !(opts.eps_target > 0.0) {
        return Err(Error::InvalidStep { step: opts.eps_target });
    }
    let (n, l) = inst.shape();
    let nl = n * l;
    let r = gate.norm;
    let dinv_b: Vec<f64> = sys.b.iter().zip(&sys.d).map(|(b, d)| b / d).collect();
    let dinv_b_norm = norm_inf(&dinv_b);
    let n_eps = n_epsilon(r, nl, dinv_b_norm, opts.eps_target);
    if n_eps > opts.max_iter {
        // report the a-priori error bound after the allowed number of terms
        let residual = libm::sqrt(nl as f64) * libm::pow(r, (opts.max_iter + 1) as f64) * dinv_b_norm / (1.0 - r);
        return Err(Error::NotConverged {
            iterations: opts.max_iter,
            residual,
        });
    }

    let reference = solve_system(inst, &sys)?.plan.pi.into_vec();
    let ref_norm = norm_inf(&reference);
    let error = |pi: &[f64]| {
        pi.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let bound = |k: usize| libm::sqrt(nl as f64) * libm::pow(r, (k + 1) as f64) * dinv_b_norm / (1.0 - r);

    let mut term = dinv_b.clone();
    let mut pi = dinv_b;
    let mut steps = Vec::with_capacity(n_eps + 1);
    let mut first_below_target = None;
    for k in 0..=n_eps {
        if k > 0 {
            let x = apply_x(&inst.eps, &inst.delta, &term);
            term = x.iter().zip(&sys.d).map(|(x, d)| -x / d).collect();
            pi.iter_mut().zip(&term).for_each(|(p, t)| *p += t);
        }
        let measured_error = error(&pi);
        if first_below_target.is_none() && measured_error < opts.eps_target {
            first_below_target = Some(k);
        }
        steps.push(NeumannStep {
            n: k,
            error_bound: bound(k),
            measured_error,
        });
    }
    let roundoff_allowance = 64.0 * f64::EPSILON * ref_norm.max(dinv_b_norm) * (n_eps + 1) as f64;
    let interior = pi.iter().all(|&v| v > INTERIOR_TOL);
    let pi = Matrix::from_vec(n, l, pi).expect("shape");
    let objective = evaluate_cost(Objective::Penalized(inst), &pi)?;
    Ok(NeumannSolution {
        plan: TransportPlan { pi, objective },
        interior,
        trace: NeumannTrace {
            gate,
            n_eps,
            first_below_target,
            steps,
            roundoff_allowance,
        },
    })
}
