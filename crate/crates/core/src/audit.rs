//! Checks for the structural assumptions that unlock closed forms and special solvers.
//!
//! Each flag is a pure function of the instance. Equalities are tested exactly,
//! inequalities strictly, as stated.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::instance::{PenalizedInstance, ProblemInstance};

/// The eight structural assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// `N = L = K > 1` and all marginals equal.
    SquareUniform,
    /// Each type has a unique strict cheapest school `t_i`, and the `t_i` are distinct.
    DistinctTopChoice,
    /// Runner-up gap: `c̃_i > c_{i t_i} + a_{i t_i} μ_i² (1 − 1/L)`.
    TopChoiceGap,
    /// Spectral gate: `max ε · L + max δ · N < min a`, with `a > 0`.
    SpectralGate,
    /// `δ ≡ 0` and `D = βI`.
    UniformQuadNoCapacityPenalty,
    /// `L ε_i < min{1, β}`.
    SmallSupplyPenalty,
    /// `δ ≡ 0`, `a ≡ 0`, `c_ij = c_i < 2 ε_i μ_i`.
    LinearRowCosts,
    /// `a ≡ ρ`, `ε ≡ δ ≡ ζ`, `ρ > 2NLζ > 0`.
    UniformWeights,
}

impl Assumption {
    pub const ALL: [Assumption; 8] = [
        Assumption::SquareUniform,
        Assumption::DistinctTopChoice,
        Assumption::TopChoiceGap,
        Assumption::SpectralGate,
        Assumption::UniformQuadNoCapacityPenalty,
        Assumption::SmallSupplyPenalty,
        Assumption::LinearRowCosts,
        Assumption::UniformWeights,
    ];

    /// 1-based number used in reports.
    pub fn number(self) -> u8 {
        match self {
            Assumption::SquareUniform => 1,
            Assumption::DistinctTopChoice => 2,
            Assumption::TopChoiceGap => 3,
            Assumption::SpectralGate => 4,
            Assumption::UniformQuadNoCapacityPenalty => 5,
            Assumption::SmallSupplyPenalty => 6,
            Assumption::LinearRowCosts => 7,
            Assumption::UniformWeights => 8,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Assumption::SquareUniform => "square-uniform",
            Assumption::DistinctTopChoice => "distinct-top-choice",
            Assumption::TopChoiceGap => "top-choice-gap",
            Assumption::SpectralGate => "spectral-gate",
            Assumption::UniformQuadNoCapacityPenalty => "delta-zero-uniform-D",
            Assumption::SmallSupplyPenalty => "small-supply-penalty",
            Assumption::LinearRowCosts => "linear-row-costs",
            Assumption::UniformWeights => "uniform-weights",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Assumption {} ({})", self.number(), self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub holds: bool,
    pub detail: String,
}

impl AssumptionCheck {
    fn new(holds: bool, detail: String) -> Self {
        Self { holds, detail }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionAudit {
    pub a1_square_uniform: AssumptionCheck,
    pub a2_distinct_top_choice: AssumptionCheck,
    pub a3_top_choice_gap: AssumptionCheck,
    pub a4_spectral_gate: AssumptionCheck,
    pub a5_delta_zero_uniform_d: AssumptionCheck,
    pub a6_small_supply_penalty: AssumptionCheck,
    pub a7_linear_row_costs: AssumptionCheck,
    pub a8_uniform_weights: AssumptionCheck,
    /// 0-based cheapest school per type when it is unique.
    pub top_choice: Vec<Option<usize>>,
    /// Cheapest cost among the schools other than `t_i`.
    pub runner_up_cost: Vec<Option<f64>>,
    /// Common value of `a` when all entries coincide.
    pub beta: Option<f64>,
    /// `(ρ, ζ)` when the uniform-weights pattern is present.
    pub rho_zeta: Option<(f64, f64)>,
}

impl AssumptionAudit {
    pub fn get(&self, a: Assumption) -> &AssumptionCheck {
        match a {
            Assumption::SquareUniform => &self.a1_square_uniform,
            Assumption::DistinctTopChoice => &self.a2_distinct_top_choice,
            Assumption::TopChoiceGap => &self.a3_top_choice_gap,
            Assumption::SpectralGate => &self.a4_spectral_gate,
            Assumption::UniformQuadNoCapacityPenalty => &self.a5_delta_zero_uniform_d,
            Assumption::SmallSupplyPenalty => &self.a6_small_supply_penalty,
            Assumption::LinearRowCosts => &self.a7_linear_row_costs,
            Assumption::UniformWeights => &self.a8_uniform_weights,
        }
    }

    pub fn holds(&self, a: Assumption) -> bool {
        self.get(a).holds
    }
}

/// Outcome of a routine that only applies when its assumptions hold.
///
/// Inapplicability is an ordinary value, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Gated<T> {
    Applicable(T),
    Inapplicable { reason: String },
}

impl<T> Gated<T> {
    pub fn inapplicable(reason: impl Into<String>) -> Self {
        Gated::Inapplicable { reason: reason.into() }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Gated::Applicable(_))
    }

    pub fn applicable(self) -> Option<T> {
        match self {
            Gated::Applicable(t) => Some(t),
            Gated::Inapplicable { .. } => None,
        }
    }

    pub fn as_ref(&self) -> Gated<&T> {
        match self {
            Gated::Applicable(t) => Gated::Applicable(t),
            Gated::Inapplicable { reason } => Gated::Inapplicable { reason: reason.clone() },
        }
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Computes every assumption flag for a penalized instance.
///
/// Plain instances can be audited through [`PenalizedInstance::unpenalized`].
/// The instance is expected to pass validation; dimension errors are not re-checked.
pub fn audit_assumptions(inst: &PenalizedInstance) -> AssumptionAudit {
    let base = &inst.base;
    let (n, l) = base.shape();
    let a = base.quad_cost.as_slice();
    let (top_choice, runner_up_cost) = top_choices(base);

    let a1 = {
        let mu0 = base.supply.first().copied().unwrap_or(f64::NAN);
        let uniform = base.supply.iter().chain(&base.capacity).all(|&v| v == mu0);
        let holds = n == l && n > 1 && uniform;
        AssumptionCheck::new(holds, format!("N = {n}, L = {l}, all marginals equal: {uniform}"))
    };

    let a2 = {
        let unique = top_choice.iter().all(Option::is_some);
        let mut seen = alloc::vec![false; l];
        let mut distinct = unique;
        for t in top_choice.iter().flatten() {
            if seen[*t] {
                distinct = false;
            }
            seen[*t] = true;
        }
        let listing: Vec<String> = top_choice
            .iter()
            .map(|t| t.map_or(String::from("-"), |t| format!("{}", t + 1)))
            .collect();
        AssumptionCheck::new(distinct, format!("strict row argmins t = [{}]", listing.join(", ")))
    };

    let a3 = if !a2.holds {
        AssumptionCheck::new(false, String::from("requires distinct strict top choices"))
    } else {
        let mut holds = true;
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let t = top_choice[i].expect("checked by A2");
            let rhs = base.linear_cost[(i, t)]
                + base.quad_cost[(i, t)] * base.supply[i] * base.supply[i] * (1.0 - 1.0 / l as f64);
            let lhs = runner_up_cost[i].unwrap_or(f64::INFINITY);
            worst = worst.min(lhs - rhs);
            holds &= lhs > rhs;
        }
        AssumptionCheck::new(
            holds,
            format!("min over i of c~_i - (c_i,t_i + a_i,t_i mu_i^2 (1 - 1/L)) = {worst}"),
        )
    };

    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a4 = {
        let lhs = max_of(&inst.eps) * l as f64 + max_of(&inst.delta) * n as f64;
        let holds = min_a > 0.0 && lhs < min_a;
        AssumptionCheck::new(holds, format!("max eps * L + max delta * N = {lhs} vs min a = {min_a}"))
    };

    let beta = a.first().copied().filter(|&b| a.iter().all(|&v| v == b));
    let delta_zero = inst.delta.iter().all(|&d| d == 0.0);
    let a5 = {
        let holds = delta_zero && beta.is_some_and(|b| b > 0.0);
        AssumptionCheck::new(
            holds,
            format!("delta == 0: {delta_zero}, D = beta I with beta = {beta:?}"),
        )
    };

    let a6 = match beta {
        Some(b) if b > 0.0 => {
            let lhs = max_of(&inst.eps) * l as f64;
            let bound = b.min(1.0);
            let holds = inst.eps.iter().all(|&e| l as f64 * e < bound);
            AssumptionCheck::new(holds, format!("max L * eps_i = {lhs} vs min(1, beta) = {bound}"))
        }
        _ => AssumptionCheck::new(
            false,
            String::from("beta undefined: quadratic costs are not a positive constant"),
        ),
    };

    let a7 = {
        let a_zero = a.iter().all(|&v| v == 0.0);
        let mut rows_ok = true;
        for i in 0..n {
            let row = base.linear_cost.row(i);
            let ci = row[0];
            rows_ok &= row.iter().all(|&v| v == ci) && ci < 2.0 * inst.eps[i] * base.supply[i];
        }
        let holds = delta_zero && a_zero && rows_ok;
        AssumptionCheck::new(
            holds,
            format!("delta == 0: {delta_zero}, a == 0: {a_zero}, c_ij = c_i < 2 eps_i mu_i: {rows_ok}"),
        )
    };

    let rho_zeta = beta.and_then(|rho| {
        let zeta = inst.eps.first().copied()?;
        let uniform = inst.eps.iter().chain(&inst.delta).all(|&v| v == zeta);
        uniform.then_some((rho, zeta))
    });
    let a8 = match rho_zeta {
        Some((rho, zeta)) => {
            let gate = 2.0 * (n * l) as f64 * zeta;
            AssumptionCheck::new(rho > gate && gate > 0.0, format!("rho = {rho}, 2 N L zeta = {gate}"))
        }
        None => AssumptionCheck::new(false, String::from("a, eps and delta are not uniform")),
    };

    AssumptionAudit {
        a1_square_uniform: a1,
        a2_distinct_top_choice: a2,
        a3_top_choice_gap: a3,
        a4_spectral_gate: a4,
        a5_delta_zero_uniform_d: a5,
        a6_small_supply_penalty: a6,
        a7_linear_row_costs: a7,
        a8_uniform_weights: a8,
        top_choice,
        runner_up_cost,
        beta,
        rho_zeta,
    }
}

/// Strict unique row argmin of `c` and the smallest remaining cost in that row.
fn top_choices(base: &ProblemInstance) -> (Vec<Option<usize>>, Vec<Option<f64>>) {
    let l = base.n_schools;
    let mut tops = Vec::with_capacity(base.n_types);
    let mut runner = Vec::with_capacity(base.n_types);
    for i in 0..base.n_types {
        let row = base.linear_cost.row(i);
        let mut best = 0;
        for j in 1..l {
            if row[j] < row[best] {
                best = j;
            }
        }
        let second = (0..l)
            .filter(|&j| j != best)
            .map(|j| row[j])
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        let strict = second.is_none_or(|s| s > row[best]);
        tops.push(strict.then_some(best));
        runner.push(if strict { second } else { None });
    }
    (tops, runner)
}
