//! Serializable reports. Field order is fixed so identical runs give identical bytes.

use congested_ot_core::penalized::{BoundContainment, EntryBounds, NeumannTrace};
use congested_ot_core::sensitivity::{SensitivityMatrix, SignTable};
use congested_ot_core::{Assumption, AssumptionAudit, Balance, KktCertificate, Matrix};
use serde::Serialize;

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionEntry {
    pub id: u8,
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub assumptions: Vec<AssumptionEntry>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub zeta: Option<f64>,
}

impl From<&AssumptionAudit> for AuditReport {
    fn from(a: &AssumptionAudit) -> Self {
        AuditReport {
            assumptions: Assumption::ALL
                .iter()
                .map(|&x| {
                    let c = a.get(x);
                    AssumptionEntry {
                        id: x.number(),
                        name: x.short_name(),
                        holds: c.holds,
                        detail: c.detail.clone(),
                    }
                })
                .collect(),
            beta: a.beta,
            rho: a.rho_zeta.map(|r| r.0),
            zeta: a.rho_zeta.map(|r| r.1),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub balanced: bool,
    pub imbalance: f64,
}

impl From<Balance> for BalanceReport {
    fn from(b: Balance) -> Self {
        BalanceReport {
            balanced: b.balanced,
            imbalance: b.imbalance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
}

impl From<&KktCertificate> for CertificateReport {
    fn from(c: &KktCertificate) -> Self {
        CertificateReport {
            xi: c.xi.clone(),
            lambda: c.lambda.clone(),
            gamma: rows(&c.gamma),
            stationarity_residual: c.stationarity_residual,
            complementarity_residual: c.complementarity_residual,
        }
    }
}

/// Transportation-simplex output: MODI potentials and the vertex size.
#[derive(Debug, Clone, Serialize)]
pub struct LinearDuals {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub dual_objective: f64,
    pub min_reduced_cost: f64,
    pub basis_size: usize,
    pub basis_cells: Vec<(usize, usize)>,
    pub positive_cells: usize,
    /// `N + L − 1`.
    pub vertex_bound: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeumannReport {
    pub norm: f64,
    pub spectral_radius: f64,
    pub margin: f64,
    pub n_eps: usize,
    pub first_below_target: Option<usize>,
    pub final_error: f64,
    pub final_bound: f64,
}

impl From<&NeumannTrace> for NeumannReport {
    fn from(t: &NeumannTrace) -> Self {
        let last = t.steps.last().expect("at least one step");
        NeumannReport {
            norm: t.gate.norm,
            spectral_radius: t.gate.spectral_radius,
            margin: t.gate.margin,
            n_eps: t.n_eps,
            first_below_target: t.first_below_target,
            final_error: last.measured_error,
            final_bound: last.error_bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<BoundValues>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundValues {
    pub rho: f64,
    pub zeta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_tilde: f64,
    pub plan_bound: f64,
    pub min_inverse_entry: f64,
    pub max_inverse_entry: f64,
    pub c1_le_min_entry: bool,
    pub max_entry_le_c2: bool,
    pub max_plan_entry: f64,
    pub plan_within_bound: bool,
}

impl BoundsReport {
    pub fn inapplicable(reason: String) -> Self {
        BoundsReport {
            applicable: false,
            reason: Some(reason),
            values: None,
        }
    }

    pub fn from_parts(b: &EntryBounds, c: &BoundContainment, max_plan_entry: f64) -> Self {
        BoundsReport {
            applicable: true,
            reason: None,
            values: Some(BoundValues {
                rho: b.rho,
                zeta: b.zeta,
                c1: b.c1,
                c2: b.c2,
                c_tilde: b.c_tilde,
                plan_bound: b.plan_bound,
                min_inverse_entry: c.min_entry,
                max_inverse_entry: c.max_entry,
                c1_le_min_entry: c.lower_holds,
                max_entry_le_c2: c.upper_holds,
                max_plan_entry,
                plan_within_bound: max_plan_entry <= b.plan_bound,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SignReport {
    pub own_negative: bool,
    pub same_type_positive: bool,
    pub same_school_positive: bool,
    pub unrelated_zero: bool,
}

impl From<SignTable> for SignReport {
    fn from(t: SignTable) -> Self {
        SignReport {
            own_negative: t.own_negative,
            same_type_positive: t.same_type_positive,
            same_school_positive: t.same_school_positive,
            unrelated_zero: t.unrelated_zero,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    pub order: &'static str,
    /// `‖2A·S_c + I‖_max`; `H = 2A` is the Hessian of the objective.
    pub residual_c: f64,
    /// `‖2A·S_a + 2 Diag(π)‖_max`.
    pub residual_a: f64,
    pub wrt_c: Vec<Vec<f64>>,
    pub wrt_a: Vec<Vec<f64>>,
    pub signs: SignReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order1_remainder_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_max_gap_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_max_gap_a: Option<f64>,
}

impl SensitivityReport {
    pub fn new(order: &'static str, s: &SensitivityMatrix, residuals: (f64, f64), n_schools: usize) -> Self {
        SensitivityReport {
            order,
            residual_c: residuals.0,
            residual_a: residuals.1,
            wrt_c: rows(&s.wrt_c),
            wrt_a: rows(&s.wrt_a),
            signs: s.sign_table(n_schools).into(),
            order1_remainder_bound: None,
            fd_max_gap_c: None,
            fd_max_gap_a: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub solve_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub input: String,
    pub model: &'static str,
    pub method: &'static str,
    pub audit: AuditReport,
    pub balance: BalanceReport,
    pub objective: f64,
    pub plan: Vec<Vec<f64>>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior: Option<bool>,
    /// `‖Aπ − b‖_∞` for the linear-system routes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duals: Option<LinearDuals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neumann: Option<NeumannReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Plan as CSV, one row per type.
pub fn plan_csv(plan: &Matrix) -> Result<String, csv::Error> {
    matrix_csv(plan)
}

pub fn matrix_csv(m: &Matrix) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.rows() {
        w.serialize(m.row(i))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
