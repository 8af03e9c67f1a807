//! Subcommand implementations. Each returns what goes to stdout.

use std::path::{Path, PathBuf};
use std::time::Instant;

use congested_ot_core::congestion::{
    build_bordered_hessian, build_singular_system, solve_congestion_with, CongestionOptions,
};
use congested_ot_core::instance::DEFAULT_MAX_CELLS;
use congested_ot_core::linear::solve_linear;
use congested_ot_core::oracle::{enumerate_integer_plans, projected_gradient_reference};
use congested_ot_core::penalized::{
    assemble, closed_form_inverse, closed_form_plan, dense_inverse, entry_bounds, neumann_solve,
    sherman_morrison_inverse, solve_direct, solve_penalized, solve_penalized_qp_with, NeumannOptions, PenalizedRoute,
};
use congested_ot_core::sensitivity::{
    finite_difference_check, order1_remainder_bound, sensitivity_truncated, Parameter, SensitivityOrder,
};
use congested_ot_core::{
    audit_assumptions, evaluate_cost, Assumption, Error, Gated, Matrix, ModelKind, Objective, PenalizedInstance,
    TransportPlan,
};
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, FormatArg, InverseArgs, InverseMethodArg, MethodArg, ModelArg, OracleArgs, OracleKind, OrderArg,
    SensitivityArgs, SolveArgs,
};
use crate::exit::{CliError, ExitKind};
use crate::input::{load_instance, LoadedInstance};
use crate::report::{
    matrix_csv, plan_csv, rows, to_json, AuditReport, BalanceReport, BoundsReport, LinearDuals, SensitivityReport,
    SolveReport, Timing,
};

pub const MAX_NL_ENV: &str = "CONGESTED_OT_MAX_NL";

/// NL cap from [`MAX_NL_ENV`], or the library default.
pub fn max_cells() -> Result<usize, CliError> {
    match std::env::var(MAX_NL_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::new(
                ExitKind::Validation,
                format!("{MAX_NL_ENV} must be a positive integer, got {v:?}"),
            )
        }),
        Err(_) => Ok(DEFAULT_MAX_CELLS),
    }
}

fn load(path: &Path) -> Result<LoadedInstance, CliError> {
    load_instance(path, max_cells()?)
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| CliError::new(ExitKind::Validation, e.to_string()))
}

fn csv_text(m: &Matrix) -> Result<String, CliError> {
    matrix_csv(m).map_err(|e| CliError::new(ExitKind::Validation, e.to_string()))
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::Linear => "linear",
        ModelArg::Congestion => "congestion",
        ModelArg::Penalized => "penalized",
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Direct => "direct",
        MethodArg::Neumann => "neumann",
        MethodArg::Smw => "smw",
        MethodArg::ClosedForm => "closed-form",
        MethodArg::Qp => "qp",
    }
}

fn model_kind(m: ModelArg) -> ModelKind {
    match m {
        ModelArg::Linear => ModelKind::Linear,
        ModelArg::Congestion => ModelKind::Congestion,
        ModelArg::Penalized => ModelKind::Penalized,
    }
}

pub fn infer_model(loaded: &LoadedInstance) -> ModelArg {
    if loaded.penalized {
        ModelArg::Penalized
    } else if loaded.instance.base.quad_cost.as_slice().iter().all(|&a| a > 0.0) {
        ModelArg::Congestion
    } else {
        ModelArg::Linear
    }
}

/// Rejects option combinations that make no sense before any solving happens.
pub fn check_solve_options(args: &SolveArgs, model: ModelArg) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::new(ExitKind::Validation, msg));
    match (model, args.method) {
        (_, None) | (ModelArg::Penalized, Some(_)) | (ModelArg::Congestion, Some(MethodArg::Qp)) => {}
        (m, Some(method)) => {
            return bad(format!(
                "method {} is not available for the {} model",
                method_name(method),
                model_name(m)
            ))
        }
    }
    if model != ModelArg::Penalized && (args.bounds || args.sensitivity.is_some()) {
        return bad(format!(
            "--bounds and --sensitivity need the penalized model, not {}",
            model_name(model)
        ));
    }
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return bad(format!("--tol must be positive, got {}", args.tol));
    }
    if !(args.eps_target > 0.0 && args.eps_target.is_finite()) {
        return bad(format!("--eps-target must be positive, got {}", args.eps_target));
    }
    if args.inputs.len() > 1 && args.output_dir.is_none() {
        return bad("several inputs need --output-dir".into());
    }
    Ok(())
}

/// Unwraps a closed-form result, naming whichever of A5/A6 fails when it is inapplicable.
fn closed_form_gated<T>(inst: &PenalizedInstance, g: Gated<T>) -> Result<T, CliError> {
    match g {
        Gated::Applicable(v) => Ok(v),
        Gated::Inapplicable { reason } => {
            let audit = audit_assumptions(inst);
            match [Assumption::UniformQuadNoCapacityPenalty, Assumption::SmallSupplyPenalty]
                .into_iter()
                .find(|&a| !audit.holds(a))
            {
                Some(assumption) => Err(Error::Gate {
                    assumption,
                    detail: reason,
                }
                .into()),
                None => Err(CliError::new(ExitKind::Gate, reason)),
            }
        }
    }
}

fn require_interior(plan: &TransportPlan, interior: bool, method: &str) -> Result<(), CliError> {
    if interior {
        return Ok(());
    }
    let (k, v) = plan
        .pi
        .as_slice()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b });
    let l = plan.pi.cols();
    Err(CliError::new(
        ExitKind::Gate,
        format!(
            "{method} gives a non-interior solution (cell ({}, {}) = {v:e}); use --method qp",
            k / l + 1,
            k % l + 1
        ),
    ))
}

struct Solved {
    report: SolveReport,
    plan: Matrix,
}

fn solve_one(path: &Path, args: &SolveArgs) -> Result<Solved, CliError> {
    let total = Instant::now();
    let loaded = load(path)?;
    let model = args.model.unwrap_or_else(|| infer_model(&loaded));
    check_solve_options(args, model)?;
    let inst = &loaded.instance;
    let audit = audit_assumptions(inst);
    let mut report = SolveReport {
        input: path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        model: model_name(model),
        method: "",
        audit: (&audit).into(),
        balance: inst.base.balance().into(),
        objective: f64::NAN,
        plan: Vec::new(),
        iterations: 0,
        interior: None,
        system_residual: None,
        certificate: None,
        duals: None,
        neumann: None,
        bounds: None,
        sensitivity: None,
        timing: None,
    };

    let start = Instant::now();
    let plan = match model {
        ModelArg::Linear => {
            let sol = solve_linear(&inst.base)?;
            let (n, l) = inst.shape();
            report.method = "transportation-simplex";
            report.iterations = sol.pivots;
            report.duals = Some(LinearDuals {
                dual_objective: sol.basis.dual_objective(&inst.base.supply, &inst.base.capacity),
                min_reduced_cost: sol.basis.reduced_costs(&inst.base.linear_cost).min(),
                u: sol.basis.u,
                v: sol.basis.v,
                basis_size: sol.basis.cells.len(),
                basis_cells: sol.basis.cells.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
                positive_cells: sol.plan.positive_cells(0.0),
                vertex_bound: n + l - 1,
            });
            sol.plan
        }
        ModelArg::Congestion => {
            let opts = CongestionOptions {
                tol: args.tol,
                max_iter: args.max_iter,
                ..Default::default()
            };
            let sol = solve_congestion_with(&inst.base, &opts)?;
            report.method = "qp";
            report.iterations = sol.iterations;
            report.certificate = Some((&sol.certificate).into());
            sol.plan
        }
        ModelArg::Penalized => solve_penalized_method(inst, args, &mut report)?,
    };
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;

    report.objective = evaluate_cost(Objective::from_kind(model_kind(model), inst), &plan.pi)?;
    report.plan = rows(&plan.pi);

    if args.bounds {
        report.bounds = Some(bounds_report(inst, &plan)?);
    }
    if let Some(order) = args.sensitivity {
        report.sensitivity = Some(sensitivity_report(inst, &plan, order, args.fd_check)?);
    }
    if !args.no_timing {
        report.timing = Some(Timing {
            solve_ms,
            total_ms: total.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(Solved { report, plan: plan.pi })
}

fn solve_penalized_method(
    inst: &PenalizedInstance,
    args: &SolveArgs,
    report: &mut SolveReport,
) -> Result<TransportPlan, CliError> {
    let residual = |plan: &TransportPlan| -> Result<f64, CliError> {
        let sys = assemble(inst)?;
        Ok(sys
            .residual(plan.pi.as_slice())
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs())))
    };
    let plan = match args.method {
        None => {
            let (sol, route) = solve_penalized(inst, args.tol)?;
            report.method = match route {
                PenalizedRoute::Direct => "direct",
                PenalizedRoute::Qp => "qp",
            };
            report.iterations = sol.iterations;
            report.certificate = Some((&sol.certificate).into());
            report.interior = Some(route == PenalizedRoute::Direct);
            sol.plan
        }
        Some(MethodArg::Qp) => {
            let sol = solve_penalized_qp_with(inst, args.tol, args.max_iter)?;
            report.iterations = sol.iterations;
            report.certificate = Some((&sol.certificate).into());
            report.interior = Some(sol.plan.is_interior(congested_ot_core::instance::INTERIOR_TOL));
            sol.plan
        }
        Some(MethodArg::Direct) => {
            let sol = solve_direct(inst)?;
            require_interior(&sol.plan, sol.interior, "the direct solve")?;
            report.interior = Some(true);
            report.system_residual = Some(sol.residual);
            sol.plan
        }
        Some(MethodArg::Neumann) => {
            let mut opts = NeumannOptions {
                eps_target: args.eps_target,
                ..Default::default()
            };
            if let Some(m) = args.max_iter {
                opts.max_iter = m;
            }
            let sol = neumann_solve(inst, &opts)?;
            require_interior(&sol.plan, sol.interior, "the Neumann series")?;
            report.iterations = sol.trace.n_eps;
            report.interior = Some(true);
            report.neumann = Some((&sol.trace).into());
            report.system_residual = Some(residual(&sol.plan)?);
            sol.plan
        }
        Some(MethodArg::Smw) => {
            let smw = sherman_morrison_inverse(inst)?;
            let (n, l) = inst.shape();
            let pi = Matrix::from_vec(n, l, smw.inverse.mul_vec(&inst.rhs())).expect("shape");
            let interior = pi
                .as_slice()
                .iter()
                .all(|&v| v > congested_ot_core::instance::INTERIOR_TOL);
            let objective = evaluate_cost(Objective::Penalized(inst), &pi)?;
            let plan = TransportPlan { pi, objective };
            require_interior(&plan, interior, "the Sherman-Morrison inverse")?;
            report.iterations = smw.updates_applied;
            report.interior = Some(true);
            report.system_residual = Some(residual(&plan)?);
            plan
        }
        Some(MethodArg::ClosedForm) => {
            let plan = closed_form_gated(inst, closed_form_plan(inst)?)?;
            report.interior = Some(true);
            report.system_residual = Some(residual(&plan)?);
            plan
        }
    };
    if report.method.is_empty() {
        report.method = method_name(args.method.expect("explicit method"));
    }
    Ok(plan)
}

fn bounds_report(inst: &PenalizedInstance, plan: &TransportPlan) -> Result<BoundsReport, CliError> {
    match entry_bounds(inst) {
        Ok(b) => {
            let c = b.containment(&dense_inverse(inst)?);
            Ok(BoundsReport::from_parts(&b, &c, plan.pi.max_abs()))
        }
        Err(Error::Gate { assumption, detail }) => Ok(BoundsReport::inapplicable(format!(
            "{assumption} does not hold: {detail}"
        ))),
        Err(e) => Err(e.into()),
    }
}

fn sensitivity_report(
    inst: &PenalizedInstance,
    plan: &TransportPlan,
    order: OrderArg,
    fd_check: bool,
) -> Result<SensitivityReport, CliError> {
    let (core_order, name) = match order {
        OrderArg::Exact => (SensitivityOrder::Exact, "exact"),
        OrderArg::Zero => (SensitivityOrder::Order0, "0"),
        OrderArg::One => (SensitivityOrder::Order1, "1"),
    };
    let s = sensitivity_truncated(inst, plan, core_order)?;
    let sys = assemble(inst)?;
    let (n, l) = inst.shape();
    let mut report = SensitivityReport::new(name, &s, s.residuals(&sys, plan), l);
    if core_order == SensitivityOrder::Order1 {
        report.order1_remainder_bound = order1_remainder_bound(inst);
    }
    if fd_check {
        let (mut gap_c, mut gap_a) = (0.0f64, 0.0f64);
        for q in 0..n * l {
            let fd_c = finite_difference_check(inst, Parameter::C(q / l, q % l), 1e-5)?;
            let fd_a = finite_difference_check(inst, Parameter::A(q / l, q % l), 1e-5)?;
            for p in 0..n * l {
                gap_c = gap_c.max((fd_c.as_slice()[p] - s.wrt_c[(p, q)]).abs());
                gap_a = gap_a.max((fd_a.as_slice()[p] - s.wrt_a[(p, q)]).abs());
            }
        }
        report.fd_max_gap_c = Some(gap_c);
        report.fd_max_gap_a = Some(gap_a);
    }
    Ok(report)
}

fn render(solved: &Solved, format: FormatArg) -> Result<String, CliError> {
    match format {
        FormatArg::Json => json(&solved.report),
        FormatArg::Csv => plan_csv(&solved.plan).map_err(|e| CliError::new(ExitKind::Validation, e.to_string())),
    }
}

fn write_outputs(dir: &Path, input: &Path, solved: &Solved) -> Result<Vec<PathBuf>, CliError> {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let io =
        |p: &Path, e: std::io::Error| CliError::new(ExitKind::Validation, format!("cannot write {}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let csv_path = dir.join(format!("{stem}.csv"));
    std::fs::write(&json_path, render(solved, FormatArg::Json)?).map_err(|e| io(&json_path, e))?;
    std::fs::write(&csv_path, render(solved, FormatArg::Csv)?).map_err(|e| io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}

/// Solves every input, `jobs` at a time. Reports come back in input order.
pub fn solve(args: &SolveArgs, verbose: u8) -> Result<String, CliError> {
    let jobs = usize::from(args.jobs).min(args.inputs.len()).max(1);
    let mut results: Vec<Option<Result<Solved, CliError>>> = (0..args.inputs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    (w..args.inputs.len())
                        .step_by(jobs)
                        .map(|k| {
                            (
                                k,
                                solve_one(&args.inputs[k], args)
                                    .map_err(|e| e.context(&args.inputs[k].display().to_string())),
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for c in chunks {
            for (k, r) in c.join().expect("worker panicked") {
                results[k] = Some(r);
            }
        }
    });

    let mut first_err = None;
    let mut out = String::new();
    for (input, r) in args.inputs.iter().zip(results) {
        match r.expect("every input handled") {
            Ok(solved) => match &args.output_dir {
                Some(dir) => {
                    for p in write_outputs(dir, input, &solved)? {
                        if verbose > 0 {
                            eprintln!("wrote {}", p.display());
                        }
                    }
                }
                None => out.push_str(&render(&solved, args.format)?),
            },
            Err(e) => {
                if args.inputs.len() > 1 {
                    eprintln!("error: {e}");
                }
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Serialize)]
struct InverseReport {
    method: &'static str,
    size: usize,
    inverse: Vec<Vec<f64>>,
}

pub fn inverse(args: &InverseArgs) -> Result<String, CliError> {
    let inst = load(&args.input)?.instance;
    let (name, inv) = match args.method {
        InverseMethodArg::Smw => ("smw", sherman_morrison_inverse(&inst)?.inverse),
        InverseMethodArg::Dense => ("dense", dense_inverse(&inst)?),
        InverseMethodArg::ClosedForm => ("closed-form", closed_form_gated(&inst, closed_form_inverse(&inst)?)?),
    };
    match args.format {
        FormatArg::Json => json(&InverseReport {
            method: name,
            size: inv.rows(),
            inverse: rows(&inv),
        }),
        FormatArg::Csv => csv_text(&inv),
    }
}

#[derive(Serialize)]
struct BoundsOutput {
    input: String,
    bounds: BoundsReport,
}

/// Entry bounds; refuses with the gate status when uniform weights do not hold.
pub fn bounds(input: &Path) -> Result<String, CliError> {
    let inst = load(input)?.instance;
    let b = entry_bounds(&inst)?;
    let c = b.containment(&dense_inverse(&inst)?);
    let direct = solve_direct(&inst)?;
    json(&BoundsOutput {
        input: display_name(input),
        bounds: BoundsReport::from_parts(&b, &c, direct.plan.pi.max_abs()),
    })
}

#[derive(Serialize)]
struct SensitivityOutput {
    input: String,
    plan: Vec<Vec<f64>>,
    sensitivity: SensitivityReport,
}

pub fn sensitivity(args: &SensitivityArgs) -> Result<String, CliError> {
    let inst = load(&args.input)?.instance;
    let (sol, _) = solve_penalized(&inst, args.tol)?;
    let report = sensitivity_report(&inst, &sol.plan, args.order, args.fd_check)?;
    json(&SensitivityOutput {
        input: display_name(&args.input),
        plan: rows(&sol.plan.pi),
        sensitivity: report,
    })
}

#[derive(Serialize)]
struct AssumptionsOutput {
    input: String,
    audit: AuditReport,
    balance: BalanceReport,
}

pub fn check_assumptions(input: &Path) -> Result<String, CliError> {
    let inst = load(input)?.instance;
    json(&AssumptionsOutput {
        input: display_name(input),
        audit: (&audit_assumptions(&inst)).into(),
        balance: inst.base.balance().into(),
    })
}

#[derive(Serialize)]
struct OracleOutput {
    input: String,
    kind: &'static str,
    model: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    objective: Option<f64>,
    plan: Option<Vec<Vec<f64>>>,
}

pub fn oracle(args: &OracleArgs) -> Result<String, CliError> {
    let loaded = load(&args.input)?;
    let inst = &loaded.instance;
    let out = match args.resolved_kind() {
        OracleKind::Enumerate => {
            let model = args.model.unwrap_or_else(|| infer_model(&loaded));
            let r = enumerate_integer_plans(inst, model_kind(model), args.cap)?;
            OracleOutput {
                input: display_name(&args.input),
                kind: "enumerate",
                model: model_name(model),
                count: Some(r.count),
                iterations: None,
                residual: None,
                objective: r.best.as_ref().map(|b| b.objective),
                plan: r.best.as_ref().map(|b| rows(&b.pi)),
            }
        }
        OracleKind::ProjectedGradient => {
            if args.model.is_some_and(|m| m != ModelArg::Penalized) {
                return Err(CliError::new(
                    ExitKind::Validation,
                    "the projected-gradient oracle solves the penalized model only",
                ));
            }
            let r = projected_gradient_reference(inst, args.tol, args.max_iter)?;
            OracleOutput {
                input: display_name(&args.input),
                kind: "projected-gradient",
                model: "penalized",
                count: None,
                iterations: Some(r.iterations),
                residual: Some(r.residual),
                objective: Some(r.plan.objective),
                plan: Some(rows(&r.plan.pi)),
            }
        }
    };
    json(&out)
}

fn display_name(p: &Path) -> String {
    p.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Serialize)]
struct SingularSystemOutput {
    r: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lambda_diag: Vec<f64>,
    row_dependency_residual: f64,
    rhs_dependency_residual: f64,
    determinant: f64,
    /// `|det R| / Π‖R_k‖₂`; zero up to roundoff for a singular matrix.
    scaled_determinant: f64,
}

#[derive(Serialize)]
struct BorderedHessianOutput {
    block: Vec<Vec<f64>>,
    row_dependency_residual: f64,
    determinant: f64,
    scaled_determinant: f64,
}

#[derive(Serialize)]
struct AnalyzeOutput {
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    singular_system: Option<SingularSystemOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bordered_hessian: Option<BorderedHessianOutput>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    let loaded = load(&args.input)?;
    let inst = &loaded.instance.base;
    let both = !args.singular_system && !args.bordered_hessian;
    let singular_system = if both || args.singular_system {
        let sys = build_singular_system(inst)?;
        let det = sys.determinant();
        Some(SingularSystemOutput {
            r: rows(&sys.r),
            rhs: sys.rhs.clone(),
            lambda_diag: sys.lambda_diag.clone(),
            row_dependency_residual: sys.row_dependency_residual(),
            rhs_dependency_residual: sys.rhs_dependency_residual(),
            determinant: det.value,
            scaled_determinant: det.hadamard_ratio,
        })
    } else {
        None
    };
    let bordered_hessian = if both || args.bordered_hessian {
        let h = build_bordered_hessian(inst)?;
        let det = h.determinant();
        Some(BorderedHessianOutput {
            block: rows(&h.block),
            row_dependency_residual: h.row_dependency_residual(),
            determinant: det.value,
            scaled_determinant: det.hadamard_ratio,
        })
    } else {
        None
    };
    json(&AnalyzeOutput {
        input: display_name(&args.input),
        singular_system,
        bordered_hessian,
    })
}
