use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use congested_ot::input::{parse_instance, InstanceFile};
use congested_ot_core::penalized::dense_inverse;
use congested_ot_core::{evaluate_cost, fixtures, Matrix, ModelKind, Objective, PenalizedInstance, ProblemInstance};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_congested-ot"))
        .args(args)
        .env_remove("CONGESTED_OT_MAX_NL")
        .output()
        .unwrap()
}

fn run_path(args: &[&str], path: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.insert(1, path.to_str().unwrap());
    run(&all)
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn parse_csv(text: &[u8]) -> Vec<Vec<f64>> {
    String::from_utf8_lossy(text)
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn to_matrix(v: &Value) -> Matrix {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Matrix::from_rows(&rows).unwrap()
}

fn write_instance(dir: &Path, name: &str, inst: &PenalizedInstance, penalized: bool) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(
        &path,
        serde_json::to_string(&InstanceFile::from_instance(inst, penalized)).unwrap(),
    )
    .unwrap();
    path
}

#[test]
fn fixture_files_match_library_instances() {
    let cases: [(&str, PenalizedInstance, bool); 6] = [
        (
            "example-3-1",
            PenalizedInstance::unpenalized(fixtures::example_3_1()),
            false,
        ),
        (
            "example-3-2",
            PenalizedInstance::unpenalized(fixtures::example_3_2()),
            false,
        ),
        (
            "appendix-a-linear",
            PenalizedInstance::unpenalized(fixtures::appendix_a_linear()),
            false,
        ),
        (
            "appendix-a-quadratic",
            PenalizedInstance::unpenalized(fixtures::appendix_a_quadratic()),
            false,
        ),
        ("appendix-b", fixtures::appendix_b(), true),
        ("appendix-c", fixtures::appendix_c(), true),
    ];
    for (name, want, penalized) in cases {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let got = parse_instance(&text, usize::MAX).unwrap();
        assert_eq!(got.penalized, penalized, "{name}");
        assert_eq!(got.instance, want, "{name}");
    }
}

#[test]
fn example_3_1_plan() {
    let out = run_path(
        &["solve", "--model", "congestion", "--format", "csv"],
        &fixture("example-3-1"),
    );
    assert!(out.status.success());
    let plan = parse_csv(&out.stdout);
    let want = [[4.0, 6.0], [2.0, 8.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((plan[i][j] - want[i][j]).abs() <= 1e-7);
        }
    }
}

#[test]
fn appendix_c_direct_plan() {
    let out = run_path(
        &["solve", "--model", "penalized", "--method", "direct", "--format", "csv"],
        &fixture("appendix-c"),
    );
    assert!(out.status.success());
    let plan = parse_csv(&out.stdout);
    let want = fixtures::appendix_c_plan();
    for i in 0..3 {
        for j in 0..2 {
            assert!((plan[i][j] - want[(i, j)]).abs() <= 1e-3);
        }
    }
}

#[test]
fn every_penalized_method_agrees_on_appendix_c() {
    let reference = to_matrix(&stdout_json(&run_path(&["solve", "--no-timing"], &fixture("appendix-c")))["plan"]);
    for method in ["direct", "neumann", "smw", "qp"] {
        let r = stdout_json(&run_path(
            &["solve", "--method", method, "--no-timing"],
            &fixture("appendix-c"),
        ));
        assert_eq!(r["method"], method);
        assert!(to_matrix(&r["plan"]).max_abs_diff(&reference) <= 1e-6, "{method}");
    }
}

#[test]
fn gate_violation_names_assumption_4() {
    let dir = tempfile::tempdir().unwrap();
    let base = ProblemInstance::congestion(
        Matrix::zeros(2, 2),
        Matrix::filled(2, 2, 1.0),
        vec![1.0; 2],
        vec![1.0; 2],
    );
    let path = write_instance(
        dir.path(),
        "gate.json",
        &PenalizedInstance::new(base, vec![1.0; 2], vec![1.0; 2]),
        true,
    );
    let out = run_path(&["solve", "--model", "penalized", "--method", "neumann"], &path);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Assumption 4"));
}

#[test]
fn closed_form_refusal_and_success() {
    let out = run_path(&["inverse", "--method", "closed-form"], &fixture("appendix-c"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Assumption 5"));

    let r = stdout_json(&run_path(
        &["inverse", "--method", "closed-form"],
        &fixture("appendix-b"),
    ));
    let dense = dense_inverse(&fixtures::appendix_b()).unwrap();
    assert!(to_matrix(&r["inverse"]).max_abs_diff(&dense) <= 1e-10);
}

#[test]
fn validation_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"N":2,"L":2,"d":[[0,0],[0,0]],"c":[[1,1],[1,1]],"a":[[1,1],[1,1]],"mu":[1,1,1],"nu":[1,2]}"#,
    )
    .unwrap();
    let out = run_path(&["solve"], &bad);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));

    assert_eq!(run(&["solve", "--frobnicate", "x.json"]).status.code(), Some(1));
    assert_eq!(
        run_path(
            &["solve", "--model", "linear", "--method", "smw"],
            &fixture("appendix-a-linear")
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        run_path(&["solve", "--bounds"], &fixture("example-3-1")).status.code(),
        Some(1)
    );
    assert_eq!(
        run_path(&["solve"], Path::new("/nonexistent/instance.json"))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn non_convergence_exits_2() {
    let out = run_path(
        &["solve", "--method", "neumann", "--max-iter", "1"],
        &fixture("appendix-c"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn size_cap_from_environment() {
    let path = fixture("appendix-c");
    let with_cap = |cap: &str| {
        Command::new(env!("CARGO_BIN_EXE_congested-ot"))
            .args(["solve", path.to_str().unwrap()])
            .env("CONGESTED_OT_MAX_NL", cap)
            .output()
            .unwrap()
    };
    assert_eq!(with_cap("5").status.code(), Some(1));
    assert!(with_cap("6").status.success());
    assert_eq!(with_cap("lots").status.code(), Some(1));
}

#[test]
fn linear_report_is_a_vertex_with_duals() {
    let r = stdout_json(&run_path(&["solve", "--no-timing"], &fixture("appendix-a-linear")));
    assert_eq!(r["model"], "linear");
    let duals = &r["duals"];
    assert!(duals["positive_cells"].as_u64().unwrap() <= duals["vertex_bound"].as_u64().unwrap());
    assert_eq!(duals["vertex_bound"], 7);
    assert!(duals["min_reduced_cost"].as_f64().unwrap() >= -1e-9);
    let c = fixtures::appendix_a_linear();
    let fixed = c.total_fixed_cost();
    assert_eq!(
        r["objective"].as_f64().unwrap(),
        fixed + 50.0 * (6.0 + 7.0 + 6.0 + 17.0)
    );
}

#[test]
fn reported_objective_round_trips() {
    for (name, model) in [
        ("example-3-1", ModelKind::Congestion),
        ("example-3-2", ModelKind::Congestion),
        ("appendix-a-linear", ModelKind::Linear),
        ("appendix-a-quadratic", ModelKind::Congestion),
        ("appendix-b", ModelKind::Penalized),
        ("appendix-c", ModelKind::Penalized),
    ] {
        let r = stdout_json(&run_path(&["solve", "--no-timing"], &fixture(name)));
        let inst = parse_instance(&std::fs::read_to_string(fixture(name)).unwrap(), usize::MAX)
            .unwrap()
            .instance;
        let value = evaluate_cost(Objective::from_kind(model, &inst), &to_matrix(&r["plan"])).unwrap();
        let reported = r["objective"].as_f64().unwrap();
        assert!((value - reported).abs() <= 1e-10 * reported.abs().max(1.0), "{name}");
        assert_eq!(r["audit"]["assumptions"].as_array().unwrap().len(), 8);
        assert!(r["method"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn reports_are_deterministic_without_timing() {
    let args = ["solve", "--no-timing", "--sensitivity", "1"];
    let a = run_path(&args, &fixture("appendix-c"));
    let b = run_path(&args, &fixture("appendix-c"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains("timing"));
    let timed = stdout_json(&run_path(&["solve"], &fixture("appendix-c")));
    assert!(timed["timing"]["solve_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exact_sensitivity_residual_and_fd() {
    let r = stdout_json(&run_path(
        &["solve", "--sensitivity", "exact", "--fd-check", "--no-timing"],
        &fixture("appendix-c"),
    ));
    let s = &r["sensitivity"];
    assert!(s["residual_c"].as_f64().unwrap() <= 1e-8);
    assert!(s["fd_max_gap_c"].as_f64().unwrap() <= 1e-4);
    assert!(s["fd_max_gap_a"].as_f64().unwrap() <= 1e-4);

    let r = stdout_json(&run_path(&["sensitivity", "--order", "1"], &fixture("appendix-c")));
    let signs = &r["sensitivity"]["signs"];
    for key in [
        "own_negative",
        "same_type_positive",
        "same_school_positive",
        "unrelated_zero",
    ] {
        assert_eq!(signs[key], true, "{key}");
    }
    assert!(r["sensitivity"]["order1_remainder_bound"].as_f64().is_some());
}

#[test]
fn bounds_report_matches_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let base = ProblemInstance::congestion(
        Matrix::filled(2, 3, 1.0),
        Matrix::filled(2, 3, 40.0),
        vec![9.0, 6.0],
        vec![5.0; 3],
    );
    let inst = PenalizedInstance::new(base, vec![0.5; 2], vec![0.5; 3]);
    let path = write_instance(dir.path(), "uniform.json", &inst, true);
    let r = stdout_json(&run_path(&["solve", "--bounds", "--no-timing"], &path));
    let v = &r["bounds"]["values"];
    let inv = dense_inverse(&inst).unwrap();
    assert_eq!(v["min_inverse_entry"].as_f64().unwrap(), inv.min());
    assert_eq!(v["max_inverse_entry"].as_f64().unwrap(), inv.max());
    let (c1, c2) = (v["c1"].as_f64().unwrap(), v["c2"].as_f64().unwrap());
    assert_eq!(v["c1_le_min_entry"].as_bool().unwrap(), c1 <= inv.min());
    assert_eq!(v["max_entry_le_c2"].as_bool().unwrap(), inv.max() <= c2);

    let standalone = stdout_json(&run_path(&["bounds"], &path));
    assert_eq!(standalone["bounds"]["values"]["c1"], v["c1"]);

    let r = stdout_json(&run_path(&["solve", "--bounds", "--no-timing"], &fixture("appendix-c")));
    assert_eq!(r["bounds"]["applicable"], false);
    assert_eq!(run_path(&["bounds"], &fixture("appendix-c")).status.code(), Some(3));
}

#[test]
fn batch_runs_match_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["example-3-1", "example-3-2", "appendix-a-quadratic", "appendix-c"];
    let mut args: Vec<String> = vec![
        "solve".into(),
        "--no-timing".into(),
        "--jobs".into(),
        "3".into(),
        "--output-dir".into(),
    ];
    args.push(dir.path().to_str().unwrap().into());
    args.extend(names.iter().map(|n| fixture(n).to_str().unwrap().to_string()));
    let out = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in names {
        let single = run_path(&["solve", "--no-timing"], &fixture(name));
        assert_eq!(
            std::fs::read(dir.path().join(format!("{name}.json"))).unwrap(),
            single.stdout,
            "{name}"
        );
        let csv = run_path(&["solve", "--format", "csv"], &fixture(name));
        assert_eq!(
            std::fs::read(dir.path().join(format!("{name}.csv"))).unwrap(),
            csv.stdout,
            "{name}"
        );
    }
    // several inputs without a destination are rejected
    assert_eq!(
        run(&[
            "solve",
            fixture("example-3-1").to_str().unwrap(),
            fixture("example-3-2").to_str().unwrap()
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn check_assumptions_on_appendix_b() {
    let r = stdout_json(&run_path(&["check-assumptions"], &fixture("appendix-b")));
    let flags: Vec<bool> = r["audit"]["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["holds"].as_bool().unwrap())
        .collect();
    assert!(flags[3] && flags[4] && flags[5]);
    let r = stdout_json(&run_path(&["check-assumptions"], &fixture("appendix-a-quadratic")));
    assert_eq!(r["audit"]["assumptions"][0]["holds"], true);
    assert_eq!(r["audit"]["assumptions"][1]["holds"], true);
}

#[test]
fn oracles() {
    let r = stdout_json(&run_path(&["oracle"], &fixture("example-3-2")));
    assert_eq!(r["count"], 6);
    assert_eq!(
        to_matrix(&r["plan"]),
        Matrix::from_rows(&[[0.0, 5.0], [5.0, 0.0]]).unwrap()
    );
    assert_eq!(run_path(&["oracle"], &fixture("example-3-1")).status.code(), Some(1));

    let r = stdout_json(&run_path(
        &["oracle", "--kind", "projected-gradient"],
        &fixture("appendix-c"),
    ));
    assert!(to_matrix(&r["plan"]).max_abs_diff(&fixtures::appendix_c_plan()) <= 1e-3);
}

#[test]
fn analyze_singular_system() {
    let r = stdout_json(&run_path(&["analyze", "--singular-system"], &fixture("example-3-1")));
    let s = &r["singular_system"];
    assert!(r.get("bordered_hessian").is_none());
    assert!(s["row_dependency_residual"].as_f64().unwrap() <= 1e-12);
    assert!(s["rhs_dependency_residual"].as_f64().unwrap() <= 1e-12);
    assert!(s["scaled_determinant"].as_f64().unwrap().abs() <= 1e-8);
    assert_eq!(s["r"].as_array().unwrap().len(), 4);

    let r = stdout_json(&run_path(&["analyze"], &fixture("appendix-a-quadratic")));
    assert!(r["bordered_hessian"]["scaled_determinant"].as_f64().unwrap().abs() <= 1e-8);
    assert!(r["singular_system"].is_object());
    // a = 0 has no multiplier system
    assert_eq!(
        run_path(&["analyze"], &fixture("appendix-a-linear")).status.code(),
        Some(1)
    );
}

#[test]
fn linear_basis_is_a_spanning_tree() {
    let r = stdout_json(&run_path(&["solve", "--no-timing"], &fixture("appendix-a-linear")));
    assert_eq!(r["duals"]["basis_size"], 7);
    assert_eq!(r["duals"]["basis_cells"].as_array().unwrap().len(), 7);
}

#[test]
fn oracle_flag_aliases() {
    let a = run_path(&["oracle", "--enumerate"], &fixture("example-3-2"));
    let b = run_path(&["oracle", "--kind", "enumerate"], &fixture("example-3-2"));
    assert_eq!(a.stdout, b.stdout);
    let r = stdout_json(&run_path(&["oracle", "--pgd"], &fixture("appendix-c")));
    assert_eq!(r["kind"], "projected-gradient");
    assert_eq!(
        run_path(&["oracle", "--pgd", "--enumerate"], &fixture("appendix-c"))
            .status
            .code(),
        Some(1)
    );
}
