use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxent"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn validate_passes() {
    let out = run(&["validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5);
    assert!(!text.contains("FAIL"));
}

#[test]
fn path_writes_141_records_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("path.json");
    let csv = dir.path().join("path.csv");
    let demo = fixture("demo.csv");
    let out = run(&[
        "path",
        "--penalty",
        "elastic-net",
        "--alpha",
        "0.95",
        "--input",
        demo.to_str().unwrap(),
        "--output-json",
        json.to_str().unwrap(),
        "--output-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert_eq!(value["penalty"]["kind"], "elastic_net");
    let records = value["records"].as_array().unwrap();
    assert_eq!(records.len(), 141);
    for key in ["t", "w", "iterations", "residual", "nonzero_count"] {
        assert!(records[5].get(key).is_some(), "missing {key}");
    }

    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("t,iterations,residual,nonzero_count"));
    assert_eq!(lines.count(), 141);
}

#[test]
fn path_json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let demo = fixture("demo.csv");
    let groups = fixture("groups.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let json = dir.path().join(format!("run{k}.json"));
        let out = run(&[
            "path",
            "--penalty",
            "group-lasso",
            "--groups",
            groups.to_str().unwrap(),
            "--input",
            demo.to_str().unwrap(),
            "--output-json",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        outputs.push(std::fs::read(&json).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn t_max_only_prints_a_number() {
    let demo = fixture("demo.csv");
    let out = run(&["fit", "--t-max-only", "--penalty", "linf", "--input", demo.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let t: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(t > 0.0 && t.is_finite());
}

#[test]
fn fit_reports_solution() {
    let demo = fixture("demo.csv");
    let out = run(&[
        "fit",
        "--penalty",
        "elastic-net",
        "--alpha",
        "0.5",
        "--t-fraction",
        "0.5",
        "--input",
        demo.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["converged"], true);
    assert_eq!(value["solver"], "npdhg_smooth");
    assert_eq!(value["w"].as_array().unwrap().len(), 5);
}

#[test]
fn synth_then_fit_from_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("synth.json");
    let out = run(&["synth", "--n", "40", "--m", "4", "--seed", "3", "--output", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = run(&["fit", "--problem", file.to_str().unwrap(), "--penalty", "linf", "--t-fraction", "0.4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn small_benchmark_runs() {
    let out = run(&[
        "bench",
        "--synth-n",
        "200",
        "--synth-m",
        "6",
        "--synth-ratio",
        "5",
        "--runs",
        "1",
        "--solvers",
        "npdhg,structmaxent2",
        "--penalties",
        "elastic-net:0.9,linf",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("N/A"), "structmaxent2 on linf should be unsupported:\n{table}");
}

#[test]
fn input_errors_exit_with_2() {
    let demo = fixture("demo.csv");
    let demo = demo.to_str().unwrap();
    assert_eq!(code(&run(&["fit", "--no-such-flag"])), 2);
    assert_eq!(code(&run(&["fit", "--penalty", "linf", "--input", "/does/not/exist.csv"])), 2);
    assert_eq!(code(&run(&["fit", "--penalty", "linf", "--alpha", "0.5", "--input", demo])), 2);
    assert_eq!(code(&run(&["fit", "--penalty", "elastic-net", "--alpha", "1.5", "--input", demo])), 2);
    assert_eq!(code(&run(&["fit", "--penalty", "group-lasso", "--input", demo])), 2);
    assert_eq!(code(&run(&["fit", "--input", demo])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "cell_id,ecoregion,fire,f_1\na,r,1,0.5\nb,r,yes,0.1\n").unwrap();
    let out = run(&["fit", "--penalty", "linf", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn non_convergence_exits_with_1() {
    let demo = fixture("demo.csv");
    let out = run(&[
        "fit",
        "--penalty",
        "elastic-net",
        "--t-fraction",
        "0.05",
        "--min-iters",
        "0",
        "--max-iters",
        "2",
        "--input",
        demo.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}
