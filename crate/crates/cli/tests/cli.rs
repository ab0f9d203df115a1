use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stieltjes"))
        .args(args)
        .current_dir(configs())
        .env_remove("STIELTJES_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value of `column` in the row whose first field parses to `x`.
fn lookup(csv: &str, x: f64, column: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == column).unwrap();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f[0].parse::<f64>().unwrap() == x {
            return f[col].parse().unwrap();
        }
    }
    panic!("no row for x = {x} in\n{csv}");
}

#[test]
fn monomial_on_unit_jump_identity() {
    let o = run(&["monomial", "--derivator", "ej2.json", "--x0", "0", "--n", "2", "--grid", "0:1:5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("x,value,lower_bound,upper_bound,status\n"));
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(lookup(&csv, 0.5, "value"), 1.25);
    // x^2 + 2x
    assert_eq!(lookup(&csv, 1.0, "value"), 3.0);
}

#[test]
fn exponential_on_identity() {
    let o = run(&["exp", "--derivator", "id.json", "--lambda", "1", "--x0", "0", "--grid", "0:1:2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = lookup(&stdout(&o), 1.0, "value");
    assert!((v - std::f64::consts::E).abs() < 1e-12, "{v}");
}

#[test]
fn complex_rate_exponential() {
    // exp(i g) on the identity is cos + i sin
    let o = run(&["exp", "--derivator", "id.json", "--lambda", "0", "--lambda-im", "1", "--grid", "0:2:3"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!((lookup(&csv, 2.0, "value") - 2f64.cos()).abs() < 1e-12);
    assert!((lookup(&csv, 2.0, "value_im") - 2f64.sin()).abs() < 1e-12);
}

#[test]
fn verify_decomposition_on_random_corpus() {
    let o = run(&["verify", "--suite", "decomposition", "--derivator", "random", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("decomposition,7,true,"), "{row}");
    assert!(lookup_suite_deviation(row) <= 1e-6);
}

fn lookup_suite_deviation(row: &str) -> f64 {
    row.split(',').nth(3).unwrap().parse().unwrap()
}

#[test]
fn seed_variable_overrides_flag() {
    let o = Command::new(env!("CARGO_BIN_EXE_stieltjes"))
        .args(["verify", "--suite", "bounds", "--seed", "7"])
        .env("STIELTJES_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("bounds,11,true,"));
}

#[test]
fn failing_suite_exits_3_with_reproduction_handle() {
    // no jumps: the truncated derivators never improve
    let o = run(&["verify", "--suite", "gm-convergence", "--derivator", "id.json", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("SuiteFailed") && err.contains("seed 5") && err.contains("id.json"), "{err}");
    assert!(stdout(&o).contains("gm-convergence,5,false,"));
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["monomial", "--derivator", "ej2.json", "--n", "2", "--grid", "0:1:1"][..],
        &["monomial", "--derivator", "ej2.json", "--n", "2", "--grid", "0:20:3"],
        &["monomial", "--derivator", "missing.json", "--n", "2", "--grid", "0:1:3"],
        &["exp", "--derivator", "id.json", "--lambda", "1", "--grid", "0:1:3", "--tol", "0"],
        &["verify", "--suite", "nonsense"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
    }
    let o = run(&["monomial", "--derivator", "ej2.json", "--n", "2", "--grid", "0:20:3"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("OutOfWindow"));
}

#[test]
fn output_is_deterministic() {
    let args = ["solve", "--problem", "oscillator.json", "--grid", "-1:2:7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let csv = stdout(&a);
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[4], "ok", "{line}");
        assert!(f[2].parse::<f64>().unwrap() <= 1e-8, "{line}");
    }
    let r1 = run(&["eval", "--derivator", "random:3/4", "--grid", "-5:5:11"]);
    let r2 = run(&["eval", "--derivator", "random:3/4", "--grid", "-5:5:11"]);
    assert_eq!(r1.stdout, r2.stdout);
}

#[test]
fn json_output_and_out_file() {
    let dir = std::env::temp_dir().join(format!("stieltjes-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("series.json");
    let o = run(&[
        "series",
        "--derivator",
        "ej2.json",
        "--series",
        "geometric_series.json",
        "--grid",
        "-0.5:0.5:3",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    // 1/(1-x) + 1/(1-x)^2 at 1/2, 2/3 at -1/2
    assert!((rows[2]["value"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert!((rows[0]["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
    std::fs::remove_dir_all(&dir).unwrap();
}
