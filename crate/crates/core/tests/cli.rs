use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hardy_radial::stepper::{read_csv, State};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hardy-radial"));
    c.env_remove("HARDY_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn exponents_at_three_sixteenths() {
    let out = run(&["exponents", "--mu", "0.1875", "--p", "3", "--n", "3", "--r", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["exponents"]["beta_minus"], 0.25);
    assert_eq!(v["exponents"]["beta_plus"], 0.75);
    assert_eq!(v["regime"], "Superlinear");
}

#[test]
fn domain_error_exits_one_with_error_json() {
    let out = run(&["solve", "--mu", "0.125", "--p", "3", "--u0", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NonPositive");
    assert!(out.stdout.is_empty());

    let out = run(&["threshold", "--mu", "0.125", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "WrongRegime");
}

#[test]
fn usage_error_exits_two_and_names_the_flag() {
    let out = run(&["solve", "--mu", "0.125", "--p", "3", "--u0", "1", "--frobnicate", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
    let out = run(&["solve", "--mu", "0.125", "--p", "3", "--u0", "abc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--u0"));
}

#[test]
fn threshold_reports_bracket() {
    let out = run(&[
        "threshold",
        "--mu",
        "0.125",
        "--p",
        "3",
        "--n",
        "3",
        "--r",
        "1",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let (lo, hi) = (
        v["threshold"]["bracket"][0].as_f64().unwrap(),
        v["threshold"]["bracket"][1].as_f64().unwrap(),
    );
    let u = v["threshold"]["u_star"].as_f64().unwrap();
    assert!(lo < u && u < hi && hi - lo <= 1e-6 * hi);
}

fn solve_into(dir: &Path) -> Output {
    run(&[
        "solve",
        "--mu",
        "0.125",
        "--p",
        "3",
        "--u0",
        "1.5",
        "--output",
        "shot",
        "--out-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn identical_invocations_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (oa, ob) = (solve_into(a.path()), solve_into(b.path()));
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(oa.stdout.len(), ob.stdout.len());
    for name in ["shot.csv", "shot.json"] {
        let (x, y) = (
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
        );
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }

    let sweep = |jobs: &str, dir: &Path| {
        let out = run(&[
            "sweep",
            "--mu",
            "0.125,-0.5",
            "--p",
            "3",
            "--u0",
            "log:0.5:8:4",
            "--jobs",
            jobs,
            "--output",
            "grid",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (fs::read(dir.join("grid.csv")).unwrap(), out.stdout)
    };
    assert_eq!(sweep("1", a.path()), sweep("3", b.path()));
}

#[test]
fn csv_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path()).status.code(), Some(0));
    let table = read_csv(&fs::read_to_string(dir.path().join("shot.csv")).unwrap()).unwrap();
    assert_eq!(table.header, ["r", "u", "du"]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("shot.json")).unwrap()).unwrap();
    let samples: Vec<State> = serde_json::from_value(doc["samples"].clone()).unwrap();
    assert_eq!(samples.len(), table.rows.len());
    for (s, row) in samples.iter().zip(&table.rows) {
        assert_eq!([s.r, s.u, s.du], *row);
    }
    assert_eq!(doc["sample_count"].as_u64().unwrap() as usize, samples.len());
}

#[test]
fn output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("HARDY_OUT_DIR", dir.path())
        .args(["linear", "harmonic", "--mu", "0.1875", "--output", "h"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(csv.starts_with("r,h,dh\n"));
    let v = stdout_json(&out);
    assert!(v["coefficient"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# cubic problem\nmu = 0.125\np = 3\nu0 = 1\n").unwrap();
    let out = run(&["classify", "--config", cfg.to_str().unwrap(), "--u0", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["launch"]["Center"]["u0"], 5.0);
    assert_eq!(v["classification"]["kind"], "Blowup");
    let out = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout_json(&out)["classification"]["kind"], "GlobalPositive");
}

#[test]
fn verify_filter_and_json() {
    let out = run(&["verify", "--filter", "threshold", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    let ids: Vec<u64> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, [1, 2, 3, 4]);
    let text = run(&["verify", "--filter", "exponent-identities"]);
    assert_eq!(text.status.code(), Some(0));
    let s = String::from_utf8_lossy(&text.stdout);
    assert!(s.contains("criterion 12 [PASS]") && s.contains("1/1 criteria passed"));
}

#[test]
fn remaining_commands_run() {
    for args in [
        &["deadcore", "--mu", "0.125", "--p", "0.5", "--rho", "0.5"][..],
        &["origin", "--mu", "0.125", "--p", "0.5"],
        &["blowup-radius", "--mu", "0.125", "--p", "3", "--u0", "5"],
        &["boundary", "--mu", "0.125", "--p", "0.5", "--c", "0.01"],
        &[
            "certify",
            "--mu",
            "0.125",
            "--p",
            "3",
            "--c-plus",
            "1.6",
            "--c-minus",
            "1.4",
        ],
        &["linear", "eta", "--mu", "-1", "--delta0", "1"],
    ] {
        let out = run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        stdout_json(&out);
    }
    let out = run(&["blowup-radius", "--mu", "0.125", "--p", "3", "--u0", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        serde_json::from_slice::<Value>(&out.stderr).unwrap()["error"],
        "NotBlowup"
    );
}
