use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gls(args: &[&str]) -> Output {
    gls_env(args, &[])
}

fn gls_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gls"));
    cmd.args(args).env_remove("WPINV_TOL_STOP").env_remove("WPINV_TOL_RANK");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, n: &str, seed: &str) {
    let o = gls(&["gen-problem", "--n", n, "--L", "l1", "--func", "ramp", "--seed", seed, "--out", p(dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn gen_problem_writes_validated_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "50", "7");
    for f in ["A.mtx", "L.mtx", "b.mtx", "x_true.mtx", "meta.json", "summary.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let meta = json(&dir.join("meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["func"], "ramp");
    assert_eq!(meta["lKind"], "l1");
    assert!(meta["tolerancesUsed"]["validation"].as_f64().unwrap() > 0.0);
    let summary = json(&dir.join("summary.json"));
    assert_eq!(summary["schema"], 1);
    assert_eq!(summary["validated"], true);
}

#[test]
fn solve_dense_certifies_generated_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "50", "7");
    let out = tmp.path().join("run");
    let o = gls(&[
        "solve", "--A", p(&dir.join("A.mtx")), "--L", p(&dir.join("L.mtx")), "--b", p(&dir.join("b.mtx")),
        "--x-true", p(&dir.join("x_true.mtx")), "--tol", "1e-10", "--gdag", "dense", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["schema"], 1);
    assert_eq!(s["certified"], true);
    assert!(s["rel_error"].as_f64().unwrap() <= 1e-8, "{s}");
    assert!(s["iterations"].as_u64().unwrap() >= 1);
    let csv = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(csv.starts_with("k,res_estimate,res_true,x_norm,alpha,beta"));
    assert!(out.join("x.mtx").exists());
}

#[test]
fn solve_with_inner_lsqr_reports_tau_and_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "40", "11");
    let out = tmp.path().join("run");
    let o = gls(&[
        "solve", "--A", p(&dir.join("A.mtx")), "--L", p(&dir.join("L.mtx")), "--b", p(&dir.join("b.mtx")),
        "--x-true", p(&dir.join("x_true.mtx")), "--gdag", "lsqr:1e-6", "--out", p(&out), "--dump-bidiag",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["gdag"], "lsqr");
    assert_eq!(s["inner_tau"].as_f64(), Some(1e-6));
    assert!(s["rel_error"].as_f64().is_some());
    for f in ["alphas_betas.csv", "V.mtx", "U_tilde.mtx"] {
        assert!(out.join("bidiag").join(f).exists(), "{f}");
    }
}

#[test]
fn missing_file_exits_2_with_one_line_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gls(&["solve", "--A", "/nonexistent/A.mtx", "--b", "/nonexistent/b.mtx", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.lines().next().unwrap().starts_with("error[io]: /nonexistent/A.mtx"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn malformed_file_reports_parse_line() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("A.mtx");
    write(&a, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3.0\n");
    let o = gls(&["gsvd", "--A", p(&a), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let first = stderr(&o).lines().next().unwrap().to_string();
    assert!(first.starts_with("error[parse]:") && first.contains(":3:"), "{first}");
}

#[test]
fn invalid_selectors_and_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "10", "1");
    let a = dir.join("A.mtx");
    let b = dir.join("b.mtx");
    let o = gls(&["solve", "--A", p(&a), "--b", p(&b), "--gdag", "lsqr:abc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]:"));

    let cfg = tmp.path().join("cfg.json");
    write(&cfg, r#"{"tol": 1e-8, "colour": "blue"}"#);
    let o = gls(&["--config", p(&cfg), "solve", "--A", p(&a), "--b", p(&b)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    let o = gls(&["solve", "--b", p(&b)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: solve requires --A"));
}

#[test]
fn wpinv_output_passes_check_mpe() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "20", "5");
    let out = tmp.path().join("wp");
    let a = dir.join("A.mtx");
    let l = dir.join("L.mtx");
    let o = gls(&["wpinv", "--A", p(&a), "--L", p(&l), "--b", p(&dir.join("b.mtx")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&out.join("summary.json"))["method"], "elden");

    let o = gls(&["check-mpe", "--A", p(&a), "--L", p(&l), "--X", p(&out.join("X.mtx"))]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().all(|l| l.ends_with("PASS")), "{table}");

    // perturbing X breaks the certificate
    let x = fs::read_to_string(out.join("X.mtx")).unwrap();
    let mut lines: Vec<String> = x.lines().map(String::from).collect();
    let v: f64 = lines[2].parse().unwrap();
    lines[2] = format!("{:e}", v + 0.5);
    let bad = tmp.path().join("Xbad.mtx");
    write(&bad, &(lines.join("\n") + "\n"));
    let o = gls(&["check-mpe", "--A", p(&a), "--L", p(&l), "--X", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    let report = json(&out.join("mpe.json"));
    assert_eq!(report["identities"].as_array().unwrap().len(), 5);
}

#[test]
fn wpinv_methods_selectable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "12", "2");
    for (method, name) in [("gsvd", "gsvd"), ("limit:1e-8", "limit:1e-8")] {
        let out = tmp.path().join(method.replace(':', "_"));
        let o = gls(&[
            "wpinv", "--A", p(&dir.join("A.mtx")), "--L", p(&dir.join("L.mtx")), "--method", method, "--out", p(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(json(&out.join("summary.json"))["method"], name);
        assert!(!out.join("x.mtx").exists());
    }
}

#[test]
fn gsvd_of_diagonal_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("A.mtx");
    let l = tmp.path().join("L.mtx");
    write(&a, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 2\n2 2 1\n");
    write(&l, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n");
    let out = tmp.path().join("g");
    let o = gls(&["gsvd", "--A", p(&a), "--L", p(&l), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let side = json(&out.join("gsvd.json"));
    assert_eq!(side, serde_json::json!({"r": 2, "q1": 0, "q2": 2, "q3": 0}));
    for f in ["U_A.mtx", "U_L.mtx", "X.mtx", "CA.mtx", "SL.mtx"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d1 = tmp.path().join("p1");
    let d2 = tmp.path().join("p2");
    gen(&d1, "30", "9");
    gen(&d2, "30", "9");
    for f in ["A.mtx", "b.mtx", "x_true.mtx", "meta.json"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let run = |out: &Path| {
        let o = gls(&[
            "solve", "--A", p(&d1.join("A.mtx")), "--L", p(&d1.join("L.mtx")), "--b", p(&d1.join("b.mtx")),
            "--true-residual", "--out", p(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    run(&r1);
    run(&r2);
    for f in ["history.csv", "summary.json", "x.mtx"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn environment_overrides_tolerance_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("prob");
    gen(&dir, "15", "4");
    let out = tmp.path().join("r");
    let (a, b) = (dir.join("A.mtx"), dir.join("b.mtx"));
    let args = ["solve", "--A", p(&a), "--b", p(&b), "--out", p(&out)];
    let o = gls_env(&args, &[("WPINV_TOL_STOP", "1e-4")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&out.join("summary.json"))["tol"].as_f64(), Some(1e-4));

    let mut with_flag = args.to_vec();
    with_flag.extend(["--tol", "1e-9"]);
    let o = gls_env(&with_flag, &[("WPINV_TOL_STOP", "1e-4")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&out.join("summary.json"))["tol"].as_f64(), Some(1e-9));

    let o = gls_env(&args, &[("WPINV_TOL_RANK", "nope")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: WPINV_TOL_RANK"));
}
