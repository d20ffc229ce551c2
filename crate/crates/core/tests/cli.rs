mod common;

use std::fs;
use std::path::Path;

use common::*;

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn stderr_json(out: &std::process::Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.trim_start().starts_with('{')).expect("json report on stderr");
    serde_json::from_str(line).unwrap()
}

fn e_series(dir: &Path) -> String {
    let e = std::f64::consts::E;
    let p = dir.join("e.csv");
    write(
        &p,
        &format!("# four points at x = 0\nx,y\n0,{:.17e}\n0,{:.17e}\n0,{:.17e}\n0,{:.17e}\n", e, e, e * e, e.powi(4)),
    );
    path_str(&p)
}

#[test]
fn estimate_reproduces_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = e_series(dir.path());
    let out = run_cli(&["estimate", "-i", &input, "--x0", "0", "--k", "2", "--h", "1", "--kernel", "uniform"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["gamma_hat"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["q_hat"].as_f64().unwrap(), std::f64::consts::E);
    assert_eq!(v["window_count"], 4);

    let csv = dir.path().join("est.csv");
    let out = run_cli(&[
        "estimate", "-i", &input, "-o", &path_str(&csv), "--format", "csv", "--x0", "0", "--k", "2", "--h", "1",
        "--kernel", "uniform",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# condhill estimate"));
    assert!(text.contains("x0,k,h,gamma_hat,std_error,ci_lo,ci_hi,q_hat,g_hat,effective_mass,window_count\n"));
}

#[test]
fn three_layer_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = e_series(dir.path());
    let cfg = dir.path().join("run.cfg");
    write(&cfg, "# overrides\nk = 3\nci_level = 0.9\nh = 1\nx0 = 0\n");
    let out = run_cli(&["estimate", "-i", &input, "--config", &path_str(&cfg), "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k"], 2); // flag beats file
    assert_eq!(v["ci_level"], 0.9); // file beats default
    assert_eq!(v["kernel"], "epanechnikov"); // default
    assert_eq!(v["config"]["ci-level"], "0.9");

    write(&cfg, "bogus_key = 1\n");
    let out = run_cli(&["estimate", "-i", &input, "--config", &path_str(&cfg), "--k", "2", "--x0", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = e_series(dir.path());

    let out = run_cli(&["estimate", "-i", &input, "--x0", "5", "--k", "2", "--h", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let r = stderr_json(&out);
    assert_eq!(r["error"], "empty_window");
    assert_eq!(r["x0"], 5.0);

    let out = run_cli(&["estimate", "-i", &input, "--x0", "0", "--k", "2", "--h", "1", "--ci-level", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cli(&["estimate", "-i", &input, "--x0", "0", "--k", "2", "--h", "1", "--kernel", "cosine"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cli(&["estimate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    write(&bad, "x,y\n0.1,2\n0.2,-1\n");
    let out = run_cli(&["estimate", "-i", &path_str(&bad), "--x0", "0", "--k", "2", "--h", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["line"], 3);

    let junk = dir.path().join("junk.csv");
    write(&junk, "x,y\n0.1,abc\n");
    let out = run_cli(&["estimate", "-i", &path_str(&junk), "--x0", "0", "--k", "2", "--h", "1"]);
    assert_eq!(out.status.code(), Some(4));

    let missing = dir.path().join("missing.csv");
    let out = run_cli(&["estimate", "-i", &path_str(&missing), "--x0", "0", "--k", "2", "--h", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let flat = dir.path().join("flat.csv");
    let rows: String = (1..=30).map(|i| format!("0.5,{i}\n")).collect();
    write(&flat, &format!("x,y\n{rows}"));
    let out = run_cli(&["estimate", "-i", &path_str(&flat), "--x0", "0.5", "--k", "10", "--bandwidth", "sj-global"]);
    assert_eq!(out.status.code(), Some(5));

    let out = run_cli(&[
        "mc", "-o", &path_str(&dir.path().join("mc.csv")), "--model", "cond-pareto", "--n", "200", "--x0", "5",
        "--replications", "3", "--k-fracs", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn commands_write_expected_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = d.join("sim.csv");
    let out = run_cli(&["simulate", "-o", &path_str(&sim), "--model", "cond-frechet", "--n", "2000", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&sim).unwrap();
    assert!(text.contains("# model = cond-frechet\n"));
    assert!(text.contains("# phi-x = 0.1\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2001);
    let before = fs::read(&sim).unwrap();

    let trace = d.join("trace.csv");
    let out = run_cli(&["hill-trace", "-i", &path_str(&sim), "-o", &path_str(&trace), "--x0", "0.5", "--k-min", "20", "--k-max", "400", "--k-step", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = fs::read_to_string(&trace).unwrap();
    assert!(t.contains("\nk,h,gamma_hat,std_error,ci_lo,ci_hi,q_hat,g_hat,window_count\n"));
    assert_eq!(t.lines().filter(|l| !l.starts_with('#')).count(), 21);
    assert!(d.join("trace.plot.py").exists());

    let profile = d.join("profile.csv");
    let out = run_cli(&["profile", "-i", &path_str(&sim), "-o", &path_str(&profile), "--k", "200", "--x-grid", "0.1:0.9:9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = fs::read_to_string(&profile).unwrap();
    assert!(p.contains("\nx,gamma_hat,std_error,ci_lo,ci_hi\n"));
    assert_eq!(p.lines().filter(|l| !l.starts_with('#')).count(), 10);

    let mc = d.join("mc.csv");
    let out = run_cli(&["mc", "-o", &path_str(&mc), "--model", "cond-pareto", "--n", "500", "--replications", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = fs::read_to_string(&mc).unwrap();
    assert!(m.contains("\nk_frac,k,bias,mse,mean_se,coverage,n_missing\n"));
    assert!(d.join("mc.plot.py").exists());

    let returns = d.join("returns.csv");
    let rows: String = (0..400)
        .map(|i| {
            let r = ((i * 37 % 101) as f64 - 50.0) / 10.0;
            format!("{},{}\n", (i * 13 % 97) as f64, r)
        })
        .collect();
    write(&returns, &format!("x,y\n{rows}"));
    let diag = d.join("diag");
    let out = run_cli(&["diagnose", "-i", &path_str(&returns), "-o", &path_str(&diag), "--max-lag", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["positive.csv", "negative.csv", "qq_positive.csv", "qq_negative.csv", "acf.csv", "summary.json", "diagnose.plot.py"] {
        assert!(diag.join(f).exists(), "{f}");
    }

    assert_eq!(fs::read(&sim).unwrap(), before, "input must not be modified");
}
