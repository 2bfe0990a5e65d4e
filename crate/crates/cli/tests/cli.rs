use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fqcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fqcp"))
        .args(args)
        .output()
        .expect("spawn fqcp")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn classical_writes_series_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let run = |dir: &Path, workers: &str| {
        fqcp(&[
            "classical", "--p", "0.3944", "--t-max", "40", "--samples", "3000", "--seed", "1",
            "--workers", workers, "--out", &out_arg(dir),
        ])
    };
    assert!(run(&a, "1").status.success());
    assert!(run(&b, "2").status.success());
    for f in ["N.csv", "R2.csv", "P.csv", "n0.csv", "P_right.csv"] {
        let bytes = fs::read(a.join(f)).unwrap();
        assert!(bytes.starts_with(b"# fqcp-schema: series/1\nt,mean,stderr,n_samples\n"));
        assert_eq!(bytes, fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = manifest(&a);
    assert_eq!(m["config"]["samples"], 3000);
    assert_eq!(m["config"]["skip_first_reset_layer"], false);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 5);
}

#[test]
fn existing_outputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_arg(tmp.path());
    let args = ["classical", "--t-max", "5", "--samples", "100", "--out", dir.as_str()];
    assert!(fqcp(&args).status.success());
    let before = fs::read(tmp.path().join("N.csv")).unwrap();
    let again = fqcp(&args);
    assert_eq!(again.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&again.stderr).unwrap();
    assert_eq!(diag["error"], "overwrite");
    assert_eq!(fs::read(tmp.path().join("N.csv")).unwrap(), before);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(fqcp(&forced).status.success());
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 0.3, "samples_typo": 5}"#).unwrap();
    let out = tmp.path().join("o");
    let r = fqcp(&["classical", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("samples_typo"));
    let r = fqcp(&["classical", "--p", "1.5", "--out", &out_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = fqcp(&["classical", "--theta", "1.0", "--out", &out_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.join("N.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 0.2, "t_max": 4, "samples": 50, "seed": 9}"#).unwrap();
    let out = tmp.path().join("o");
    let r = fqcp(&["classical", "--config", cfg.to_str().unwrap(), "--p", "0.6", "--out", &out_arg(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["p"], 0.6);
    assert_eq!(m["config"]["t_max"], 4);
    assert_eq!(m["config"]["seed"], 9);
}

#[test]
fn zne_fold_triples_rzz_count() {
    let tmp = tempfile::tempdir().unwrap();
    let count = |zne: &str| {
        let dir = tmp.path().join(format!("zne{zne}"));
        let r = fqcp(&["emit-circuit", "--t", "18", "--p", "0.3", "--zne", zne, "--out", &out_arg(&dir)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let text = fs::read_to_string(dir.join("program.fqcp")).unwrap();
        assert!(text.starts_with("fqcp-program 1;"));
        let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("circuit.json")).unwrap()).unwrap();
        assert_eq!(summary["qubits"], 20);
        text.lines().filter(|l| l.contains("rzz(")).count()
    };
    let (one, three) = (count("1"), count("3"));
    assert!(one > 0);
    assert_eq!(three, 3 * one);
}

#[test]
fn resources_csv_has_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let r = fqcp(&["resources", "--p", "0.3", "--t-grid", "2,3", "--samples", "200", "--out", &out_arg(tmp.path())]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(tmp.path().join("resources.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# fqcp-schema: resources/1"));
    assert_eq!(
        lines.next(),
        Some("t,p,mean_activated_tq,total_tq,fraction_tq,mean_activated_mr,total_mr,fraction_mr")
    );
    for line in lines {
        let fraction: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(fraction < 0.7, "{line}");
    }
}

#[test]
fn exponent_crossing_bst_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for p in ["0.3", "0.3944", "0.5"] {
        let dir = tmp.path().join(format!("p{p}"));
        let r = fqcp(&[
            "classical", "--p", p, "--t-max", "60", "--samples", "4000", "--seed", "3", "--out", &out_arg(&dir),
        ]);
        assert!(r.status.success());
        runs.push(out_arg(&dir));
    }
    let exps = tmp.path().join("exps");
    let mut args = vec!["analyze-exponents", "--dt", "10", "--out"];
    let exps_arg = out_arg(&exps);
    args.push(&exps_arg);
    args.push("--input");
    args.extend(runs.iter().map(String::as_str));
    let r = fqcp(&args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let cross = tmp.path().join("cross");
    let r = fqcp(&[
        "analyze-crossings", "--input", exps.join("exponents.csv").to_str().unwrap(), "--tau", "10",
        "--out", &out_arg(&cross),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(cross.join("crossings.csv")).unwrap();
    assert!(text.starts_with("# fqcp-schema: crossings/1\n"));
    // a series file is not an exponent or gap table
    let r = fqcp(&[
        "analyze-crossings", "--input", tmp.path().join("p0.3/N.csv").to_str().unwrap(),
        "--out", &out_arg(&tmp.path().join("bad")),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(diag["error"], "schema");
}

#[test]
fn analyze_bst_recovers_synthetic_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("crossings.csv");
    let mut text = String::from("# fqcp-schema: crossings/1\nt,p_c,delta,p_lo,p_hi,wide_bracket\n");
    for t in [10, 14, 20, 28, 40, 56] {
        let x = t as f64;
        let p_c = 0.3944 + 0.2 * x.powf(-1.0);
        let delta = 0.3137 - 0.5 * x.powf(-0.5);
        text.push_str(&format!("{t},{p_c},{delta},{},{},false\n", p_c - 1e-3, p_c + 1e-3));
    }
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("bst");
    let r = fqcp(&["analyze-bst", "--input", input.to_str().unwrap(), "--out", &out_arg(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bst.json")).unwrap()).unwrap();
    assert!((v["p_c"]["limit"].as_f64().unwrap() - 0.3944).abs() < 1e-6, "{v}");
    assert!((v["exponent"]["limit"].as_f64().unwrap() - 0.3137).abs() < 1e-6, "{v}");
    assert_eq!(v["points"], 6);
}

#[test]
fn mpo_then_collapse_and_zne() {
    let tmp = tempfile::tempdir().unwrap();
    let (one, three) = (tmp.path().join("m1"), tmp.path().join("m3"));
    for (dir, p) in [(&one, "0.3"), (&three, "0.6")] {
        let r = fqcp(&["mpo", "--p", p, "--t-max", "3", "--bond-dim", "32", "--out", &out_arg(dir)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let obs = fs::read_to_string(one.join("observables.csv")).unwrap();
    assert!(obs.lines().nth(1) == Some("t,observable,value,flagged"));
    let c = tmp.path().join("c");
    let r = fqcp(&["collapse", "--input", &out_arg(&one), "--out", &out_arg(&c)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let z = tmp.path().join("z");
    let r = fqcp(&["zne", "--input-1x", &out_arg(&one), "--input-3x", &out_arg(&three), "--out", &out_arg(&z)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(z.join("zne.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(3).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[5] - (1.5 * row[1] - 0.5 * row[3])).abs() < 1e-12);
}

#[test]
fn small_engines_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |n: &str| out_arg(&tmp.path().join(n));
    let cases: [&[&str]; 4] = [
        &["trajectories", "--t-max", "2", "--samples", "200", "--out", &d("tr")],
        &["ed-levels", "--l-grid", "4,6", "--out", &d("ed")],
        &["mpo-uniform", "--t-max", "2", "--bond-dim", "16", "--out", &d("mu")],
        &["dmrg-gap", "--l-grid", "3,4", "--p-grid", "0.2,0.4", "--bond-dim", "8", "--out", &d("dm")],
    ];
    for args in cases {
        let r = fqcp(args);
        assert!(
            matches!(r.status.code(), Some(0) | Some(3)),
            "{args:?}: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }
    let gap = fs::read_to_string(tmp.path().join("dm/gap.csv")).unwrap();
    assert_eq!(gap.lines().count(), 2 + 4);
    let r = fqcp(&["dmrg-gap", "--p-grid", "0.4,0.2", "--out", &d("dm2")]);
    assert_eq!(r.status.code(), Some(2));
}
