use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kernelflows"));
    c.env_remove("KERNELFLOWS_THREADS");
    c
}

fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut c = bin();
    c.args(args);
    if let Some(t) = threads {
        c.env("KERNELFLOWS_THREADS", t.to_string());
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn verify_subset_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run(&["verify", "--seed", "7", "--only", "6,9", "--out", a.to_str().unwrap()], Some(1));
    let ob = run(&["verify", "--seed", "7", "--only", "6,9", "--out", b.to_str().unwrap()], Some(3));
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&ob), 0);
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), vec!["flow.csv", "registry.csv", "summary.json"]);
    assert_eq!(fa, fb);
    let stdout = String::from_utf8_lossy(&oa.stdout);
    assert!(stdout.contains("PASS  6 flow property"), "{stdout}");
}

#[test]
fn classify_prints_interval_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&["classify", "--measure", "uniform", "--replicas", "4000", "--points", "2", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("alpha_2 for uniform"), "{stdout}");
    let (header, rows) = csv_rows(&out.join("classify.csv"));
    assert_eq!(header, ["m", "k", "estimate", "ci_low", "ci_high", "stderr", "alpha", "pass"]);
    assert_eq!(rows.len(), 2);
    let alpha: f64 = rows[1][6].parse().unwrap();
    assert!((alpha - 2.0 / 3.0).abs() < 1e-15);
    let (lo, hi): (f64, f64) = (rows[1][3].parse().unwrap(), rows[1][4].parse().unwrap());
    assert!(lo < alpha && alpha < hi);
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = run(&["simulate", "--x0", "0,0", "--replicas", "200", "--dump", "2", "--seed", seed, "--out", out.to_str().unwrap()], None);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        files(&out)
    };
    let (a, b, c) = (go("a", "5"), go("b", "5"), go("c", "6"));
    assert_eq!(a, b);
    assert_ne!(a["paths.csv"], c["paths.csv"]);
}

#[test]
fn simulate_dumps_probability_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(
        &["simulate", "--x0", "0,-0.2", "--replicas", "100", "--dump", "3", "--measure", "beta:2", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("kernels.csv"));
    assert_eq!(header, ["replica", "s", "t", "x", "atom_pos", "atom_weight"]);
    let mut mass: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for r in &rows {
        *mass.entry((r[0].clone(), r[2].clone(), r[3].clone())).or_default() += r[5].parse::<f64>().unwrap();
    }
    assert_eq!(mass.len(), 3 * 10 * 2);
    assert!(mass.values().all(|m| (m - 1.0).abs() < 1e-12));
    let (header, rows) = csv_rows(&out.join("paths.csv"));
    assert_eq!(header, ["replica", "index", "time", "w"]);
    assert_eq!(rows.len(), 3 * 1001);
    assert_eq!(rows[0][3], "0");
    let (header, _) = csv_rows(&out.join("trajectories.csv"));
    assert_eq!(header, ["replica", "t", "x1", "x2"]);
}

#[test]
fn config_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let cfg = dir.path().join("g.toml");
    fs::write(
        &cfg,
        format!(
            "experiment = \"generator\"\nmeasure = {{ kind = \"atomic\", atoms = [[0.5, 0.0], [0.5, 1.0]] }}\nreplicas = 20000\nx = [0.0, 0.0]\nout = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("generator.csv"));
    assert_eq!(&header[..8], ["n", "m", "x", "t", "fd_value", "an_value", "stderr", "pass"]);
    let an: f64 = rows[0][5].parse().unwrap();
    assert!((an - 0.8).abs() < 1e-12, "{an}");
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "generator");
    assert_eq!(summary["pass"], true);
}

#[test]
fn skew_with_alpha_one_never_goes_negative() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let o = run(&["skew", "--alpha", "1", "--replicas", "300", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS min Z >= 0"));
    let (_, rows) = csv_rows(&out.join("skew_samples.csv"));
    assert_eq!(rows.len(), 900);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    let bad_toml = dir.path().join("bad.toml");
    fs::write(&bad_toml, "experiment = \"classify\"\nreplicas = -3\n").unwrap();
    let wrong_kind = dir.path().join("kind.toml");
    fs::write(&wrong_kind, "experiment = \"chaos\"\n").unwrap();
    for args in [
        vec!["run", "--config", "/nonexistent/file.toml"],
        vec!["run", "--config", bad_toml.to_str().unwrap()],
        vec!["run"],
        vec!["classify", "--config", wrong_kind.to_str().unwrap(), "--out", out],
        vec!["classify", "--measure", "atomic:0.5@0.1,0.5@0.2", "--out", out],
        vec!["classify", "--dt=0", "--out", out],
        vec!["classify", "--replicas", "0", "--out", out],
        vec!["skew", "--out", out],
        vec!["skew", "--alpha", "0.3", "--construction", "sign-product", "--out", out],
        vec!["skew", "--alpha", "0.7", "--construction", "teleport", "--out", out],
        vec!["generator", "--x", "1,2,3", "--out", out],
        vec!["verify", "--only", "11", "--out", out],
    ] {
        let o = run(&args, None);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["chaos", "--replicas", "10", "--out", out], Some(0));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("KERNELFLOWS_THREADS"));
}

#[test]
fn failed_check_exits_with_one_and_is_named() {
    // Off-origin starts cross the level late on a coarse grid; with many
    // replicas the resulting bias in X_1 is detectable.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let o = run(&["simulate", "--x0", "0.4", "--dt", "0.01", "--replicas", "40000", "--dump", "0", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("coordinate 1 ~ N(0.4, 1)"));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], false);
}
