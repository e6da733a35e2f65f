use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sbm-mrf"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn lesmis() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/lesmis_edges.csv")
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Two blocks of three taxa that rise and fall together across samples.
fn write_abundance(dir: &Path) -> (PathBuf, PathBuf) {
    let mut text = String::from("sample_id,a1,a2,a3,b1,b2,b3\n");
    for i in 0..24u64 {
        let a = 5 + (i * 7) % 23;
        let b = 5 + (i * 11 + 3) % 19;
        text.push_str(&format!(
            "s{i},{},{},{},{},{},{}\n",
            a,
            2 * a + 1,
            3 * a,
            b,
            2 * b + 3,
            4 * b
        ));
    }
    let abundance = dir.join("abundance.csv");
    fs::write(&abundance, text).unwrap();
    let taxonomy = dir.join("taxonomy.csv");
    fs::write(&taxonomy, "taxon,parent\na1,A\na2,A\na3,A\nb1,B\nb2,B\nb3,B\n").unwrap();
    (abundance, taxonomy)
}

#[test]
fn missing_input_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["network", "--abundance", "does-not-exist.csv", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("does-not-exist.csv"), "{err}");
}

#[test]
fn network_writes_tables_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let (abundance, taxonomy) = write_abundance(tmp.path());
    let out_dir = tmp.path().join("net");
    let out = run(&[
        "network",
        "--abundance",
        s(&abundance),
        "--taxonomy",
        s(&taxonomy),
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "transformed.csv",
        "correlations.csv",
        "network.csv",
        "taxonomy_network.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let corr = fs::read_to_string(out_dir.join("correlations.csv")).unwrap();
    assert!(corr.starts_with("taxon_a,taxon_b,rho,p,adjusted_p,edge\n"));
    assert_eq!(corr.lines().count(), 1 + 15);

    let m = manifest(&out_dir);
    assert_eq!(m["command"], "network");
    assert_eq!(m["parameters"]["alpha"], 0.05);
    assert_eq!(m["parameters"]["shift"], "shifted");
    assert_eq!(m["parameters"]["min_nonzero"], 7);

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("among 6 taxa"), "{stdout}");
}

#[test]
fn zero_alpha_gives_empty_network() {
    let tmp = TempDir::new().unwrap();
    let (abundance, _) = write_abundance(tmp.path());
    let out_dir = tmp.path().join("net");
    let out = run(&[
        "network",
        "--abundance",
        s(&abundance),
        "--alpha",
        "0",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("0 edges"));
    let adj = fs::read_to_string(out_dir.join("network.csv")).unwrap();
    assert!(adj.lines().skip(1).all(|l| l.split(',').skip(1).all(|c| c == "0")));
}

#[test]
fn fit_validation_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let edges = lesmis();
    let k0 = run(&["fit", "--edges", &edges, "--f", "0", "--k", "0", "--out", s(tmp.path())]);
    assert_eq!(k0.status.code(), Some(2));
    let no_q = run(&["fit", "--edges", &edges, "--k", "3", "--out", s(tmp.path())]);
    assert_eq!(no_q.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_q.stderr).contains("taxonomy"));
    let bad_flag = run(&["fit", "--edges", &edges, "--k", "x", "--out", s(tmp.path())]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn fit_without_taxonomy_runs_standard_sbm() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--edges",
        &lesmis(),
        "--f",
        "0",
        "--k",
        "4",
        "--iterations",
        "60",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["summary"]["k"], 4);
    assert_eq!(fit["summary"]["p"], 77);
    assert_eq!(fit["summary"]["nu"], 11);
    assert_eq!(fit["taxa"].as_array().unwrap().len(), 77);
    let z = fs::read_to_string(out_dir.join("trace_z.csv")).unwrap();
    assert_eq!(z.lines().count(), 1 + 30);
    assert!(z.lines().nth(1).unwrap().starts_with("31,"));
    let m = manifest(&out_dir);
    assert_eq!(m["parameters"]["sampler"]["a_omega"], 1.0);
    assert_eq!(m["parameters"]["stream"], 0);
}

#[test]
fn fit_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let edges = lesmis();
    let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("run{i}"))).collect();
    for d in &dirs {
        let out = run(&[
            "fit",
            "--edges",
            &edges,
            "--q-threshold",
            "2",
            "--k",
            "5",
            "--iterations",
            "100",
            "--seed",
            "42",
            "--out",
            s(d),
        ]);
        assert!(out.status.success());
    }
    for f in [
        "fit.json",
        "trace_z.csv",
        "trace_omega.csv",
        "trace_log_joint.csv",
        "assignment.csv",
        "nodal_strength.csv",
    ] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn fit_with_taxonomy_writes_metric_tables() {
    let tmp = TempDir::new().unwrap();
    let (abundance, taxonomy) = write_abundance(tmp.path());
    let net = tmp.path().join("net");
    assert!(run(&["network", "--abundance", s(&abundance), "--out", s(&net)])
        .status
        .success());
    let out_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--network",
        s(&net.join("network.csv")),
        "--taxonomy",
        s(&taxonomy),
        "--k",
        "2",
        "--iterations",
        "50",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let shannon = fs::read_to_string(out_dir.join("shannon.csv")).unwrap();
    assert!(shannon.starts_with("model,community,shannon\n"));
    assert!(shannon.contains("sbm-mrf,"));
    let genus = fs::read_to_string(out_dir.join("genus_strength.csv")).unwrap();
    assert!(genus.starts_with("community,genus,strength\n"));
}

#[test]
fn select_k_writes_bic_curve() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("sel");
    let out = run(&[
        "--threads",
        "1",
        "select-k",
        "--edges",
        &lesmis(),
        "--q-threshold",
        "2",
        "--grid",
        "2:4",
        "--iterations",
        "60",
        "--method",
        "elbow",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bic = fs::read_to_string(out_dir.join("bic.csv")).unwrap();
    let ks: Vec<&str> = bic.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["k", "2", "3", "4"]);
    let sel: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["selection"]["method"], "elbow");
    assert_eq!(sel["selection"]["fits"].as_array().unwrap().len(), 3);
    assert_eq!(manifest(&out_dir)["threads"], 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("chosen K = "));
}

#[test]
fn simulate_then_fit_then_metrics() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let out = run(&["simulate", "--replicates", "1", "--seed", "5", "--out", s(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("9 datasets"));
    let mut names: Vec<String> = fs::read_dir(&sim)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9);
    assert!(names.contains(&"K9-strong".to_string()));

    let rep = sim.join("K3-strong/rep000");
    let fit_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--network",
        s(&rep.join("adjacency.csv")),
        "--f",
        "0",
        "--k",
        "3",
        "--iterations",
        "200",
        "--out",
        s(&fit_dir),
    ]);
    assert!(out.status.success());

    let met = tmp.path().join("met");
    let out = run(&[
        "metrics",
        "--truth",
        s(&rep.join("truth.csv")),
        "--fit",
        s(&fit_dir.join("fit.json")),
        "--out",
        s(&met),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8_lossy(&out.stdout);
    assert!(line.starts_with("K3-strong replicate 0 sbm: ARI "), "{line}");
    let ari = fs::read_to_string(met.join("ari.csv")).unwrap();
    assert!(ari.starts_with("scenario,replicate,method,ari\nK3-strong,0,sbm,"));
}

#[test]
fn simulate_is_reproducible_and_filterable() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let out = run(&["simulate", "--replicates", "2", "--scenario", "K6-weak", "--out", s(d)]);
        assert!(out.status.success());
    }
    for f in ["adjacency.csv", "truth.csv", "scenario.json"] {
        let rel = Path::new("K6-weak/rep001").join(f);
        assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap());
    }
    assert!(!a.join("K3-weak").exists());
    let bad = run(&["simulate", "--scenario", "K4-weak", "--out", s(&a)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn metrics_rejects_mismatched_truth_count() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "metrics",
        "--truth",
        "a.csv",
        "--truth",
        "b.csv",
        "--fit",
        "f.json",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
