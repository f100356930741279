use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn minnorm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minnorm")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn gen_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = minnorm(&["gen", "sphube", "0", "1", "--n", "200", "--out", "s.xyz"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("s.xyz")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 200);

    let out = minnorm(&["estimate", "--in", "s.xyz", "--tau", "4", "--stencil-size", "30", "--out", "e.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,x,y,z,nx,ny,nz,kappa1,kappa2,gaussian,mean,error,flag"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 200);
    for r in &rows {
        assert_eq!(r.len(), 13);
        let err: f64 = r[11].parse().unwrap();
        assert!(err < 1e-2);
        let k1: f64 = r[7].parse().unwrap();
        assert!((k1.abs() - 1.0).abs() < 0.1);
    }
}

#[test]
fn ground_truth_file_supplies_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(minnorm(&["gen", "ellipsoid", "0.85", "0.35", "0.5", "--n", "150", "--out", "t.xyz"], dir.path())
        .status
        .success());
    let pts: String = fs::read_to_string(dir.path().join("t.xyz"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().take(3).collect::<Vec<_>>().join(" ") + "\n")
        .collect();
    fs::write(dir.path().join("p.xyz"), pts).unwrap();
    let out = minnorm(&["estimate", "--in", "p.xyz", "--method", "pca", "--stencil-size", "10"], dir.path());
    assert!(out.status.success());
    let no_truth = String::from_utf8(out.stdout).unwrap();
    assert!(no_truth.lines().nth(1).unwrap().split(',').nth(11) == Some(""));
    let out = minnorm(
        &["estimate", "--in", "p.xyz", "--method", "pca", "--stencil-size", "10", "--ground-truth", "t.xyz"],
        dir.path(),
    );
    assert!(out.status.success());
    let with_truth = String::from_utf8(out.stdout).unwrap();
    let err: f64 = with_truth.lines().nth(1).unwrap().split(',').nth(11).unwrap().parse().unwrap();
    assert!(err.is_finite());

    let out = minnorm(&["estimate", "--in", "p.xyz", "--ground-truth", "p.xyz"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(minnorm(&["estimate"], dir.path()).status.code(), Some(1));
    assert_eq!(minnorm(&["estimate", "--in", "x.xyz", "--norm", "l1"], dir.path()).status.code(), Some(1));
    assert_eq!(minnorm(&["gen", "torus", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(minnorm(&["estimate", "--in", "missing.xyz"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.xyz"), "0 0 0\n1 1\n").unwrap();
    let out = minnorm(&["estimate", "--in", "bad.xyz"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(minnorm(&["--help"], dir.path()).status.code(), Some(0));

    // collinear points: every PCA normal is degenerate
    let line: String = (0..20).map(|i| format!("{i} 0 0\n")).collect();
    fs::write(dir.path().join("line.xyz"), line).unwrap();
    let out = minnorm(&["estimate", "--in", "line.xyz", "--stencil-size", "5"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn studies_emit_summary_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = minnorm(
        &[
            "config-study", "--n", "120", "--tau", "4", "--config", "1,4", "--stencil-sizes", "20", "--no-timing",
            "--out", "c.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "shape,N,fill,tau,Ns,method,norm,config,max_err,rms_err,runtime_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(','));

    let out = minnorm(
        &["convergence", "--shape", "sphube", "--params", "0,1", "--n", "60,90,130", "--tau", "3", "--methods", "rbf",
            "--stencil-sizes", "20", "--no-timing"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("shape,method,tau,slope,reference_slope,points"));
}

#[test]
fn fair_writes_cloud() {
    let dir = tempfile::tempdir().unwrap();
    assert!(minnorm(&["gen", "cube", "1", "--n", "600", "--noise", "0.01", "--seed", "4", "--out", "c.xyz"], dir.path())
        .status
        .success());
    let out = minnorm(
        &["fair", "--in", "c.xyz", "--iterations", "1", "--stencil-size", "20", "--sigma-kappa", "inf", "--out", "f.xyz"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n = fs::read_to_string(dir.path().join("f.xyz")).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(n, 600);
}
