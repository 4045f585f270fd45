use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqrtdom"))
}

fn run(args: &[&str], out: &Path) -> std::process::Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn manifest(out: &Path, stem: &str) -> String {
    std::fs::read_to_string(out.join(format!("{stem}_manifest.txt"))).unwrap()
}

#[test]
fn assemble_two_cells() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["assemble", "--problem", "laplacian", "--n", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k0 = std::fs::read_to_string(dir.path().join("assemble_k0.csv")).unwrap();
    assert_eq!(k0, "i,j,re,im\n0,0,4.0000000000000000e0,0.0000000000000000e0\n");
    let m = manifest(dir.path(), "assemble");
    assert!(m.contains("n_dof = 1\n"));
    assert!(m.contains("verdict = pass\n"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["assemble", "--alpha", "1.5"],
        vec!["assemble", "--problem", "nonsense"],
        vec!["kernel-dump", "--bc-right", "neumann"],
        vec!["verify-krein", "--interval", "half_line"],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = bin().args(["assemble", "--config", "/nonexistent/file.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn file_then_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nproblem = laplacian\nn = 8\n").unwrap();
    let o = bin()
        .args(["assemble", "--config"])
        .arg(&cfg)
        .args(["--n", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let m = manifest(dir.path(), "assemble");
    assert!(m.contains("config.problem = laplacian\n"));
    assert!(m.contains("n_dof = 3\n"), "{m}");
}

#[test]
fn coefficient_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    std::fs::write(&p, "x,re,im\n0,2,0\n1,2,0\n").unwrap();
    let o = bin()
        .args(["assemble", "--problem", "table", "--n", "2", "--coef-p"])
        .arg(&p)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k0 = std::fs::read_to_string(dir.path().join("assemble_k0.csv")).unwrap();
    assert!(k0.contains("0,0,8.0000000000000000e0,"), "{k0}");
}

#[test]
fn lions_study_is_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["kappa-study", "--problem", "lions", "--n-list", "32,64,128,256,512,1024"], dir.path());
    assert!(o.status.success());
    assert!(manifest(dir.path(), "kappa_study").contains("study.verdict = divergent\n"));
    let o = run(
        &["kappa-study", "--problem", "lions", "--alpha", "0.25", "--n-list", "32,64,128,256,512,1024"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(manifest(dir.path(), "kappa_study").contains("study.verdict = bounded\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["hypothesis-check", "--n", "24", "--samples", "16", "--seed", "5"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        let x = std::fs::read_to_string(a.path().join(&name)).unwrap();
        let y = std::fs::read_to_string(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
}
