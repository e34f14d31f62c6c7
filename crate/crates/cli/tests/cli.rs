use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surface-split"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn convergence_csv_to_stdout() {
    let o = run(&["convergence", "--min-level", "0", "--max-level", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "level,h_nominal,h_measured,dofs,err_l2_u,eoc_l2_u,err_h1_u,eoc_h1_u,err_l2_w,eoc_l2_w,err_h1_w,eoc_h1_w,residual"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,1.41421e0,1.41421e0,12,"));
}

#[test]
fn delta_csv_leaves_h1_w_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("delta.csv");
    let o = run(&["convergence", "--problem", "delta", "--max-level", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[10], "");
        assert_eq!(cells[11], "");
    }
    let raw = fs::read_to_string(dir.path().join("delta.raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), text.lines().count());
}

#[test]
fn markdown_mirrors_table_layout() {
    let o = run(&["convergence", "--max-level", "2", "--format", "md"]);
    let text = stdout(&o);
    assert!(text.contains("| h | E_L2 | EOC | E_H1 | EOC |"));
    assert!(text.contains("u - u_h") && text.contains("w - w_h"));
}

#[test]
fn solver_failure_marks_rows_and_exits_3() {
    // Relative tolerance this tight is beyond what the level-0 iteration reaches in
    // a couple of steps, so every level fails but all are attempted.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail.csv");
    let o = run(&[
        "convergence", "--solver", "iterative", "--tol", "1e-300", "--max-level", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.matches("FAILED").count(), 8);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(run(&["convergence", "--max-level", "9"]).status.code(), Some(2));
    assert_eq!(run(&["convergence", "--tol", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["convergence", "--quad-error", "2"]).status.code(), Some(2));
    assert_eq!(run(&["infsup", "--max-level", "5"]).status.code(), Some(2));
    assert_eq!(run(&["ritz", "--lambda", "2"]).status.code(), Some(2));
    assert_eq!(run(&["convergence", "--problem", "torus"]).status.code(), Some(2));
}

#[test]
fn infsup_rows_equal_one() {
    let o = run(&["infsup", "--min-level", "0", "--max-level", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let betas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(betas.len(), 4);
    assert!(betas.iter().all(|b| (b - 1.0).abs() < 1e-5));
}

#[test]
fn coercivity_and_ritz_columns() {
    let o = run(&["coercivity"]);
    assert_eq!(o.status.code(), Some(0));
    let mus: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(mus.len(), 3);
    assert!(mus.iter().all(|&m| m > 0.0));

    let o = run(&["ritz"]);
    let ratios: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 5);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn mesh_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l0.off");
    let o = run(&["mesh", "--max-level", "0", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("V=6 E=12 F=8"));
    let off = fs::read_to_string(&path).unwrap();
    assert_eq!(off.lines().nth(1), Some("6 8 12"));

    let path = dir.path().join("l2.off");
    let o = run(&["mesh", "--max-level", "2", "--out", path.to_str().unwrap()]);
    assert!(stdout(&o).contains("V=66"));

    let o = run(&["mesh", "--out", "/nonexistent-dir/x.off"]);
    assert_eq!(o.status.code(), Some(4));
}
