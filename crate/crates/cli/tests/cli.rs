use std::fs;
use std::process::{Command, Output};

fn phlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_prints_json() {
    let o = phlab(&["classify", "-m", "3", "1", "1", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["class"], "hyperbolic");
    assert_eq!(v["det"], 2);

    let o = phlab(&["classify", "-m", "2", "1", "-1", "1"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["class"], "degenerate");

    let o = phlab(&["classify", "-m", "2", "0", "0", "1"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["class"], "non_hyperbolic");
}

#[test]
fn singular_matrix_is_bad_input() {
    let o = phlab(&["classify", "-m", "1", "2", "2", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero"));
}

#[test]
fn bad_config_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "eps = 0.1\nbogus = 3\n").unwrap();
    let o = phlab(&["verify-cone", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = phlab(&["verify-cone", "--grid", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# small grid\ngrid = 16\nseed = 9\n").unwrap();
    let out = dir.path().join("out");
    let o = phlab(&[
        "verify-cone",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["config"]["grid_n"], 16);
    assert_eq!(r["config"]["seed"], 4);
}

#[test]
fn svg_only_figure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = phlab(&["incoherent-report", "--svg-only", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS figure_contact_angle"));
    let svg = fs::read_to_string(dir.path().join("figure1.svg")).unwrap();
    assert_eq!(svg.matches("class=\"sigma\"").count(), 16);
    assert_eq!(svg.matches("class=\"circle\"").count(), 3);
}

#[test]
fn shallow_series_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = phlab(&[
        "incoherent-report",
        "--depth-K",
        "3",
        "--grid",
        "64",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL cohomology_tail"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = phlab(&[
            "incoherent-report",
            "--grid",
            "64",
            "--seed",
            "11",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["report.json", "figure1.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn render_draws_the_atlas_for_a_hyperbolic_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = phlab(&[
        "render",
        "--eps",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let svg = fs::read_to_string(dir.path().join("atlas.svg")).unwrap();
    assert!(svg.contains("class=\"center\""));
    assert!(svg.contains("class=\"unstable\""));
}
