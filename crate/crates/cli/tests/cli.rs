use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vorlift::geometry::Point;
use vorlift::grid::{CircleValuedField, GridSpec, VectorField2D};
use vorlift::io::{write_circle_field, write_vector_field};

fn vorlift(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vorlift")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn with_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = vorlift(&["fixtures", "--output", "fx", "--grid", "64"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn lift_model_vortex_reports_degree_one() {
    let dir = with_fixtures();
    let out = vorlift(
        &["lift", "--input", "fx/model_vortex.json", "--charges", "fx/model_vortex.charges.json", "--output", "u.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("u.report.json"));
    assert_eq!(report["boundary_degree"], 1);
    assert!(dir.path().join("u.bin").exists());

    // the lifted phase goes back through unlift and levelset
    assert!(vorlift(&["unlift", "--input", "u.json", "--output", "v.json"], dir.path()).status.success());
    let out = vorlift(&["levelset", "--input", "u.json", "--level", "1.0"], dir.path());
    assert!(out.status.success());
    let ls: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ls["interior_boundary"].as_array().unwrap().len(), 1);
    assert_eq!(ls["interior_boundary"][0]["multiplicity"], 1);
}

#[test]
fn missing_charge_and_noise_are_not_liftable() {
    let dir = with_fixtures();
    let out = vorlift(&["lift", "--input", "fx/model_vortex.json", "--output", "u.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[not_liftable]"), "{err}");
    assert!(err.contains("loop"), "{err}");

    let g = GridSpec::<f64>::unit_disk(32).unwrap();
    let noise = |k: usize, s: f64| ((k as f64 * 12.9898 + s).sin() * 43758.5453).fract() * 4.0;
    let mut v = VectorField2D::zeros(&g);
    for k in 0..g.node_count() {
        v.set(k, Point::new(noise(k, 0.0), noise(k, 7.0)));
    }
    write_vector_field(&dir.path().join("noise.json"), &v).unwrap();
    let out = vorlift(&["lift", "--input", "noise.json", "--output", "u.json"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::<f64>::unit_disk(16).unwrap();
    let mut v = VectorField2D::zeros(&g);
    (0..g.node_count()).for_each(|k| v.set_singular(k));
    write_vector_field(&dir.path().join("empty.json"), &v).unwrap();
    let out = vorlift(&["lift", "--input", "empty.json", "--output", "u.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[format]"));

    let out = vorlift(&["flux", "--input", "nope.json", "--center", "0,0", "--radius", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    fs::write(dir.path().join("junk.json"), "{").unwrap();
    let out = vorlift(&["slice", "--current", "junk.json", "--center", "0,0", "--radius", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn contract_and_tolerance_exit_codes() {
    let dir = with_fixtures();
    let out = vorlift(&["flux", "--input", "fx/swirl.json", "--radius", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--center"));
    let out = vorlift(&["flux", "--input", "fx/swirl.json", "--center", "0,0", "--radius", "0.001"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = vorlift(&["flux", "--input", "fx/swirl.json", "--center", "0,0", "--radius", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // 128² is too coarse for this fixture near the cores at this radius
    let out = vorlift(&["fixtures", "--output", "fx128", "--grid", "128"], dir.path());
    assert!(out.status.success());
    let out = vorlift(
        &["approx", "--input", "fx128/two_charge.json", "--r", "0.2", "--nshifts", "8", "--tol", "1e-3", "--output", "a.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[not_quantized]"));
}

#[test]
fn flux_of_model_vortex_is_one_quantum() {
    let dir = with_fixtures();
    let out = vorlift(
        &["flux", "--input", "fx/model_vortex.json", "--center", "-0.1,0.05", "--radius", "0.5", "--tol", "1e-6"],
        dir.path(),
    );
    assert!(out.status.success());
    let f: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f["quantum"], 1);
    let out = vorlift(&["flux", "--input", "fx/dipole.json", "--center", "0,0", "--radius", "0.6"], dir.path());
    let f: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f["quantum"], 0);
}

#[test]
fn counterexample_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = vorlift(&["counterexample", "--p", "1.5", "--output", "c.csv"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,mass,bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    for w in rows.windows(2) {
        assert!(w[1][2] > w[0][2]);
        assert!(w[1][0] > w[0][0]);
    }
    assert!(rows.iter().all(|r| r[1] <= 2.0));

    let out = vorlift(&["counterexample", "--p", "1"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("N,sum\n"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() <= 2.0));
    let out = vorlift(&["counterexample", "--p", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coarea_on_arg_phase() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::<f64>::unit_disk(512).unwrap();
    write_circle_field(&dir.path().join("arg.json"), &CircleValuedField::from_fn(&g, |p| p.angle())).unwrap();
    let out = vorlift(&["coarea", "--input", "arg.json", "--nlevels", "64"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["relative_error"].as_f64().unwrap() <= 0.02, "{r}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = with_fixtures();
    fs::write(
        dir.path().join("run.json"),
        r#"{"command": "flux", "input": "fx/model_vortex.json", "center": [0.0, 0.0], "radius": 0.5}"#,
    )
    .unwrap();
    let out = vorlift(&["--config", "run.json"], dir.path());
    let f: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f["quantum"], 1);
    let out = vorlift(&["--config", "run.json", "--center", "0.3,0.3", "--radius", "0.2"], dir.path());
    let f: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f["quantum"], 0);
    fs::write(dir.path().join("bad.json"), r#"{"command": "flux", "radius": 0.5, "colour": 1}"#).unwrap();
    assert_eq!(vorlift(&["--config", "bad.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(vorlift(&["fixtures", "--output", "fx", "--grid", "256"], dir.path()).status.success());
    let run = |name: &str| {
        let out = vorlift(
            &["approx", "--input", "fx/two_charge.json", "--r", "0.2", "--nshifts", "4", "--seed", "3", "--output", name],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("a.json");
    run("b.json");
    for (x, y) in [("a.bin", "b.bin"), ("a.report.json", "b.report.json"), ("a.charges.json", "b.charges.json")] {
        assert_eq!(fs::read(dir.path().join(x)).unwrap(), fs::read(dir.path().join(y)).unwrap(), "{x}");
    }
    let charges = json(&dir.path().join("a.charges.json"));
    let mut degrees: Vec<i64> = charges.as_array().unwrap().iter().map(|c| c["n"].as_i64().unwrap()).collect();
    degrees.sort();
    assert_eq!(degrees, vec![-1, 1]);
}

#[test]
fn checked_in_fixtures_are_reproducible() {
    let dir = with_fixtures();
    let repo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    for entry in fs::read_dir(dir.path().join("fx")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(repo.join(name)).unwrap(), "{name:?}");
    }
}
