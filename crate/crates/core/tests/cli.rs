use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ellipso-geo"))
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], input: &Path, output: &Path) -> Output {
    bin().args(args)
        .arg("--input")
        .arg(input)
        .arg("--output")
        .arg(output)
        .output()
        .unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn flat() -> Value {
    json!({
        "ellipsoid": {"p": [1.0, 1.0]},
        "params": {"m": 1, "n": 2, "a": [[0.6, 0.0], [0.8, 0.0]], "alpha0": [[0.0, 0.0]],
                   "alpha": [[[0.0, 0.0], [0.0, 0.0]]], "r": [[1, 0]]}
    })
}

#[test]
fn validate_flat_family() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "flat.json", &flat());
    let out = dir.path().join("report.json");
    let res = run(&["validate"], &input, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let doc = read(&out);
    assert_eq!(doc["schema"], "ellipso-geo/v1");
    assert_eq!(doc["status"], "ok");
    assert!(doc["residuals"]["constraint"].as_f64().unwrap() < 1e-14);
    assert!(doc["residuals"]["boundary"].as_f64().unwrap() < 1e-14);
    assert_eq!(doc["config"]["tol"], 1e-10);
}

#[test]
fn validate_failure_exits_two_with_report() {
    let dir = TempDir::new().unwrap();
    let mut bad = flat();
    bad["params"]["a"] = json!([[0.6, 0.0], [0.7, 0.0]]);
    let input = write(&dir, "bad.json", &bad);
    let out = dir.path().join("report.json");
    let res = run(&["validate"], &input, &out);
    assert_eq!(res.status.code(), Some(2));
    let doc = read(&out);
    assert_eq!(doc["status"], "failed");
    let failed: Vec<&str> = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["constraint", "boundary"]);
}

#[test]
fn solve_two_point_disc() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &json!({"ellipsoid": {"p": [1.0]}, "z": [[0.2, 0.0]], "w": [[0.6, 0.0]]}));
    let out = dir.path().join("s.json");
    let res = run(&["solve", "--two-point", "--seed", "3"], &input, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let doc = read(&out);
    assert!((doc["sigma"].as_f64().unwrap() - 0.4 / 0.88).abs() < 1e-10);
    assert_eq!(doc["config"]["seed"], 3);
    assert_eq!(doc["config"]["kind"], "two_point");

    // the solve output is itself a map document
    let report = dir.path().join("v.json");
    let res = run(&["validate", "--tol", "1e-8"], &out, &report);
    assert_eq!(res.status.code(), Some(0));
    let res = run(&["eval"], &out, &dir.path().join("e.json"));
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn solve_point_direction_in_ball() {
    let dir = TempDir::new().unwrap();
    let doc = json!({"ellipsoid": {"p": [1.0, 1.0]}, "z": [[0.3, 0.0], [0.0, 0.2]], "x": [[1.0, 0.0], [0.5, 0.5]]});
    let input = write(&dir, "p.json", &doc);
    let out = dir.path().join("s.json");
    assert_eq!(run(&["solve", "--point-direction"], &input, &out).status.code(), Some(0));
    let t = read(&out)["t"].as_f64().unwrap();
    let oracle = dir.path().join("o.json");
    assert_eq!(run(&["oracle", "--kind", "ball"], &input, &oracle).status.code(), Some(0));
    assert!((t - read(&oracle)["scalar"].as_f64().unwrap()).abs() < 1e-8);
    // flag and payload disagree
    assert_eq!(run(&["solve", "--two-point"], &input, &out).status.code(), Some(1));
}

#[test]
fn factor_example() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.json", &json!({"coeffs": [[-0.5, 0.0], [1.25, 0.0], [-0.5, 0.0]]}));
    let out = dir.path().join("f.json");
    assert_eq!(run(&["factor"], &input, &out).status.code(), Some(0));
    let doc = read(&out);
    assert!((doc["r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let alpha = doc["alpha"].as_array().unwrap();
    assert_eq!(alpha.len(), 1);
    assert!((alpha[0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(alpha[0][1].as_f64().unwrap().abs() < 1e-12);

    let input = write(&dir, "n.json", &json!({"coeffs": [[1.0, 0.0], [0.5, 0.0], [1.0, 0.0]]}));
    let res = run(&["factor"], &input, &out);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(read(&out)["error"]["kind"], "negative_on_circle");
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.json");
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["validate"], &missing, &out).status.code(), Some(1));
    let garbage = dir.path().join("g.json");
    fs::write(&garbage, "{not json").unwrap();
    assert_eq!(run(&["validate"], &garbage, &out).status.code(), Some(1));
    let input = write(&dir, "flat.json", &flat());
    assert_eq!(run(&["validate", "--bogus"], &input, &out).status.code(), Some(1));
    assert_eq!(run(&["validate", "--degree", "2"], &input, &out).status.code(), Some(1));
    assert_eq!(run(&["validate", "--tol", "-1"], &input, &out).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "p.json",
        &json!({"ellipsoid": {"p": [1.0, 2.0]}, "z": [[0.1, 0.2], [0.3, 0.0]], "w": [[-0.4, 0.1], [0.2, -0.3]]}),
    );
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(run(&["solve", "--seed", "7"], &input, &a).status.code(), Some(0));
    assert_eq!(run(&["solve", "--seed", "7"], &input, &b).status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn plot_data_is_csv() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "flat.json", &flat());
    let out = dir.path().join("curve.csv");
    assert_eq!(run(&["plot-data", "--grid", "16"], &input, &out).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["angle_index", "theta", "re_1", "im_1", "re_2", "im_2", "u"]
    );
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        assert!(r[6].parse::<f64>().unwrap().abs() < 1e-14);
    }
}

#[test]
fn fit_from_map_and_from_csv() {
    let dir = TempDir::new().unwrap();
    let doc = json!({
        "ellipsoid": {"p": [1.0, 2.0]},
        "params": {"m": 1, "n": 2, "a": [[0.6, 0.0], [0.8f64.sqrt(), 0.0]], "alpha0": [[0.0, 0.0]],
                   "alpha": [[[0.0, 0.0], [0.0, 0.0]]], "r": [[1, 0]]}
    });
    let input = write(&dir, "map.json", &doc);
    let out = dir.path().join("fit.json");
    let res = run(&["fit", "--grid", "128"], &input, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read(&out)["report"]["verdict"], "in_family");

    // λ ↦ (0.8λ, 0.5 + 0.1λ) leaves the sphere on the circle
    let mut w = csv::Writer::from_path(dir.path().join("grid.csv")).unwrap();
    w.write_record(["angle_index", "re_1", "im_1", "re_2", "im_2"]).unwrap();
    let m = 128;
    for k in 0..m {
        let t = std::f64::consts::TAU * k as f64 / m as f64;
        let z = num_complex::Complex64::from_polar(0.8, t);
        let v = num_complex::Complex64::from_polar(0.1, t) + 0.5;
        w.write_record([k.to_string(), z.re.to_string(), z.im.to_string(), v.re.to_string(), v.im.to_string()])
            .unwrap();
    }
    w.flush().unwrap();
    let meta = write(&dir, "meta.json", &json!({"ellipsoid": {"p": [1.0, 1.0]}, "zeros": [[[0.0, 0.0]], []]}));
    let res = bin()
        .args(["fit", "--input"])
        .arg(&meta)
        .arg("--input")
        .arg(dir.path().join("grid.csv"))
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read(&out)["error"]["kind"], "off_boundary");
}

#[test]
fn functional_builders_and_evaluation() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "b.json", &json!({"build": "kappa", "z": [[0.1, 0.0]], "x": [[0.0, 1.0]]}));
    let out = dir.path().join("k.json");
    assert_eq!(run(&["functional"], &input, &out).status.code(), Some(0));
    let built = read(&out);
    assert_eq!(built["type_pm"], true);

    // apply the built problem to the disc h(λ) = 0.1 + iλ
    let doc = json!({"problem": built["problem"], "disc": {"coeffs": [[[0.1, 0.0], [0.0, 1.0]]]}});
    let input = write(&dir, "e.json", &doc);
    assert_eq!(run(&["functional"], &input, &out).status.code(), Some(0));
    assert!(read(&out)["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn oracle_commands() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &json!({"ellipsoid": {"p": [1.0]}, "z": [[0.2, 0.0]], "w": [[0.6, 0.0]]}));
    let out = dir.path().join("o.json");
    assert_eq!(run(&["oracle", "--kind", "mobius"], &input, &out).status.code(), Some(0));
    assert!((read(&out)["scalar"].as_f64().unwrap() - 0.4 / 0.88).abs() < 1e-15);
    let res = run(&["oracle", "--kind", "brute-force", "--degree", "2"], &input, &out);
    assert_eq!(res.status.code(), Some(0));
    let doc = read(&out);
    assert_eq!(doc["bound"], "upper");
    assert!(doc["scalar"].as_f64().unwrap() >= 0.4 / 0.88 - 1e-9);
    assert_eq!(doc["config"]["degree"], 2);
}
