use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn effop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn entry(v: &Value, i: usize, j: usize) -> (f64, f64) {
    let c = &v["sigma_star"][i][j];
    (c[0].as_f64().unwrap(), c[1].as_f64().unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const HARMONIC_PENCIL: &str = r#"{"n":2,"dim_h0":1,"dim_h1":1,"coeffs":[
 [[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]],
 [[[0.5,0],[-0.5,0]],[[-0.5,0],[0.5,0]]]]}"#;

#[test]
fn laminate_gives_harmonic_and_arithmetic_means() {
    let out = effop(&["effective", "--geometry", "gen:laminate:8:1:0.5", "--z", "1;4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!((entry(&v, 0, 0).0 - 1.6).abs() < 1e-12);
    assert!((entry(&v, 1, 1).0 - 2.5).abs() < 1e-12);
    assert!(entry(&v, 0, 1).0.abs() < 1e-12);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["hypotheses"]["H2"], true);
    let w = &v["wiener"];
    assert!((w["lower"].as_f64().unwrap() - 1.6).abs() < 1e-12);
    assert!((w["upper"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn complex_point_uses_complex_field() {
    let out = effop(&["effective", "--geometry", "gen:laminate:4:2:0.5", "--z", "1,1;2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    // Harmonic mean of 1+i and 2 across the layers, arithmetic along them.
    let (re, im) = entry(&v, 0, 0);
    assert!((re - 1.5).abs() < 1e-12 && (im - 0.5).abs() < 1e-12);
    let h = harmonic((1.0, 1.0), (2.0, 0.0));
    let (re, im) = entry(&v, 1, 1);
    assert!((re - h.0).abs() < 1e-12 && (im - h.1).abs() < 1e-12);
    assert_eq!(v["hypotheses"]["H1"], false);
    assert!(v.get("wiener").is_none());
}

fn harmonic(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let inv = |(x, y): (f64, f64)| {
        let m = x * x + y * y;
        (x / m, -y / m)
    };
    let (ia, ib) = (inv(a), inv(b));
    inv(((ia.0 + ib.0) / 2.0, (ia.1 + ib.1) / 2.0))
}

#[test]
fn checkerboard_is_symmetric_with_determinant_t() {
    let out = effop(&["effective", "--geometry", "gen:checkerboard:8", "--z", "1;4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let (a, b, c, d) = (entry(&v, 0, 0).0, entry(&v, 0, 1).0, entry(&v, 1, 0).0, entry(&v, 1, 1).0);
    assert!((a - d).abs() < 1e-12);
    assert!((b - c).abs() < 1e-12);
    assert!((a * d - b * c - 4.0).abs() < 1e-10);
    assert!((a - 2.0).abs() < 1e-2);
}

#[test]
fn points_outside_d_are_all_reported() {
    let out = effop(&["effective", "--geometry", "gen:checkerboard:4", "--z", "1;-1", "--z", "1;2;3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("z not in domain D"), "{err}");
    assert!(err.contains("1;-1") || err.contains("-1"), "{err}");
    assert!(err.contains('3'), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn cg_backend_rejects_complex_points() {
    let out = effop(&["effective", "--geometry", "gen:checkerboard:4", "--backend", "cg", "--z", "1,1;2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cg backend"));
}

#[test]
fn cg_matches_dense() {
    let dense = stdout_json(&effop(&["effective", "--geometry", "gen:random:8:3:5", "--z", "1;3;0.5"]));
    let out = effop(&["effective", "--geometry", "gen:random:8:3:5", "--z", "1;3;0.5", "--backend", "cg"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cg = stdout_json(&out);
    assert!(cg["cg_iterations"].is_array());
    for i in 0..2 {
        for j in 0..2 {
            assert!((entry(&dense, i, j).0 - entry(&cg, i, j).0).abs() < 1e-7);
        }
    }
}

#[test]
fn sweep_keeps_input_order_and_is_monotone() {
    let ts = ["1", "2", "4", "8", "16", "32"];
    let zs: Vec<String> = ts.iter().map(|t| format!("1;{t}")).collect();
    let mut args = vec!["sweep", "--geometry", "gen:random:8:2:3", "--jobs", "3"];
    for z in &zs {
        args.extend(["--z", z.as_str()]);
    }
    let out = effop(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["z1_re", "z1_im", "z2_re", "z2_im"]);
    assert_eq!(header.last(), Some(&"status"));
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), ts.len());
    let mut prev = 0.0;
    for (row, t) in rows.iter().zip(ts) {
        assert_eq!(row.len(), header.len());
        assert_eq!(row[col("z2_re")].parse::<f64>().unwrap(), t.parse::<f64>().unwrap());
        assert_eq!(row[col("status")], "ok");
        let s11: f64 = row[col("s11_re")].parse().unwrap();
        let lo: f64 = row[col("wiener_lo")].parse().unwrap();
        let hi: f64 = row[col("wiener_hi")].parse().unwrap();
        assert!(s11 >= prev && lo <= s11 + 1e-12 && s11 <= hi + 1e-12);
        prev = s11;
    }
}

#[test]
fn single_row_sweep_as_json() {
    let out = effop(&["sweep", "--geometry", "gen:checkerboard:4", "--z", "2;3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn verify_checkerboard_passes() {
    let out = effop(&["verify", "--geometry", "gen:checkerboard:8", "--z", "1;4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    let checks = v["checks"].as_object().unwrap();
    for name in [
        "prop1_equality", "duality", "ohm", "homogeneity", "realization", "wiener", "bound_chain",
        "monotonicity", "concavity", "dirichlet", "thomson", "kdm",
    ] {
        assert_eq!(checks[name]["pass"], true, "{name}");
    }
}

#[test]
fn verify_random_points_passes() {
    let out = effop(&["verify", "--geometry", "gen:random:8:3:1", "--random-z", "3", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_needs_points() {
    let out = effop(&["verify", "--geometry", "gen:checkerboard:4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geometry_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", r#"{"d":2,"n":2,"n_phases":2,"phases":[1,2,2,1]}"#);
    let out = effop(&["effective", "--geometry", &good, "--z", "1;1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!((entry(&v, 0, 0).0 - 1.0).abs() < 1e-12);

    let empty = write(dir.path(), "empty.json", r#"{"d":2,"n":2,"n_phases":3,"phases":[1,2,2,1]}"#);
    let out = effop(&["effective", "--geometry", &empty, "--z", "1;1;1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains('3'), "{}", stderr(&out));

    let out = effop(&["effective", "--geometry", "gen:hexagon:4", "--z", "1;1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = effop(&["effective", "--geometry", "gen:checkerboard:4", "--z", "1;1", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn realize_harmonic_pencil() {
    let dir = tempfile::tempdir().unwrap();
    let pencil = write(dir.path(), "p.json", HARMONIC_PENCIL);
    let out = effop(&["realize", "--pencil", &pencil]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["dilation_dim"], 2);
    assert_eq!(v["ranks"], serde_json::json!([1, 1]));
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-8);

    let out = effop(&["realize", "--pencil", &pencil, "--factorization", "sqrt"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["dilation_dim"], 4);
}

#[test]
fn realize_identity_split() {
    // A_1 = I on H0 ⊕ H1 with dim_h1 = 0: the pencil is z_1 I.
    let dir = tempfile::tempdir().unwrap();
    let pencil = write(
        dir.path(),
        "id.json",
        r#"{"n":2,"dim_h0":2,"dim_h1":0,"coeffs":[
          [[[1,0],[0,0]],[[0,0],[0,0]]],
          [[[0,0],[0,0]],[[0,0],[1,0]]]]}"#,
    );
    let out = effop(&["realize", "--pencil", &pencil]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["dilation_dim"], 2);
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn realize_rejects_indefinite_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let pencil = write(
        dir.path(),
        "bad.json",
        r#"{"n":2,"dim_h0":1,"dim_h1":1,"coeffs":[
          [[[1.5,0],[0.5,0]],[[0.5,0],[-0.5,0]]],
          [[[-0.5,0],[-0.5,0]],[[-0.5,0],[1.5,0]]]]}"#,
    );
    let out = effop(&["realize", "--pencil", &pencil]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("coefficient 1"), "{}", stderr(&out));
    let out = effop(&["realize", "--pencil", &pencil, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_deterministic_and_can_go_to_a_file() {
    let args = ["verify", "--geometry", "gen:random:6:3:9", "--random-z", "2", "--seed", "11"];
    let a = effop(&args);
    let b = effop(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let c = effop(&with_out);
    assert_eq!(c.status.code(), Some(0));
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}
