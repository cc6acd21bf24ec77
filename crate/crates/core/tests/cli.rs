use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn smilewa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smilewa")).args(args).output().expect("failed to run smilewa")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sigma_column(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
}

const FLAT: &str = r#"{"family":"flat","params":{"c":0.2}}"#;
const W_SHAPE: &str = r#"{"tilde_delta":0.7,"family":"w_shape","params":{"hat_delta":0.02,"hat_hat_delta":0.9}}"#;
const SSVI: &str = r#"{"ssvi":{"theta":0.04,"phi":1.0,"rho":-0.3}}"#;
const LEE_BREAKING: &str = r#"{"svi":{"a":0.01,"b":1.5,"rho":0.5,"m":0.0,"sigma_bar":0.1}}"#;
const PILLARS: &str = "k,sigma\n-0.4,0.2537\n-0.2,0.2238\n0.0,0.2\n0.2,0.1844\n0.4,0.1779\n";

#[test]
fn convert_flat_params() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.json", FLAT);
    let out = smilewa(&["convert", "--input", &input]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,k,sigma_total"));
    assert_eq!(text.lines().count(), 402);
    assert!(sigma_column(&text).iter().all(|s| (s - 0.2).abs() < 1e-9));
}

#[test]
fn convert_w_shape_has_two_minima() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "w.json", W_SHAPE);
    let output = dir.path().join("w.csv");
    let out = smilewa(&["convert", "--input", &input, "--output", output.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = sigma_column(&fs::read_to_string(&output).unwrap());
    let mins = v.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count();
    assert_eq!(mins, 2);
}

#[test]
fn json_grid_and_grid_size() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.json", FLAT);
    let out = smilewa(&["convert", "--input", &input, "--format", "json", "--grid-n", "11"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["delta"].as_array().unwrap().len(), 11);
    assert_eq!(v["sigma_total"].as_array().unwrap().len(), 11);
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "k,sigma\n-0.1,0.2\n0.0,0.2\n0.1,oops\n");
    let out = smilewa(&["convert", "--input", &input]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.starts_with("code=parse") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_input_is_an_io_error() {
    let out = smilewa(&["convert", "--input", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("code=io"));
}

#[test]
fn usage_errors_do_not_look_like_check_failures() {
    let out = smilewa(&["convert", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(stderr(&out).starts_with("code=usage"));
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.json", FLAT);
    let out = smilewa(&["convert", "--input", &input, "--grid-n", "2"]);
    assert_eq!(out.status.code(), Some(64));
    let out = smilewa(&["convert", "--input", &input, "--maturity", "-1"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn check_passes_ssvi() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ssvi.json", SSVI);
    let report = dir.path().join("report.json");
    let out = smilewa(&["check", "--input", &input, "--output", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert!((v["tilde_delta"].as_f64().unwrap() - 0.579_498_972_525).abs() < 1e-8);
    assert!(v["durrleman"]["min_value"].as_f64().is_some());
    assert_eq!(v["wings"].as_array().unwrap().len(), 2);
}

#[test]
fn check_flags_lee_violation_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "lee.json", LEE_BREAKING);
    let report = dir.path().join("report.json");
    let out = smilewa(&["check", "--input", &input, "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("code=membership"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["fukasawa"]["lee_right_ok"], false);
    let out = smilewa(&["convert", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn svi_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ssvi.json", SSVI);
    let out = smilewa(&["svi", "--input", &input]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["tilde_k"].as_f64().unwrap() - -0.020_122_566_552_873_554).abs() < 1e-12);
    assert!((v["wing_slopes"][0].as_f64().unwrap() - 0.026).abs() < 1e-12);
}

#[test]
fn calibrate_writes_grid_and_report_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pillars.csv", PILLARS);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let grid = dir.path().join(format!("grid{run}.csv"));
        let out = smilewa(&[
            "calibrate", "--input", &input, "--output", grid.to_str().unwrap(), "--family", "bounded_skew", "--seed", "4",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let report = fs::read_to_string(dir.path().join(format!("grid{run}.report.json"))).unwrap();
        outputs.push((fs::read(&grid).unwrap(), report));
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: serde_json::Value = serde_json::from_str(&outputs[0].1).unwrap();
    assert_eq!(v["method"], "wa_fit");
    assert_eq!(v["residuals"].as_array().unwrap().len(), 5);
    assert_eq!(v["params"]["family"], "bounded_skew");
}

#[test]
fn calibrate_interpolation_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pillars.csv", PILLARS);
    let out = smilewa(&["calibrate", "--input", &input, "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["method"], "l_interp");
    for r in v["report"]["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap().abs() <= 1e-10);
    }
    assert_eq!(v["grid"]["k"].as_array().unwrap().len(), 401);
}

#[test]
fn calibration_failures_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inverted = write(dir.path(), "inv.csv", "k,sigma\n-0.2,0.2\n0,0.2\n0.01,0.5\n0.3,0.2\n");
    let out = smilewa(&["calibrate", "--input", &inverted]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).starts_with("code=data"));
    let tiny = write(dir.path(), "tiny.csv", "delta,sigma\n0.2,0.3\n0.4,0.001\n0.6,0.004\n0.8,0.3\n");
    let out = smilewa(&["calibrate", "--input", &tiny]);
    assert_eq!(out.status.code(), Some(7));
    assert!(stderr(&out).contains("l(1/2)<0"));
    let good = write(dir.path(), "p.csv", PILLARS);
    let out = smilewa(&["calibrate", "--input", &good, "--family", "heston"]);
    assert_eq!(out.status.code(), Some(64));
}
