use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use bridge_glmm::cli::{cli_dispatch_with, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("bridge-glmm").chain(args.iter().copied()).map(OsString::from);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli_dispatch_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(stdout: &str) -> Value {
    serde_json::from_str(stdout).unwrap_or_else(|e| panic!("not JSON ({e}): {stdout}"))
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = run(&["fit", "--bogus"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--bogus"));
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for command in ["fit", "fit-bahadur", "fit-gee", "simulate", "tau-curve", "compare"] {
        assert!(out.contains(command), "help lacks {command}");
    }
}

#[test]
fn missing_file_is_a_data_error() {
    let (code, _, err) = run(&["fit-gee", "--data", "/no/such/file.csv"]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("/no/such/file.csv"), "{err}");
}

#[test]
fn two_occasions_with_free_phi_are_refused() {
    let (code, out, err) = run(&["fit", "--data", &data("two_occasions.csv"), "--covariates", "x"]);
    assert_eq!(code, EXIT_DATA);
    assert!(out.is_empty());
    assert!(err.contains("not identified"), "{err}");
}

#[test]
fn gee_envelope() {
    let (code, out, err) = run(&["fit-gee", "--data", &data("excerpt.csv"), "--covariates", "time,hiv"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "fit-gee");
    assert_eq!(v["tool"]["name"], "bridge-glmm");
    let names: Vec<&str> = v["result"]["fit"]["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["intercept", "time", "hiv"]);
    assert_eq!(v["result"]["data"]["subjects"], 11);
    // Without --output the text table goes to stderr.
    assert!(err.contains("robust.se"));
}

#[test]
fn output_file_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gee.json");
    let p = path.to_str().unwrap();
    let (code, out, _) = run(&["fit-gee", "--data", &data("excerpt.csv"), "--covariates", "time,hiv", "--output", p]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("robust.se"));
    let v = json(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(v["command"], "fit-gee");
}

#[test]
fn single_intercept_bridge_fit() {
    let args = [
        "fit",
        "--data",
        &data("excerpt.csv"),
        "--covariates",
        "time,hiv",
        "--structure",
        "single",
        "--seed",
        "3",
    ];
    let (code, out, err) = run(&args);
    assert!(code == EXIT_OK || code == 3, "{err}");
    let v = json(&out);
    assert_eq!(v["seed"], 3);
    let (_, again, _) = run(&args);
    assert_eq!(out, again);
}

#[test]
fn tau_curve_columns() {
    let (code, out, err) = run(&["tau-curve", "--pairs", "2000", "--phi", "0.5", "--seed", "9"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    let columns = &v["result"]["columns"];
    let n = columns["tau_b"].as_array().unwrap().len();
    assert_eq!(n, 19);
    for key in ["phi", "tau_y", "tau_y_b", "gamma_y"] {
        assert_eq!(columns[key].as_array().unwrap().len(), n, "{key}");
    }
}

#[test]
fn simulate_small_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.scenario");
    std::fs::write(
        &path,
        "name = tiny\ntrue_model = bahadur\nn_subjects = 30\nassoc = 0.2\nreplications = 2\nestimators = gee\n",
    )
    .unwrap();
    let (code, out, err) = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    assert_eq!(v["result"]["scenario"]["name"], "tiny");
    let cells = v["result"]["report"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    assert!(cells.iter().all(|c| c["estimator"] == "gee" && c["replications"] == 2));
}

#[test]
fn bad_scenario_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scenario");
    std::fs::write(&path, "name = bad\nn_subjects = many\n").unwrap();
    let (code, _, err) = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("line 2"), "{err}");
}
