use std::path::PathBuf;
use std::process::{Command, Output};

fn soppia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soppia"))
        .env_remove("SOPPIA_SCHEMA")
        .env_remove("SOPPIA_STORE")
        .args(args)
        .output()
        .unwrap()
}

fn path(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel).display().to_string()
}

fn shipped_schema() -> String {
    path("../core/schemas/clt_223g.json")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn classify_prints_band_and_third() {
    let out = soppia(&["classify", "--total", "43.8"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "Medium / middle third\n");
    assert_eq!(stdout(&soppia(&["classify", "--total", "69"])), "Very Severe / lower third\n");
    assert_eq!(stdout(&soppia(&["classify", "--total", "14.6"])), "Mild / lower third (below scale)\n");
}

#[test]
fn shipped_schema_validates() {
    let out = soppia(&["schema", "validate", "--in", &shipped_schema()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "OK\n");
}

#[test]
fn schema_export_matches_shipped_file() {
    let out = soppia(&["schema", "export"]);
    assert_eq!(stdout(&out), format!("{}\n", std::fs::read_to_string(shipped_schema()).unwrap()));
}

#[test]
fn invalid_schema_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    let text = std::fs::read_to_string(shipped_schema()).unwrap().replacen("\"1.5\"", "\"-1\"", 1);
    std::fs::write(&file, text).unwrap();
    let out = soppia(&["schema", "validate", "--in", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(stderr(&out).starts_with("error[invalid_schema]: I.weight"), "{}", stderr(&out));
}

#[test]
fn incomplete_case_exits_1() {
    let out = soppia(&["assess", "--case", &path("tests/fixtures/incomplete.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(stderr(&out).contains("case incomplete: missing XII"), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error[incomplete_case]"));
}

#[test]
fn missing_file_exits_2_and_bad_arguments_exit_1() {
    let out = soppia(&["assess", "--case", "/nonexistent/case.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[io_error]"));

    assert_eq!(soppia(&["classify", "--total", "lots"]).status.code(), Some(1));
    assert_eq!(soppia(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(soppia(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_case_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("case.json");
    let text = std::fs::read_to_string(path("tests/fixtures/cases/all-3.json")).unwrap();
    let text = text.replacen("\"presence\": 3", "\"presence\": \"three\"", 1);
    std::fs::write(&file, text).unwrap();
    let out = soppia(&["assess", "--case", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("(field assessments[0].presence)"), "{}", stderr(&out));
}

#[test]
fn assess_formats() {
    let case = path("tests/fixtures/cases/all-3.json");
    let md = stdout(&soppia(&["assess", "--case", &case]));
    assert!(md.starts_with("# Soppia Assessment Report\n"));
    let plain = stdout(&soppia(&["assess", "--case", &case, "--format", "plain"]));
    assert!(plain.contains("Total weighted score: 43.8 points"));
    assert!(!plain.contains("## "));
    let json: serde_json::Value = serde_json::from_str(&stdout(&soppia(&["assess", "--case", &case, "--format", "json"]))).unwrap();
    assert_eq!(json["report"]["final_calculation"]["weighted_total"], "43.8");
}

#[test]
fn schema_env_var_is_default() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("heavier.json");
    let text = std::fs::read_to_string(shipped_schema())
        .unwrap()
        .replacen("\"weight\": \"2.0\"", "\"weight\": \"3.0\"", 1);
    std::fs::write(&file, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_soppia"))
        .env("SOPPIA_SCHEMA", &file)
        .args(["assess", "--format", "plain", "--case", &path("tests/fixtures/cases/all-3.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("Total weighted score: 46.8 points"));
}

#[test]
fn whatif_reports_changes() {
    let case = path("tests/fixtures/cases/all-3.json");
    let out = soppia(&["whatif", "--case", &case, "--set", "III=1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("before: 43.8 points, Medium / middle third"), "{text}");
    assert!(text.contains("after:  48.8 points, Medium / upper third"), "{text}");

    let out = soppia(&["whatif", "--case", &case, "--set-weight", "V=3.0", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["after"]["breakdown"]["weighted_total"], "46.8");
    assert_eq!(json["modified_weights"], true);

    let out = soppia(&["whatif", "--case", &case, "--set", "XIII=2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[unknown_criterion]"));
    assert_eq!(soppia(&["whatif", "--case", &case, "--set", "III"]).status.code(), Some(1));
}

#[test]
fn prompt_render_and_parse() {
    let out = soppia(&["prompt", "render", "--facts", &path("tests/fixtures/facts.txt")]);
    assert_eq!(out.status.code(), Some(0));
    let prompt = stdout(&out);
    assert!(prompt.contains("III - Possibility of recovery & 2.5 & Inverse"));
    assert!(prompt.contains("bank teller"));

    let dir = tempfile::tempdir().unwrap();
    let schema = soppia_core::default_clt_schema();
    let case = soppia_core::testing::uniform_case(&schema, 3);
    let good = dir.path().join("good.txt");
    std::fs::write(&good, soppia_core::synthesize_response(&schema, &case)).unwrap();
    let out = soppia(&["prompt", "parse", "--in", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["computed_total"], "43.8");

    let bad = dir.path().join("bad.txt");
    let text = soppia_core::synthesize_response(&schema, &case).replace("43.8 points", "40 points");
    std::fs::write(&bad, text).unwrap();
    let out = soppia(&["prompt", "parse", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("reported total 40 ≠ computed 43.8"));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["computed_total"], "43.8");
}
