use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn wigcorr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wigcorr"))
        .current_dir(dir)
        .env_remove("WIGCORR_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn identities_pass_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = wigcorr(dir.path(), &["identities", "--smax", "100", "--out", "id.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json_file(&dir.path().join("id.json"));
    assert_eq!(doc["kind"], "identities");
    assert_eq!(doc["pass"], true);
    assert!(dir.path().join("id.json.manifest.json").exists());
}

#[test]
fn degenerate_regime_is_rejected_and_explicit_s_recovers_one_eighth() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["montecarlo", "--n", "1", "--chi1", "0.9", "--chi2", "0.9", "--law", "gaussian", "--samples", "50000"];
    let out = wigcorr(dir.path(), &base);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("explicit s"), "{}", stderr(&out));

    let mut args = base.to_vec();
    args.extend(["--s", "1", "--out", "k.json"]);
    let out = wigcorr(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json_file(&dir.path().join("k.json"));
    let law = &doc["per_law"][0];
    let (k, se) = (law["K_mean"].as_f64().unwrap(), law["K_stderr"].as_f64().unwrap());
    assert!((k - 0.125).abs() <= 3.0 * se, "{k} ± {se}");
    assert_eq!(doc["comparisons"].as_array().unwrap().len(), 0);
}

#[test]
fn majorant_margins_are_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let out = wigcorr(dir.path(), &["majorant", "--n", "10", "--s0", "4", "--h", "1/8", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json_file(&dir.path().join("m.json"));
    let checks = doc["reports"][0]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(!c["margin"].as_str().unwrap().starts_with('-'), "{c}");
    }
}

#[test]
fn error_categories_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let domain = wigcorr(dir.path(), &["majorant", "--n", "4", "--check", "moment-bound", "--h", "1/16"]);
    assert_eq!(domain.status.code(), Some(4));
    let capacity = wigcorr(dir.path(), &["paths", "--n", "4", "--s1", "1", "--s2", "1"]);
    assert_eq!(capacity.status.code(), Some(3));
    let regime = wigcorr(dir.path(), &["majorant", "--n", "2", "--s0", "4"]);
    assert_eq!(regime.status.code(), Some(4));
    let usage = wigcorr(dir.path(), &["oracle", "--bogus"]);
    assert_eq!(usage.status.code(), Some(2));
    let failed = wigcorr(dir.path(), &["majorant", "--n", "8", "--check", "moment-bound", "--h", "1/13"]);
    assert_eq!(failed.status.code(), Some(7));
}

#[test]
fn manifest_rerun_reproduces_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["montecarlo", "--n", "12", "--law", "gaussian", "--law", "rademacher", "--samples", "300", "--seed", "9"];
    let mut first = args.to_vec();
    first.extend(["--workers", "2", "--out", "a.json"]);
    assert!(wigcorr(dir.path(), &first).status.success());

    let manifest = json_file(&dir.path().join("a.json.manifest.json"));
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["task_seeds"].as_array().unwrap().len(), 2);
    let bytes = fs::read(dir.path().join("a.json")).unwrap();
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["outputs"][0]["sha256"], digest.as_str());

    let out = wigcorr(dir.path(), &["--from-manifest", "a.json.manifest.json", "--workers", "3", "--out", "b.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(bytes, fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn sweep_csv_has_one_row_per_point_and_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = wigcorr(
        dir.path(),
        &["universality", "--n", "10", "--n", "20", "--chi", "1/20", "--samples", "200", "--format", "csv"],
    );
    assert!(out.status.code() == Some(0) || out.status.code() == Some(7), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,chi1,chi2,s1,s2,law,K_mean,K_stderr,excluded");
    assert_eq!(lines.len(), 1 + 2 * 3);
}

#[test]
fn report_merges_sections_and_copies_values_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    assert!(wigcorr(dir.path(), &["identities", "--smax", "20", "--rmax", "10", "--out", "id.json"]).status.success());
    let mc = ["montecarlo", "--n", "6", "--s", "1", "--samples", "200", "--r-terms", "--out", "mc.json"];
    assert!(wigcorr(dir.path(), &mc).status.success());
    assert!(wigcorr(dir.path(), &["oracle", "--n", "2", "--table", "d", "--smax", "2", "--out", "or.json"]).status.success());

    let out = wigcorr(dir.path(), &["report", "*.json", "--format", "json", "--out", "summary.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = json_file(&dir.path().join("summary.json"));
    // manifests next to the results are not picked up by the wildcard
    assert_eq!(summary["files"].as_array().unwrap().len(), 3);

    let out = wigcorr(dir.path(), &["report", "id.json", "mc.json", "or.json", "--format", "json", "--out", "summary.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = json_file(&dir.path().join("summary.json"));
    for section in summary["sections"].as_array().unwrap() {
        let file = section["file"].as_str().unwrap();
        let raw = fs::read_to_string(dir.path().join(file)).unwrap();
        let raw: Value = serde_json::from_str(&raw).unwrap();
        let values = section["values"].as_object().unwrap();
        assert!(!values.is_empty());
        for (path, shown) in values {
            let original = lookup(&raw, path);
            let expected = match original {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            assert_eq!(shown.as_str().unwrap(), expected, "{file}: {path}");
        }
    }
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["sections"][1]["values"]["comparisons"], Value::Null);

    let text = wigcorr(dir.path(), &["report", "id.json", "mc.json"]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("## identities: id.json") && text.contains("## montecarlo: mc.json"));
}

/// Follows a `a.b[2].c` path produced by the report flattening.
fn lookup<'a>(doc: &'a Value, path: &str) -> &'a Value {
    let mut cur = doc;
    for part in path.split('.') {
        let (key, indices) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !key.is_empty() {
            cur = &cur[key];
        }
        for idx in indices.split('[').filter(|s| !s.is_empty()) {
            cur = &cur[idx.trim_end_matches(']').parse::<usize>().unwrap()];
        }
    }
    cur
}

#[test]
fn report_flags_failures_and_names_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let failed = wigcorr(dir.path(), &["majorant", "--n", "8", "--check", "moment-bound", "--h", "1/13", "--out", "bad.json"]);
    assert_eq!(failed.status.code(), Some(7));
    let out = wigcorr(dir.path(), &["report", "bad.json"]);
    assert_eq!(out.status.code(), Some(7));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("## Failed checks") && text.contains("moment_bound[1].pass"), "{text}");

    fs::write(dir.path().join("broken.json"), "{\"kind\": \"identities\", ").unwrap();
    let out = wigcorr(dir.path(), &["report", "bad.json", "broken.json"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("broken.json"));

    fs::write(dir.path().join("other.json"), "{\"hello\": 1}").unwrap();
    let out = wigcorr(dir.path(), &["report", "other.json"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("other.json"));
}
