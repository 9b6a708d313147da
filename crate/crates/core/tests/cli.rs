mod common;

use ris_isac::cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["ris-isac"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn small_config(dir: &std::path::Path) -> String {
    let text = std::fs::read_to_string(common::config_path())
        .unwrap()
        .replace("ris_legit = [12, 12]", "ris_legit = [3, 3]")
        .replace("ris_malicious = [12, 12]", "ris_malicious = [3, 3]")
        .replace("randomization_samples = 1000", "randomization_samples = 50");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn validate_reference_config() {
    let path = common::config_path().display().to_string();
    let (code, out, _) = call(&["validate", "--config", &path]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("ok"));
}

#[test]
fn validate_missing_file_is_runtime_error() {
    let (code, _, err) = call(&["validate", "--config", "/nonexistent.toml"]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("error"));
}

#[test]
fn unknown_preset_lists_the_presets() {
    let path = common::config_path().display().to_string();
    let (code, _, err) = call(&["run", "--config", &path, "--preset", "fig42"]);
    assert_eq!(code, EXIT_USAGE);
    for name in ris_isac::harness::preset_names() {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(call(&["run", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(call(&[]).0, EXIT_USAGE);
    assert_eq!(call(&["run", "--config", "x", "--preset", "fig3", "--trials", "many"]).0, EXIT_USAGE);
    assert_eq!(call(&["run", "--config", "x", "--preset", "fig3", "--trials", "0"]).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
}

#[test]
fn presets_are_listed() {
    let (code, out, _) = call(&["presets"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), ris_isac::harness::presets().len());
}

#[test]
fn run_writes_outputs_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, stdout, err) = call(&[
            "run", "--config", &cfg, "--preset", "custom", "--trials", "2", "--seed", "7", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(stdout.contains("2 rows"));
    }
    for f in ["results.csv", "aggregates.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let hash = |d: &std::path::Path| {
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m["content_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn offset_sweep_needs_positions() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(common::config_path()).unwrap();
    let start = text.find("[geometry]").unwrap();
    let end = text.find("[experiment]").unwrap();
    let direct = "[geometry.direct]\nd_legit_m = 30\nd_eaves_m = 50\naod_legit_deg = [-140, -10]\n\
                  aod_eaves_deg = [-160, -5]\nuser_distance_legit_m = [10, 11, 12, 13]\n\
                  user_distance_malicious_m = [30, 31, 32, 33]\n\
                  user_aod_legit_deg = [[10, 60], [20, 60], [30, 60], [40, 60]]\n\
                  user_aod_malicious_deg = [[0, 20], [5, 20], [10, 20], [15, 20]]\n";
    let path = dir.path().join("direct.toml");
    std::fs::write(&path, format!("{}{}\n{}", &text[..start], direct, &text[end..])).unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = call(&[
        "run", "--config", path.to_str().unwrap(), "--preset", "fig7", "--trials", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_RUNTIME, "{err}");
}
