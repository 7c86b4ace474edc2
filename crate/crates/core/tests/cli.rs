use std::fs;
use std::path::Path;

use sl2cocycle::cli::{cmd_cf, cmd_critical_set, cmd_schrodinger, Outcome};
use sl2cocycle::config::RunConfig;
use sl2cocycle::Error;

const BUILDER: &str = r#"{
    "omega": { "builder": { "c_omega": "10", "c_eps": "3", "c_delta": "0.5", "gamma": "0.5",
                            "depth": 5, "prefix": [3] } },
    "phases": [ { "phi_hat": { "constant": "1.0", "sin": ["0.3"] },
                  "lambda_hat": { "constant": "1.0" } } ],
    "epsilon": { "lo": "0.12", "hi": "0.2", "points": 5 }
}"#;

fn golden(extra: &str) -> String {
    let ones = vec!["1"; 40].join(",");
    format!(
        r#"{{ "omega": {{ "quotients": "{ones}" }},
             "condition_a": {{ "c_omega": "10", "c_eps": "3", "c_delta": "0.5", "gamma": "0.5" }}{extra} }}"#
    )
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn cf_reports_the_growth_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(BUILDER).unwrap();
    let report = cmd_cf(&cfg, dir.path()).unwrap();
    assert_eq!(report.outcome, Outcome::Pass);
    let csv = read(dir.path(), "convergents.csv");
    let header = csv.lines().next().unwrap();
    assert!(header.ends_with("config_hash,precision_bits"), "{header}");
    assert!(csv.contains(",52,"), "q_2 = 52 missing:\n{csv}");
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "condition_a.json")).unwrap();
    assert_eq!(json["precision_bits"], 53);
    assert_eq!(json["data"]["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(&golden("")).unwrap();
    assert_eq!(cmd_cf(&cfg, dir.path()).unwrap().outcome, Outcome::Fail);
}

#[test]
fn critical_set_refuses_without_the_growth_condition() {
    let text = golden(
        r#", "phases": [ { "phi_hat": { "constant": "1.0", "sin": ["0.3"] }, "lambda_hat": { "constant": "1.0" } } ],
            "epsilon": { "lo": "0.12", "hi": "0.2", "points": 3 }"#,
    );
    let cfg = RunConfig::from_json(&text).unwrap();
    let err = cmd_critical_set(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert!(matches!(err, Error::ConditionA(_)), "{err}");
}

#[test]
fn critical_set_writes_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(BUILDER).unwrap();
    cmd_critical_set(&cfg, dir.path()).unwrap();
    let points = read(dir.path(), "critical_points.csv");
    assert!(points.lines().count() > 1);
    let status = read(dir.path(), "status.csv");
    assert_eq!(status.lines().count(), 6);
}

#[test]
fn schrodinger_refuses_sign_definite_potentials() {
    let text = golden(r#", "potential": { "constant": "2", "terms": [ { "j1": 0, "j2": 1, "cos": "1" } ] }"#);
    let cfg = RunConfig::from_json(&text).unwrap();
    let err = cmd_schrodinger(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert!(err.to_string().contains("sign"), "{err}");
}

#[test]
fn config_errors_point_at_the_problem() {
    let err = RunConfig::from_json(&golden(r#", "epsilom": { "lo": "0.1", "hi": "0.2", "points": 3 }"#)).unwrap_err();
    assert!(err.to_string().contains("epsilom"), "{err}");

    let err = RunConfig::from_json(&golden(",\n \"epsilon\": { \"lo\": 0.1, \"hi\": \"0.2\", \"points\": 3 }")).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");

    let err = RunConfig::from_json(&golden(r#", "epsilon": { "lo": "0", "hi": "0.2", "points": 3 }"#)).unwrap_err();
    assert!(err.to_string().contains("above 0"), "{err}");

    let err = RunConfig::from_json(&golden(r#", "precision_bits": 300"#)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn hash_ignores_the_output_directory() {
    let a = RunConfig::from_json(BUILDER).unwrap();
    let mut b = a.clone();
    b.output = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.seed = a.seed + 1;
    assert_ne!(a.hash(), c.hash());
}
