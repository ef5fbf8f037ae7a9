use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmp"))
}

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn with_input(cmd: &str, name: &str) -> Output {
    let p = instance(name);
    run(&[cmd, "--input", p.to_str().unwrap()])
}

#[test]
fn shipped_instances_are_current() {
    use rmp_core::{channel, instances, Instance};
    let items: Vec<(&str, Instance)> = vec![
        ("w_state.json", instances::w_instance().unwrap().into()),
        ("white_noise.json", instances::white_noise_instance().unwrap().into()),
        ("monogamy.json", instances::monogamy_instance().unwrap().into()),
        ("broadcasting.json", channel::broadcasting_instance().unwrap().into()),
    ];
    for (name, inst) in items {
        let on_disk = std::fs::read_to_string(instance(name)).unwrap();
        assert_eq!(on_disk, inst.to_json().unwrap() + "\n", "{name} is stale");
    }
}

#[test]
fn robustness_of_w_marginals_is_positive() {
    let v = json_of(&with_input("robustness", "w_state.json"));
    assert_eq!(v["kind"], "state");
    assert_eq!(v["result"]["status"], "Optimal");
    assert!(v["result"]["value_log2"].as_f64().unwrap() > 0.06);
    assert_eq!(v["certificates"].as_array().unwrap().len(), 2);
    assert_eq!(v["provenance"]["relaxation"]["name"], "ppt-outer");
}

#[test]
fn robustness_of_compatible_instance_is_zero() {
    let v = json_of(&with_input("robustness", "white_noise.json"));
    assert!(v["result"]["value_log2"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn malformed_json_exits_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\n  \"type\": \"state\",\n  \"layout\": [}\n").unwrap();
    let out = run(&["robustness", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column"), "{err}");
}

#[test]
fn invalid_instance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let text = std::fs::read_to_string(instance("w_state.json"))
        .unwrap()
        .replace("\"A\",\n    \"C\"", "\"A\",\n    \"Z\"");
    std::fs::write(&p, text).unwrap();
    let out = run(&["robustness", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(run(&["robustness"]).status.code() == Some(2));
}

#[test]
fn solver_failure_exits_three() {
    let p = instance("w_state.json");
    let out = run(&[
        "robustness",
        "--input",
        p.to_str().unwrap(),
        "--gap-tol",
        "1e-300",
        "--feas-tol",
        "1e-300",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn witnesses_for_three_regression_instances() {
    for name in ["w_state.json", "monogamy.json", "broadcasting.json"] {
        let v = json_of(&with_input("witness", name));
        assert!(v["gap"].as_f64().unwrap() >= 1e-4, "{name}");
    }
    let out = with_input("witness", "white_noise.json");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no witness"));
}

#[test]
fn discrimination_has_advantage() {
    for name in ["w_state.json", "broadcasting.json"] {
        let v = json_of(&with_input("discriminate", name));
        assert!(v["advantage"]["delta_p"].as_f64().unwrap() > 0.0, "{name}");
        assert!(v["epsilon"].as_f64().unwrap() > 0.0);
        assert!(v["provenance"]["seed"].is_u64());
    }
}

#[test]
fn check_compat_answers() {
    let cases = [
        ("white_noise.json", true),
        ("w_state.json", false),
        ("monogamy.json", false),
        ("broadcasting.json", false),
    ];
    for (name, want) in cases {
        let v = json_of(&with_input("check-compat", name));
        assert_eq!(v["compatible"].as_bool(), Some(want), "{name}");
        assert!(v["certificate"].is_object());
    }
}

#[test]
fn channel_robustness_requires_channels() {
    let v = json_of(&with_input("channel-robustness", "broadcasting.json"));
    assert!(v["result"]["value_log2"].as_f64().unwrap() > 0.01);
    assert_eq!(with_input("channel-robustness", "w_state.json").status.code(), Some(2));
}

#[test]
fn histogram_single_sample_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run(&[
        "histogram",
        "--samples",
        "1",
        "--seed",
        "3",
        "--output",
        a.to_str().unwrap(),
    ]);
    let summary = json_of(&out);
    assert_eq!(summary["summary"]["n"], 1);
    assert_eq!(summary["provenance"]["seed"], 3);
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("sample_index,delta_p\n0,"));

    for (path, jobs) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "histogram",
            "--samples",
            "6",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(run(&["histogram", "--samples", "0"]).status.code(), Some(2));
}

#[test]
fn histogram_thousand_samples_mean() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("h.csv");
    let out = run(&[
        "histogram",
        "--samples",
        "1000",
        "--seed",
        "2024",
        "--output",
        a.to_str().unwrap(),
    ]);
    let mean = json_of(&out)["summary"]["mean"].as_f64().unwrap();
    assert!((mean - 0.0066818).abs() <= 0.0005, "{mean}");
}

#[test]
fn verify_w_reports_uniqueness() {
    let v = json_of(&run(&["verify-w"]));
    assert_eq!(v["unique"], true);
    assert!((v["activation_at_identity"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(v["activation_searched"].as_f64().unwrap() >= 2.0 / 3.0 - 1e-12);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("r.json");
    let p = instance("w_state.json");
    let out = run(&[
        "check-compat",
        "--input",
        p.to_str().unwrap(),
        "--output",
        o.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(o).unwrap()).unwrap();
    assert_eq!(v["compatible"], false);
}
