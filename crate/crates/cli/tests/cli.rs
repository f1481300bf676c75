use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chanlab::channel::ChannelRecord;
use chanlab::extension::BundleRecord;
use chanlab::verify::VerificationReport;
use chanlab::Channel;

fn chanlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanlab"))
        .current_dir(dir)
        .args(args)
        .env_remove("CHANLAB_SEED")
        .env_remove("CHANLAB_RESTARTS")
        .env_remove("CHANLAB_WORKERS")
        .env_remove("CHANLAB_FORMAT")
        .output()
        .expect("binary runs")
}

fn status(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn save(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

#[test]
fn gen_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanlab(
        dir.path(),
        &[
            "gen", "--din", "2", "--dout", "2", "--env", "4", "--seed", "7", "-o", "phi.json",
        ],
    );
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("phi.json")).unwrap();
    let ch: Channel = serde_json::from_str(&text).unwrap();
    assert!(ch.validate().tp_residual <= 1e-10);
    assert_eq!(save(&ch), text);

    // Same seed, same bytes.
    chanlab(
        dir.path(),
        &[
            "gen",
            "--din",
            "2",
            "--dout",
            "2",
            "--env",
            "4",
            "--seed",
            "7",
            "-o",
            "again.json",
        ],
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("again.json")).unwrap(),
        text
    );
}

#[test]
fn extend_then_validate_bundle() {
    let dir = tempfile::tempdir().unwrap();
    chanlab(
        dir.path(),
        &[
            "gen", "--din", "2", "--dout", "2", "--seed", "7", "-o", "phi.json",
        ],
    );
    let out = chanlab(dir.path(), &["extend", "phi.json", "-o", "bundle.json"]);
    assert_eq!(status(&out), 0);
    let text = fs::read_to_string(dir.path().join("bundle.json")).unwrap();
    let rec: BundleRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(save(&rec), text);
    assert_eq!((rec.d, rec.c), (2, 2));
    assert_eq!(rec.bistochastic.kraus.len(), 16);

    let out = chanlab(dir.path(), &["validate", "bundle.json", "--format", "json"]);
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["channels"][1]["kind"], "bistochastic");
    assert_eq!(v["channels"][2]["kind"], "unital");
}

#[test]
fn exit_status_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chanlab(
        d,
        &[
            "gen", "--din", "2", "--dout", "2", "--seed", "7", "-o", "phi.json",
        ],
    );

    // A channel whose Kraus operators no longer sum to the identity.
    let mut rec: ChannelRecord =
        serde_json::from_str(&fs::read_to_string(d.join("phi.json")).unwrap()).unwrap();
    rec.kraus.pop();
    fs::write(d.join("broken.json"), save(&rec)).unwrap();
    fs::write(d.join("garbage.json"), "{\"label\": \"x\", \"dim_in\": 2,").unwrap();

    let cases: &[(&[&str], i32)] = &[
        (&["validate", "phi.json"], 0),
        (&["validate", "depolarizing:2:0.5"], 0),
        (&["moe", "identity:2", "--restarts", "2"], 0),
        (&["--help"], 0),
        (&["--version"], 0),
        (&["validate", "broken.json"], 1),
        (&["validate", "garbage.json"], 1),
        (&["moe", "broken.json"], 1),
        // A starved optimizer cannot resolve the equality to 2e-4.
        (
            &[
                "verify",
                "--theorem",
                "1-moe",
                "--phi",
                "phi.json",
                "--restarts",
                "1",
                "--max-iter",
                "1",
            ],
            2,
        ),
        (&["frobnicate"], 3),
        (&["moe"], 3),
        (&["pnorm", "identity:2", "--p", "0.5"], 3),
        (&["moe", "nosuch:2"], 3),
        (&["moe", "missing.json"], 3),
        (&["moe", "identity:2", "--restarts", "0"], 3),
        (&["verify", "--theorem", "7", "--phi", "identity:2"], 3),
        (
            &[
                "verify",
                "--theorem",
                "1-moe",
                "--phi",
                "identity:3",
                "--omega",
                "identity:3",
            ],
            3,
        ),
    ];
    for (args, want) in cases {
        let out = chanlab(d, args);
        assert_eq!(
            status(&out),
            *want,
            "{args:?}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn verify_pipeline_passes_on_random_qubit_channel() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chanlab(
        d,
        &[
            "gen", "--din", "2", "--dout", "2", "--env", "4", "--seed", "7", "-o", "phi.json",
        ],
    );
    let out = chanlab(
        d,
        &[
            "verify",
            "--theorem",
            "1-moe",
            "--phi",
            "phi.json",
            "--omega",
            "identity:2",
            "--seed",
            "1",
            "-o",
            "report.json",
        ],
    );
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report =
        VerificationReport::from_json(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!(report.all_asserted_passed());
    assert_eq!(report.config.seed, 1);
    assert!(report.checks.iter().all(|c| !c.anchor.is_empty()));
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for theorem in ["1-moe", "1-ccoe", "3"] {
        let mut outputs = Vec::new();
        for workers in ["1", "8", "1"] {
            let out = chanlab(
                d,
                &[
                    "verify",
                    "--theorem",
                    theorem,
                    "--phi",
                    "depolarizing:2:0.5",
                    "--omega",
                    "amplitude_damping:2:0.3",
                    "--restarts",
                    "8",
                    "--seed",
                    "5",
                    "--workers",
                    workers,
                    "--format",
                    "json",
                ],
            );
            assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(out.stdout);
        }
        assert_eq!(outputs[0], outputs[1], "{theorem}: workers 1 vs 8");
        assert_eq!(outputs[0], outputs[2], "{theorem}: rerun");
    }
}

#[test]
fn env_overrides_defaults_and_artifacts_echo_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chanlab"))
        .current_dir(dir.path())
        .args(["moe", "depolarizing:2:0.5", "--format", "json"])
        .env("CHANLAB_RESTARTS", "3")
        .env("CHANLAB_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(status(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["optimum"]["config"]["restarts"], 3);
    assert_eq!(v["optimum"]["seed"], 42);
    assert!((v["optimum"]["value"].as_f64().unwrap() - 0.5623351).abs() < 1e-6);
}

#[test]
fn pnorm_and_ccoe_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanlab(
        dir.path(),
        &[
            "pnorm",
            "depolarizing:2:0.5",
            "--p",
            "2",
            "--restarts",
            "4",
            "--format",
            "json",
        ],
    );
    assert_eq!(status(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["optimum"]["value"].as_f64().unwrap() - 0.7905694).abs() < 1e-6);
    assert_eq!(v["p"], 2.0);

    let out = chanlab(
        dir.path(),
        &[
            "ccoe",
            "completely_depolarizing:2",
            "--restarts",
            "2",
            "--format",
            "json",
        ],
    );
    assert_eq!(status(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["optimum"]["value"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
    assert_eq!(v["optimum"]["argument"]["kind"], "ensemble");
}
