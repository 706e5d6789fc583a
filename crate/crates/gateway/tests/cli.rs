mod common;

use std::path::Path;
use std::process::Command;

use metis_core::samples;
use metis_core::sim::results_from_log;
use metis_core::world::save_scenario;
use metis_gateway::cli::{run, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};

fn metis(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("metis").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_missing_exit() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = samples::single_room();
    for d in &mut s.doors {
        d.exit = false;
    }
    let path = dir.path().join("broken.json");
    std::fs::write(&path, save_scenario(&s)).unwrap();
    let (code, out, _) = metis(&["validate", p(&path)]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(out.contains("MissingExit"), "{out}");

    common::write_scenario(&dir.path().join("ok.json"), "case_study");
    let (code, out, _) = metis(&["validate", p(&dir.path().join("ok.json"))]);
    assert_eq!((code, out.trim()), (EXIT_OK, "ok"));
}

#[test]
fn unreadable_scenario_is_a_domain_error() {
    let (code, _, err) = metis(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(!err.is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_metis"))
        .args(["validate", "x.json", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--frobnicate") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_end_and_injection_specs_are_usage_errors() {
    let (code, _, _) = metis(&["simulate", "s.json", "--policy", "p", "--log", "l", "--end", "forever"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = metis(&["simulate", "s.json", "--policy", "p", "--log", "l", "--inject", "x:1,2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn simulate_is_repeatable_and_results_account_for_everyone() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("case.json");
    let policy = dir.path().join("policy.ckpt");
    common::write_scenario(&scenario, "case_study");
    common::write_policy(&policy);

    let mut logs = Vec::new();
    for i in 0..2 {
        let log = dir.path().join(format!("run{i}.ndjson"));
        let (code, _, err) = metis(&[
            "simulate", p(&scenario), "--policy", p(&policy), "--seed", "7",
            "--end", "time_limit:20", "--inject", "40:10,8:2", "--log", p(&log),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        logs.push(std::fs::read(&log).unwrap());
    }
    assert_eq!(logs[0], logs[1]);

    let log = dir.path().join("run0.ndjson");
    let (code, out, _) = metis(&["results", p(&log)]);
    assert_eq!(code, EXIT_OK);
    let field = |name: &str| -> u32 {
        let line = out.lines().find(|l| l.starts_with(&format!("{name}:"))).unwrap();
        line.split(':').nth(1).unwrap().trim().parse().unwrap()
    };
    assert_eq!(field("total"), 25);
    assert_eq!(field("survived") + field("died") + field("unresolved"), 25);
    assert!(out.contains("end_reason: time_limit"), "{out}");

    let (code, out, _) = metis(&["results", p(&log), "--json"]);
    assert_eq!(code, EXIT_OK);
    let text = String::from_utf8(logs[0].clone()).unwrap();
    let parsed: metis_core::sim::SimResults = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(parsed, results_from_log(&text).unwrap());
    assert!(text.contains("\"fire_injected\""));
}

#[test]
fn results_on_unfinished_log_fails() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("partial.ndjson");
    std::fs::write(&log, "{\"format\":\"metis-events\",\"version\":1,\"seed\":0,\"scenario_id\":\"x\"}\n").unwrap();
    let (code, _, err) = metis(&["results", p(&log)]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("sim_ended"), "{err}");
}

#[test]
fn train_writes_checkpoint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("room.json");
    let config = dir.path().join("train.toml");
    let ckpt = dir.path().join("policy.ckpt");
    let metrics = dir.path().join("metrics.jsonl");
    let (code, _, _) = metis(&["sample", "single_room", "--out", p(&scenario)]);
    assert_eq!(code, EXIT_OK);
    std::fs::write(
        &config,
        "[trainer]\ntotal_steps = 256\nnum_parallel_agents = 4\nrollout_horizon = 32\nminibatch_size = 64\nhidden_width = 16\n",
    )
    .unwrap();
    let args = ["train", p(&scenario), "--config", p(&config), "--out", p(&ckpt), "--metrics", p(&metrics)];
    let (code, _, err) = metis(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&metrics)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["step"], 256);
    metis_core::ppo::Policy::from_bytes(&std::fs::read(&ckpt).unwrap()).unwrap();

    std::fs::write(&config, "[trainer]\ngamma = 2.0\n").unwrap();
    let (code, _, err) = metis(&args);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn sample_rejects_unknown_names() {
    let (code, _, _) = metis(&["sample", "castle"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = metis(&["sample", "single_room"]);
    assert_eq!(code, EXIT_OK);
    metis_core::world::load_scenario(out.as_bytes()).unwrap();
}

#[test]
fn serve_fails_when_port_is_taken() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = metis(&["serve", "--addr", &addr, "--data", p(dir.path())]);
    assert_eq!(code, EXIT_DOMAIN);
}
