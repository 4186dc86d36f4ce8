//! End-to-end exercise of the `ebbflow` binary: every subcommand, every exit
//! code class.

use std::path::Path;
use std::process::{Command, Output};

fn ebbflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebbflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const HONEST: &str = "n = 4\ndelta = 1\nhorizon = 5\n";

#[test]
fn run_then_check_every_property_on_a_clean_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "honest.toml", HONEST);

    let out = ebbflow(&["run", &scenario, "--trace", "honest.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("honest.jsonl").exists());

    for property in ["safety", "liveness", "reorg-resilience", "ssf", "prefix", "accountability"] {
        let out = ebbflow(&["check", property, "--trace", "honest.jsonl"], tmp.path());
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{property}: {stdout}");
        assert!(stdout.starts_with(&format!("PASS {property}")), "{property}: {stdout}");
    }

    let out = ebbflow(&["slash-scan", "--trace", "honest.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn seed_flag_overrides_the_scenario_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "honest.toml", HONEST);
    ebbflow(&["run", &scenario, "--seed", "9", "--trace", "a.jsonl"], tmp.path());
    ebbflow(&["run", &scenario, "--seed", "9", "--trace", "b.jsonl"], tmp.path());
    ebbflow(&["run", &scenario, "--seed", "10", "--trace", "c.jsonl"], tmp.path());
    let read = |n: &str| std::fs::read(tmp.path().join(n)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
}

#[test]
fn slashable_trace_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(
        tmp.path(),
        "equivocator.toml",
        "n = 4\ndelta = 1\nhorizon = 5\n\
         corruptions = [{ validator = 3, round = 0 }]\n\
         [adversary]\nstrategy = \"head-equivocator\"\n",
    );
    let out = ebbflow(&["run", &scenario, "--trace", "eq.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ebbflow(&["slash-scan", "--trace", "eq.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("FAIL"), "{stdout}");
    assert!(stdout.contains("HeadEquivocation"), "{stdout}");
}

#[test]
fn equivalence_and_compliance_pass_on_a_clean_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "honest.toml", HONEST);
    let out = ebbflow(&["equivalence", &scenario], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = ebbflow(&["compliance", &scenario], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS compliance"));
}

#[test]
fn compliance_fails_on_a_mass_sleep_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(
        tmp.path(),
        "sleepy.toml",
        "n = 4\ndelta = 1\nhorizon = 6\ngat = 16\n\
         sleep = [\n\
           { validator = 0, from = 11, to = 16 },\n\
           { validator = 1, from = 11, to = 16 },\n\
           { validator = 2, from = 11, to = 16 },\n\
           { validator = 3, from = 11, to = 16 },\n\
         ]\n",
    );
    let out = ebbflow(&["compliance", &scenario], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL compliance"));
}

#[test]
fn usage_and_validation_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    // missing subcommand
    assert_eq!(ebbflow(&[], tmp.path()).status.code(), Some(2));
    // nonexistent scenario file
    assert_eq!(ebbflow(&["run", "missing.toml"], tmp.path()).status.code(), Some(2));
    // invalid scenario contents
    let bad = write(tmp.path(), "bad.toml", "n = 0\ndelta = 0\nhorizon = 1\n");
    assert_eq!(ebbflow(&["run", &bad], tmp.path()).status.code(), Some(2));
    // unknown property name
    let scenario = write(tmp.path(), "honest.toml", HONEST);
    ebbflow(&["run", &scenario, "--trace", "t.jsonl"], tmp.path());
    let out = ebbflow(&["check", "bogus", "--trace", "t.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    // malformed trace file
    let junk = write(tmp.path(), "junk.jsonl", "not json\n");
    assert_eq!(
        ebbflow(&["check", "safety", "--trace", &junk], tmp.path()).status.code(),
        Some(2)
    );
}
