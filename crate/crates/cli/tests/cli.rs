use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nlqec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlqec")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn without_wall_time(report: &str) -> String {
    report.lines().filter(|l| !l.contains("\"wall_time_s\"")).collect::<Vec<_>>().join("\n")
}

fn emit(name: &str) -> Value {
    let out = nlqec(&["--emit-config", name]);
    assert_eq!(code(&out), 0);
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn write_json(dir: &Path, file: &str, v: &Value) -> String {
    let p = dir.join(file);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(args: &[&str]) -> (i32, Value) {
    let out = nlqec(args);
    let text = stdout(&out);
    (code(&out), serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}")))
}

#[test]
fn exact_scenario_exits_zero() {
    let (c, r) = report(&["check", "--scenario", "example1_coherent"]);
    assert_eq!(c, 0);
    assert_eq!(r["verdict"]["class"], "exact");
    assert!(r["criterion"]["residual_rel"].as_f64().unwrap() <= 1e-8);
    assert!(r.get("recovery").is_none());
}

#[test]
fn small_alpha_squeezing_is_approximate() {
    let (c, r) = report(&["check", "--scenario", "example3_squeezed_small_alpha"]);
    assert_eq!(c, 2);
    let res = r["criterion"]["residual_rel"].as_f64().unwrap();
    assert!(res > 1e-8 && res <= 0.75, "{res}");
}

#[test]
fn residual_above_ceiling_fails() {
    let dir = TempDir::new().unwrap();
    let mut cfg = emit("example3_squeezed_small_alpha");
    cfg["approx_ceiling"] = 0.01.into();
    let path = write_json(dir.path(), "c.json", &cfg);
    let (c, r) = report(&["recover", "--config", &path]);
    assert_eq!(c, 1);
    assert_eq!(r["verdict"]["class"], "fail");
    assert!(r.get("recovery").is_none());
}

#[test]
fn config_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"name\": \"x\", ").unwrap();
    assert_eq!(code(&nlqec(&["check", "--config", bad.to_str().unwrap()])), 64);

    let mut cfg = emit("example1_coherent");
    cfg["channel"]["simplified_loss"]["extra"] = 1.into();
    let path = write_json(dir.path(), "unknown.json", &cfg);
    assert_eq!(code(&nlqec(&["check", "--config", &path])), 64);

    let mut cfg = emit("example1_coherent");
    cfg["alphabet"]["sampler"]["explicit"]["points"][0][0] = 9.0.into();
    let path = write_json(dir.path(), "domain.json", &cfg);
    assert_eq!(code(&nlqec(&["check", "--config", &path])), 64);

    assert_eq!(code(&nlqec(&["check", "--scenario", "no_such"])), 64);
    assert_eq!(code(&nlqec(&["check"])), 64);
    assert_eq!(code(&nlqec(&[])), 64);
    assert_eq!(code(&nlqec(&["check", "--bogus"])), 64);
}

#[test]
fn numerical_failure_exits_70() {
    let dir = TempDir::new().unwrap();
    let mut cfg = emit("appendixF_damping");
    cfg["alphabet"]["sampler"]["explicit"]["points"] = serde_json::json!([[1.0, 0.0]]);
    let path = write_json(dir.path(), "one.json", &cfg);
    assert_eq!(code(&nlqec(&["check", "--config", &path])), 70);
}

#[test]
fn fixed_phase_recovery_is_perfect() {
    let (c, r) = report(&["recover", "--scenario", "example2_dephasing_fixedphase"]);
    assert_eq!(c, 0);
    let rec = &r["recovery"];
    for f in rec["fidelities"].as_array().unwrap() {
        assert!((1.0 - f["fidelity"].as_f64().unwrap()).abs() <= 1e-12);
    }
    assert!(rec["trace_gap"].as_f64().unwrap() <= 1e-10);
    assert!(rec["mixed_state_defect"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn cat_odd_branch_fidelity() {
    let (_, r) = report(&["recover", "--scenario", "example4_cat"]);
    let first = &r["recovery"]["fidelities"][0];
    assert_eq!(first["params"][0].as_f64(), Some(4.0));
    let odd = first["branch"][1].as_f64().unwrap();
    assert!((odd - 0.984375).abs() <= 2e-3, "{odd}");
}

#[test]
fn damping_scenario_keeps_fidelity() {
    let (_, r) = report(&["recover", "--scenario", "appendixF_damping"]);
    assert_eq!(r["config"]["channel"]["amplitude_damping"]["gamma"].as_f64(), Some(0.99));
    assert_eq!(r["samples"]["params"][0][0].as_f64(), Some(1.0));
    assert!(r["recovery"]["min_fidelity"].as_f64().unwrap() >= 0.999);
}

#[test]
fn emitted_configs_reproduce_builtins() {
    let dir = TempDir::new().unwrap();
    for name in ["example1_coherent", "example2_dephasing_dfs", "kl_repetition3"] {
        let path = dir.path().join(format!("{name}.json"));
        let p = path.to_str().unwrap();
        assert_eq!(code(&nlqec(&["--emit-config", name, "--out", p])), 0);
        let a = nlqec(&["recover", "--scenario", name]);
        let b = nlqec(&["recover", "--config", p]);
        assert_eq!(code(&a), code(&b));
        assert_eq!(without_wall_time(&stdout(&a)), without_wall_time(&stdout(&b)), "{name}");
    }
}

#[test]
fn config_arrays_need_a_scenario_pick() {
    let dir = TempDir::new().unwrap();
    let both = Value::Array(vec![emit("example1_coherent"), emit("example2_dephasing_dfs")]);
    let path = write_json(dir.path(), "both.json", &both);
    assert_eq!(code(&nlqec(&["check", "--config", &path])), 64);
    let (c, r) = report(&["check", "--config", &path, "--scenario", "example2_dephasing_dfs"]);
    assert_eq!(c, 0);
    assert_eq!(r["config"]["name"], "example2_dephasing_dfs");
}

#[test]
fn reports_are_deterministic_and_seeded() {
    let args = ["recover", "--scenario", "kl_repetition3", "--seed", "3"];
    let a = stdout(&nlqec(&args));
    let b = stdout(&nlqec(&args));
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["config"]["alphabet"]["seed"], 3);
    assert_eq!(r["samples"]["seed"], 3);
    let other = stdout(&nlqec(&["recover", "--scenario", "kl_repetition3", "--seed", "4"]));
    assert_ne!(without_wall_time(&a), without_wall_time(&other));
}

#[test]
fn floats_carry_at_least_fifteen_digits() {
    let text = stdout(&nlqec(&["recover", "--scenario", "example2_dephasing_dfs"]));
    let mut seen = 0;
    for token in text.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']') {
        if let Some((mantissa, _)) = token.split_once('e') {
            if mantissa.parse::<f64>().is_ok() {
                let digits = mantissa.chars().filter(char::is_ascii_digit).count();
                assert!(digits >= 15, "{token}");
                seen += 1;
            }
        }
    }
    assert!(seen > 20);
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    assert!(!text.contains('\r'));
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn cat_sweep_approaches_one() {
    let text = stdout(&nlqec(&["sweep", "--scenario", "example4_cat", "--jobs", "2"]));
    let rows = csv_rows(&text);
    assert_eq!(rows[0], ["alpha", "residual_rel", "min_fidelity", "mean_fidelity", "probability_defect"]);
    let alphas: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(alphas, [2.0, 4.0, 6.0, 8.0]);
    let fid: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(fid.windows(2).all(|w| w[1] > w[0]), "{fid:?}");
    assert!(fid[3] < 1.0 && 1.0 - fid[3] < 1.0 / (4.0 * 64.0) + 1e-3);
}

#[test]
fn two_axis_sweep_is_lexicographic_and_job_independent() {
    let dir = TempDir::new().unwrap();
    let mut cfg = emit("example2_dephasing_fixedphase");
    cfg["outputs"] = serde_json::json!({"sweep": {"axes": [
        {"path": "channel.collective_dephasing.p", "values": [0.2, 0.1]},
        {"path": "alphabet.family.fixed_phase.phi0", "values": [0.3, 0.7, 1.1]}
    ]}});
    let path = write_json(dir.path(), "s.json", &cfg);
    let one = stdout(&nlqec(&["sweep", "--config", &path, "--jobs", "1"]));
    let four = stdout(&nlqec(&["sweep", "--config", &path, "--jobs", "4"]));
    assert_eq!(one, four);
    let rows = csv_rows(&one);
    assert_eq!(rows[0][..2], ["p", "phi0"]);
    let points: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(points, [(0.2, 0.3), (0.2, 0.7), (0.2, 1.1), (0.1, 0.3), (0.1, 0.7), (0.1, 1.1)]);
    for r in &rows[1..] {
        assert!(r[1..].iter().all(|c| !c.is_empty()));
    }
}

#[test]
fn sweep_needs_axes() {
    let dir = TempDir::new().unwrap();
    let mut cfg = emit("example4_cat");
    cfg["outputs"]["sweep"]["axes"] = serde_json::json!([]);
    let path = write_json(dir.path(), "empty.json", &cfg);
    assert_eq!(code(&nlqec(&["sweep", "--config", &path])), 64);
    assert_eq!(code(&nlqec(&["sweep", "--scenario", "example1_coherent"])), 64);
    let mut cfg = emit("example4_cat");
    cfg["outputs"]["sweep"]["axes"][0]["path"] = "alphabet.sampler.nowhere".into();
    let path = write_json(dir.path(), "badpath.json", &cfg);
    assert_eq!(code(&nlqec(&["sweep", "--config", &path])), 64);
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("r.json");
    let out = nlqec(&["check", "--scenario", "example2_dephasing_dfs", "--out", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(r["command"], "check");
}
