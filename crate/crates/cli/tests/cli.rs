use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const HEAD_ON: &str = r#"{"particles": [{"m": 0.5, "x": [0], "v": [1]}, {"m": 0.5, "x": [1], "v": [-1]}], "horizon": 2}"#;
const SIN_RECIPE: &str = r#"{"rho0": {"kind": "uniform", "a": 0, "b": 1}, "v0": "sin(2*pi*x)"}"#;

fn sticky(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sticky"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workspace(files: &[(&str, &str)]) -> TempDir {
    let dir = TempDir::new().unwrap();
    for (name, content) in files {
        fs::write(dir.path().join(name), content).unwrap();
    }
    dir
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn record<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no {name} record"))
}

#[test]
fn simulate_head_on() {
    let dir = workspace(&[("head.json", HEAD_ON)]);
    let out = sticky(&["simulate", "head.json", "-o", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let log = fs::read_to_string(dir.path().join("run/events.jsonl")).unwrap();
    let events: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["t"], 0.5);
    assert_eq!(events[0]["groups"], serde_json::json!([[0, 1]]));
    let csv = fs::read_to_string(dir.path().join("run/trajectories.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("particle_index,t,x_1,v_1"));
    assert!(csv.contains("0,0.5,0.5,0"));
}

#[test]
fn malformed_inputs_exit_2() {
    let coincident = r#"{"particles": [{"m": 0.5, "x": [0], "v": [1]}, {"m": 0.5, "x": [0], "v": [-1]}], "horizon": 1}"#;
    let unnormalized = r#"{"particles": [{"m": 0.5, "x": [0], "v": [1]}, {"m": 0.6, "x": [1], "v": [-1]}], "horizon": 1}"#;
    let dir = workspace(&[
        ("coincident.json", coincident),
        ("mass.json", unnormalized),
        ("broken.json", "{\"particles\": ["),
    ]);
    let out = sticky(&["simulate", "coincident.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("particles 0 and 1"), "{}", stderr(&out));
    for args in [
        &["simulate", "mass.json"][..],
        &["simulate", "broken.json"],
        &["simulate", "missing.json"],
        &["verify", "broken.json"],
        &["simulate", "--random", "10", "1", "0", "--horizon", "-1"],
        &["simulate", "--random", "10", "1", "0", "--tol-tgroup", "0"],
    ] {
        assert_eq!(code(&sticky(args, dir.path())), 2, "{args:?}");
    }
}

#[test]
fn large_random_line_completes() {
    let dir = TempDir::new().unwrap();
    let out = sticky(&["simulate", "--random", "100000", "1", "5", "-o", "big"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let events = fs::read_to_string(dir.path().join("big/events.jsonl")).unwrap().lines().count();
    assert!(events > 0 && events < 100_000);
}

#[test]
fn verify_head_on_passes_everything() {
    let dir = workspace(&[("head.json", HEAD_ON)]);
    let out = sticky(&["verify", "head.json", "--out", "report.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["scenario_id"], "head");
    assert_eq!(r["event_count"], 1);
    assert_eq!(r["pass"], true);
    assert_eq!(r["records"].as_array().unwrap().len(), 7);
    let v = record(&r, "variation");
    assert_eq!(v["detail"]["mass_average"], 1.0);
    assert_eq!(v["detail"]["bound"], 4.0);
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, r);
}

#[test]
fn line_only_checks_are_skipped_in_the_plane() {
    let dir = TempDir::new().unwrap();
    let out = sticky(
        &["verify", "--random", "12", "2", "3", "--checks", "entropy,variation,weak"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("skipping entropy"));
    let r = report(&out);
    assert_eq!(r["skipped"], serde_json::json!(["entropy"]));
    let names: Vec<&str> = r["records"].as_array().unwrap().iter().map(|x| x["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["variation", "weak"]);
}

#[test]
fn corrupted_event_log_fails_variation() {
    let dir = workspace(&[("head.json", HEAD_ON)]);
    assert_eq!(code(&sticky(&["simulate", "head.json", "-o", "run"], dir.path())), 0);
    let log = fs::read_to_string(dir.path().join("run/events.jsonl")).unwrap();
    fs::write(dir.path().join("bad.jsonl"), log.replace("\"post_v\":[[0.0]]", "\"post_v\":[[10.0]]")).unwrap();

    let honest = sticky(&["verify", "head.json", "--events", "run/events.jsonl"], dir.path());
    assert_eq!(code(&honest), 0, "{}", stderr(&honest));

    let out = sticky(
        &["verify", "head.json", "--events", "bad.jsonl", "--out", "report.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 4);
    let r = report(&out);
    assert_eq!(r["pass"], false);
    assert_eq!(record(&r, "variation")["pass"], false);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn unreadable_event_log_exits_2() {
    let dir = workspace(&[
        ("head.json", HEAD_ON),
        ("garbage.jsonl", "not json\n"),
        ("unknown.jsonl", "{\"t\":0.5,\"groups\":[[0,7]],\"post_v\":[[0.0]]}\n"),
    ]);
    for log in ["garbage.jsonl", "unknown.jsonl", "absent.jsonl"] {
        assert_eq!(code(&sticky(&["verify", "head.json", "--events", log], dir.path())), 2, "{log}");
    }
}

#[test]
fn unknown_check_is_a_usage_error() {
    let dir = workspace(&[("head.json", HEAD_ON)]);
    assert_eq!(code(&sticky(&["verify", "head.json", "--checks", "magic"], dir.path())), 2);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["verify", "--random", "40", "1", "9", "--seed", "3"];
    let a = sticky(&args, dir.path());
    let b = sticky(&args, dir.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = sticky(&["verify", "--random", "40", "1", "9", "--seed", "4"], dir.path());
    assert_ne!(a.stdout, c.stdout);

    for out in ["a", "b"] {
        assert_eq!(code(&sticky(&["simulate", "--random", "200", "3", "1", "-o", out], dir.path())), 0);
    }
    for file in ["events.jsonl", "trajectories.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap()
        );
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_sticky"))
            .args(["verify", "--random", "30", "1", "2"])
            .current_dir(dir.path())
            .env("STICKY_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, run("4").stdout);
    let bad = run("lots");
    assert_eq!(code(&bad), 0);
    assert!(stderr(&bad).contains("STICKY_THREADS"));
}

#[test]
fn w1_end_to_end() {
    let dir = workspace(&[
        ("d0.csv", "weight,point\n1,0\n"),
        ("d1.csv", "1,1\n"),
        ("split.csv", "# two halves\n0.5,0\n0.5,2\n"),
        ("heavy.csv", "0.7,0\n0.7,1\n"),
        ("text.csv", "a,b\nx,y\n"),
    ]);
    let w1 = |a: &str, b: &str| sticky(&["w1", a, b], dir.path());
    for (a, b, expected) in [("d0.csv", "d1.csv", "1"), ("split.csv", "d1.csv", "1"), ("split.csv", "split.csv", "0")] {
        let out = w1(a, b);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), expected);
    }
    for bad in ["heavy.csv", "text.csv", "nope.csv"] {
        assert_eq!(code(&w1(bad, "d1.csv")), 2, "{bad}");
    }
}

#[test]
fn converge_writes_report_and_table() {
    let dir = workspace(&[("sin.json", SIN_RECIPE)]);
    let out = sticky(
        &["converge", "sin.json", "--sizes", "50,100,200", "--times", "0.1,0.5,1", "-o", "study"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("study/convergence.json")).unwrap()).unwrap();
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["sizes"], serde_json::json!([50, 100, 200]));
    assert_eq!(r["w1_rho"].as_array().unwrap().len(), 2);
    assert_eq!(r["recipe"]["v0"], "sin(2*pi*x)");
    let csv = fs::read_to_string(dir.path().join("study/w1.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "n,n_next,t,w1_rho,w1_push");
    assert_eq!(rows.len(), 1 + 2 * 3);
    assert!(rows[1].starts_with("50,100,0.1,"));
}

#[test]
fn converge_edge_cases() {
    let constant = r#"{"rho0": {"kind": "uniform", "a": -1, "b": 1}, "v0": "0.3"}"#;
    let dir = workspace(&[
        ("constant.json", constant),
        ("sin.json", SIN_RECIPE),
        ("bad.json", r#"{"rho0": {"kind": "uniform", "a": 0, "b": 1}, "v0": "sin("}"#),
        ("unbounded.json", r#"{"rho0": {"kind": "gaussian_truncated", "mean": 0, "sd": 1}, "v0": "x"}"#),
    ]);
    let out = sticky(&["converge", "constant.json", "--sizes", "10,20", "--times", "1", "-o", "c"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c/convergence.json")).unwrap()).unwrap();
    assert!(r["variation_bounds"].as_array().unwrap().iter().all(|v| v == 0.0));

    let out = sticky(&["converge", "sin.json", "--sizes", "1", "--times", "0.5", "-o", "one"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("one/convergence.json")).unwrap()).unwrap();
    assert_eq!(r["event_counts"], serde_json::json!([0]));
    assert_eq!(r["w1_rho"], serde_json::json!([]));

    for recipe in ["bad.json", "unbounded.json", "missing.json"] {
        let out = sticky(&["converge", recipe, "--sizes", "4", "--times", "1"], dir.path());
        assert_eq!(code(&out), 2, "{recipe}: {}", stderr(&out));
    }
}
