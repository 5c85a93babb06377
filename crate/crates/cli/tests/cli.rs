use std::path::Path;
use std::process::{Command, Output};

fn hopcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopcast"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("s.txt");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const S3: &str = "graph = setting-three\nbeta = 5\nhops = 3000\nburn_in = 100\ninitial = base\nsample_every = 300\n";

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn rate_reports_solver_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), S3);
    let v = json(&hopcast(&["rate", &s, "--pairs", "1-2,1-4"]));
    assert_eq!(v["exact_rate"], 1.0);
    assert!((v["rate"].as_f64().unwrap() - 1.0).abs() < 0.01);
    assert_eq!(v["converged"], true);
}

#[test]
fn enumerate_lists_every_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), S3);
    let out = hopcast(&["--format", "csv", "enumerate", &s]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("config_id,configuration,pairs,connected,rate\n"));
}

#[test]
fn hop_writes_identical_files_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), S3);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let log = tmp.path().join(format!("{name}.jsonl"));
        let out = hopcast(&[
            "--format",
            "csv",
            "--out",
            dir.to_str().unwrap(),
            "hop",
            &s,
            "--log",
            log.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
        let files: Vec<Vec<u8>> = ["timeseries.csv", "cdf.csv", "summary.json"]
            .iter()
            .map(|f| std::fs::read(dir.join(f)).unwrap())
            .collect();
        assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 3000);
        runs.push((files, std::fs::read(&log).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_and_beta_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), S3);
    let v = json(&hopcast(&[
        "--seed", "42", "hop", &s, "--beta", "10", "--hops", "500",
    ]));
    assert_eq!(v["seed"], 42);
    assert_eq!(v["events"], 500);
    let b = json(&hopcast(&["--seed", "42", "baseline", &s]));
    assert_eq!(b["kind"], "baseline");
}

#[test]
fn analyze_reports_noise_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(
        tmp.path(),
        "graph = setting-three\nbeta = 10\nmeasurement = noisy\nnoise_delta = 0.05\nnoise_eta = 0.25, 0.5, 0.25\nhops = 1000\n",
    );
    let v = json(&hopcast(&["analyze", &s]));
    let b = &v["bounds"];
    assert!(b["tv_actual"].as_f64().unwrap() <= b["tv_bound"].as_f64().unwrap());
    assert_eq!(v["configurations"].as_array().unwrap().len(), 4);
    let out = hopcast(&["--format", "csv", "analyze", &s, "--empirical"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("config_id,p_star,p_bar,empirical\n"));
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .all(|c| !c.is_empty()));
}

#[test]
fn failures_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.txt");
    let out = hopcast(&["hop", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "run");

    let bad = scenario(tmp.path(), "graph = setting-three\nwhatever = 1\n");
    let out = hopcast(&["hop", &bad]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("whatever"));

    let out = hopcast(&["nonsense"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn rate_trace_needs_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), S3);
    assert!(!hopcast(&["rate", &s, "--trace-every", "1000"])
        .status
        .success());

    let out = tmp.path().join("out");
    let o = hopcast(&[
        "--out",
        out.to_str().unwrap(),
        "rate",
        &s,
        "--trace-every",
        "1000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,z,sum_lambda_source"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').count() == 3
        && r.split(',').next().unwrap().parse::<usize>().unwrap() % 1000 == 0));
    let rate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rate.json")).unwrap()).unwrap();
    assert!(rate.get("trace").is_none());
}
