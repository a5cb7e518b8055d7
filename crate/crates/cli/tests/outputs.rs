use std::fs;
use std::path::Path;
use std::process::Command as Process;

use ssep_cli::{execute, Command, Format, RunConfig, RunManifest};

fn config(cmd: Command) -> RunConfig {
    RunConfig { subcommand: Some(cmd), seed: Some(11), ..Default::default() }
}

fn small_relax(out: &Path) -> RunConfig {
    RunConfig {
        n: Some(16),
        replicas: Some(40),
        modes: Some(2),
        times: Some(vec![0.0, 0.02]),
        out: Some(out.to_path_buf()),
        ..config(Command::Relax)
    }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn header(text: &str) -> &str {
    text.lines().next().unwrap()
}

#[test]
fn green_table_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { n: Some(8), out: Some(dir.path().to_path_buf()), ..config(Command::Green) };
    let (report, _) = execute(&cfg.resolve().unwrap()).unwrap();
    assert!(report.passed());
    let got = read(dir.path(), "green.csv");
    let golden = include_str!("golden/green_n8.csv");
    let parse = |s: &str| -> Vec<(String, f64)> {
        s.lines()
            .skip(1)
            .map(|l| {
                let (key, v) = l.rsplit_once(',').unwrap();
                (key.to_string(), v.parse().unwrap())
            })
            .collect()
    };
    assert_eq!(header(&got), header(golden));
    let (a, b) = (parse(&got), parse(golden));
    assert_eq!(a.len(), b.len());
    for ((ka, va), (kb, vb)) in a.iter().zip(&b) {
        assert_eq!(ka, kb);
        assert!((va - vb).abs() < 1e-12, "{ka}: {va} vs {vb}");
    }
}

#[test]
fn exact_distribution_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out: Some(dir.path().to_path_buf()), ..config(Command::Exact) };
    execute(&cfg.resolve().unwrap()).unwrap();
    let got = read(dir.path(), "distribution.csv");
    let golden = include_str!("golden/exact_n3_distribution.csv");
    assert_eq!(header(&got), "state_bits,probability");
    for (g, e) in got.lines().zip(golden.lines()).skip(1) {
        let (gs, gv) = g.split_once(',').unwrap();
        let (es, ev) = e.split_once(',').unwrap();
        assert_eq!(gs, es);
        assert!((gv.parse::<f64>().unwrap() - ev.parse::<f64>().unwrap()).abs() < 1e-14);
    }
    assert_eq!(got.lines().count(), golden.lines().count());
}

#[test]
fn table_schemas() {
    let dir = tempfile::tempdir().unwrap();
    execute(&small_relax(dir.path()).resolve().unwrap()).unwrap();
    let cov = read(dir.path(), "covariance_1.csv");
    assert_eq!(header(&cov), "j,k,estimate,se,analytic,z");
    assert_eq!(cov.lines().count(), 1 + 4);
    let fields = read(dir.path(), "fields.csv");
    assert_eq!(header(&fields), "replica,time,j,value");
    assert_eq!(fields.lines().count(), 1 + 2 * 40 * 2);
    assert_eq!(header(&read(dir.path(), "profile_0.csv")), "x,value");

    let ou_dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        modes: Some(3),
        times: Some(vec![2.0]),
        out: Some(ou_dir.path().to_path_buf()),
        ..config(Command::Ou)
    };
    execute(&cfg.resolve().unwrap()).unwrap();
    assert_eq!(header(&read(ou_dir.path(), "trajectory.csv")), "t,j,value");
    assert_eq!(header(&read(ou_dir.path(), "lyapunov.csv")), "j,k,value");
}

#[test]
fn floats_are_written_round_trip_exact() {
    let dir = tempfile::tempdir().unwrap();
    execute(&small_relax(dir.path()).resolve().unwrap()).unwrap();
    for line in read(dir.path(), "covariance_1.csv").lines().skip(1) {
        for field in line.split(',').skip(2) {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn manifest_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    let (_, manifest) = execute(&small_relax(first.path()).resolve().unwrap()).unwrap();
    let manifest = manifest.unwrap();
    let on_disk: RunManifest = serde_json::from_str(&read(first.path(), "manifest.json")).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(on_disk.tool_version, env!("CARGO_PKG_VERSION"));
    assert!(!on_disk.criteria.is_empty());

    let second = tempfile::tempdir().unwrap();
    let mut cfg = on_disk.config.clone();
    cfg.out = Some(second.path().to_path_buf());
    execute(&cfg.resolve().unwrap()).unwrap();
    for name in &on_disk.outputs {
        assert_eq!(read(first.path(), name), read(second.path(), name), "{name}");
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| execute(&small_relax(dir.path()).resolve().unwrap()).unwrap());
        read(dir.path(), "fields.csv")
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn json_format_carries_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { format: Some(Format::Json), ..small_relax(dir.path()) };
    execute(&cfg.resolve().unwrap()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    let tables = doc["tables"].as_array().unwrap();
    let cov = tables.iter().find(|t| t["name"] == "covariance_0").unwrap();
    assert_eq!(cov["columns"], serde_json::json!(["j", "k", "estimate", "se", "analytic", "z"]));
    assert_eq!(cov["rows"].as_array().unwrap().len(), 4);
    assert!(doc["criteria"].as_array().unwrap().len() >= 2);
    assert!(!dir.path().join("fields.csv").exists());
}

fn ssep(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_ssep")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(ssep(&["green", "--n", "8"]).status.code(), Some(4), "missing seed");
    assert_eq!(ssep(&["green", "--seed", "1", "--alpha", "2"]).status.code(), Some(4));
    assert_eq!(ssep(&["exact", "--seed", "1", "--n", "15"]).status.code(), Some(4));
    assert_eq!(ssep(&["--seed", "1"]).status.code(), Some(4), "no subcommand");
    let ok = ssep(&["green", "--n", "8", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8(ok.stdout).unwrap().lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"subcommand": "green", "n": 8, "seed": 5}"#).unwrap();
    let out = dir.path().join("out");
    let o = ssep(&["--config", path.to_str().unwrap(), "--n", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: RunManifest = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(m.config.n, Some(16));
    assert_eq!(m.config.seed, Some(5));
    fs::write(&path, r#"{"subcommand": "green", "seeds": 5}"#).unwrap();
    assert_eq!(ssep(&["--config", path.to_str().unwrap()]).status.code(), Some(4));
}
