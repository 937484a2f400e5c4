use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdsim"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(dir: &Path, name: &str, spec: &str) -> PathBuf {
    let path = dir.join(name);
    let o = rdsim(&[
        "gen-trace",
        "--spec",
        spec,
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_trace_is_a_usage_error_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = rdsim(&[
        "simulate",
        "--trace",
        "does/not/exist.trace",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("does/not/exist.trace"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn bad_flags_and_values_exit_2() {
    assert_eq!(rdsim(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        rdsim(&["simulate", "--policy", "lru", "--trace", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(rdsim(&["simulate"]).status.code(), Some(2));
    assert_eq!(rdsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn unsupported_rd_geometry_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let t = gen(tmp.path(), "s.trace", "stream:n=16");
    let out = tmp.path().join("out");
    let o = rdsim(&[
        "simulate",
        "--trace",
        s(&t),
        "--policy",
        "rd",
        "--rd-entries",
        "1000",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn golden_passes_and_injected_faults_fail() {
    let o = rdsim(&["golden"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("access 8:"));
    assert!(text.trim_end().ends_with("golden: PASS"));

    let o = rdsim(&["golden", "--inject", "drop-rd-entry-on-hit"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("golden: FAIL at access 6"));

    let o = rdsim(&["golden", "--inject", "reuse-on-memory-fill"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("golden: FAIL at access 1"));

    let o = rdsim(&["golden", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["panels"].as_array().unwrap().len(), 8);
}

#[test]
fn simulate_writes_csv_json_and_effective_config() {
    let tmp = TempDir::new().unwrap();
    let t = gen(tmp.path(), "m.trace", "mixed:p=0.3,n=3000,d=128");
    let out = tmp.path().join("out");
    let o = rdsim(&[
        "simulate",
        "--preset",
        "small",
        "--trace",
        s(&t),
        "--policy",
        "baseline",
        "--policy",
        "rd",
        "--rd-entries",
        "256",
        "--rd-entries",
        "512",
        "--mm-cycles",
        "150",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rd storage: "));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy,trace,writes,writes_norm,hits_pki,it,ws,e_dyn_J,e_stat_J,e_total_norm,stalls"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("baseline,m,"));
    assert!(
        rows[1].starts_with("\"rd(entries=256,c=10)\",m,")
            || rows[1].starts_with("rd(entries=256,c=10),m,")
    );
    // Baseline normalizes to itself
    assert_eq!(rows[0].split(',').nth(3), Some("1"));

    let eff = std::fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(eff.contains("mm_cycles = 150"), "{eff}");
    assert!(eff.contains("preset = \"small\""), "{eff}");

    let runs: Vec<_> = std::fs::read_dir(out.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 3);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = TempDir::new().unwrap();
    let t = gen(tmp.path(), "l.bin", "loop:ws=100,passes=3");
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("preset = \"small\"\npolicies = [\"dasca\"]\ntraces = [{:?}]\nout = {:?}\nmm_cycles = 120\n", s(&t), s(&out)),
    )
    .unwrap();
    let o = rdsim(&["simulate", "--config", s(&cfg), "--mm-cycles", "90"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eff = std::fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(eff.contains("mm_cycles = 90"));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("dasca,l,"));

    std::fs::write(&cfg, "nonsense = true\n").unwrap();
    assert_eq!(
        rdsim(&["simulate", "--config", s(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn report_rebuilds_the_csv() {
    let tmp = TempDir::new().unwrap();
    let t = gen(tmp.path(), "r.trace", "loop:ws=300,passes=4");
    let out = tmp.path().join("out");
    let o = rdsim(&[
        "simulate",
        "--preset",
        "small",
        "--trace",
        s(&t),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = rdsim(&["report", "--run-dir", s(&out)]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(out.join("results.csv")).unwrap()
    );
    let o = rdsim(&["report", "--run-dir", s(&out), "--format", "text"]);
    assert!(stdout(&o).contains("baseline"));
}

#[test]
fn wpki_mix_and_mixed_simulation() {
    let tmp = TempDir::new().unwrap();
    let mut traces = Vec::new();
    for i in 0..4 {
        traces.push(gen(
            tmp.path(),
            &format!("w{i}.trace"),
            &format!("mixed:p=0.{},n=4000,d=64", i + 1),
        ));
    }
    let pool = tmp.path().join("pool.json");
    let mut args = vec!["wpki", "--preset", "small", "--out", s(&pool)];
    for t in &traces {
        args.push("--trace");
        args.push(s(t));
    }
    let o = rdsim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&pool).unwrap()).unwrap();
    let entries = v["workloads"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let class = entries[0]["class"].as_str().unwrap().to_string();
    let letter = &class[..1];
    let same = entries
        .iter()
        .filter(|e| e["class"] == class.as_str())
        .count();
    assert!(same >= 2, "{v}");

    let mixes = tmp.path().join("mixes.json");
    let pattern = format!("{letter}2");
    let o = rdsim(&[
        "mix",
        "--pool",
        s(&pool),
        "--pattern",
        &pattern,
        "--count",
        "2",
        "--seed",
        "5",
        "--out",
        s(&mixes),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&mixes).unwrap()).unwrap();
    assert_eq!(m.as_array().unwrap().len(), 2);
    assert_eq!(m[1]["name"], format!("mix.{letter}1"));

    let too_many = format!("{letter}9");
    let o = rdsim(&[
        "mix",
        "--pool",
        s(&pool),
        "--pattern",
        &too_many,
        "--out",
        s(&mixes),
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("need 9"), "{}", stderr(&o));

    std::fs::write(&mixes, serde_json::to_string(&m).unwrap()).unwrap();
    let out = tmp.path().join("out");
    let o = rdsim(&[
        "simulate",
        "--preset",
        "small",
        "--mixes",
        s(&mixes),
        "--pool",
        s(&pool),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains(&format!("mix.{letter}0")));
}

#[test]
fn text_and_binary_traces_simulate_identically() {
    let tmp = TempDir::new().unwrap();
    let a = gen(tmp.path(), "x.trace", "mixed:p=0.2,n=2000,d=32");
    let b = gen(tmp.path(), "x.bin", "mixed:p=0.2,n=2000,d=32");
    let run = |t: &Path, out: &str| {
        let out = tmp.path().join(out);
        let o = rdsim(&[
            "simulate",
            "--preset",
            "small",
            "--trace",
            s(t),
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out.join("results.csv")).unwrap()
    };
    assert_eq!(run(&a, "oa"), run(&b, "ob"));
}
