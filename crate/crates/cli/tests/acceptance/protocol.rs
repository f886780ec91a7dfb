//! Tune against the stub evaluator and compare with bench.

use std::path::Path;
use std::process::Command;

use cfo_cli::logio::read_log;
use cfo_core::harness::TrialLog;

use super::Outcome;

const CONFIG: &str = r#"{
  "space": [
    {"name": "x0", "type": "float", "min": 0, "max": 1, "init": 0.0},
    {"name": "x1", "type": "float", "min": 0, "max": 1, "init": 0.0},
    {"name": "x2", "type": "float", "min": 0, "max": 1, "init": 0.0}
  ],
  "optimizer": "cfo",
  "budget": {"max_evals": 200},
  "seeds": [0, 1, 2],
  "objective": "OBJECTIVE"
}"#;

fn cfo(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_cfo")).args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("cfo {} exited {:?}: {}", args[0], o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn tune(dir: &Path, out: &str, evaluator_args: &str) -> Result<(), String> {
    let cfg = dir.join("external.json");
    let cmd = format!("{} {evaluator_args}", env!("CARGO_BIN_EXE_sphere-evaluator"));
    let out = dir.join(out);
    cfo(&["tune", "--config", p(&cfg), "--evaluator", &cmd, "--out", p(&out), "--eval-timeout-secs", "10"])
}

fn log(dir: &Path, out: &str, seed: u64) -> Result<TrialLog, String> {
    read_log(&dir.join(out).join(format!("log_seed{seed}.jsonl"))).map_err(|e| e.to_string())
}

fn without_cost(mut log: TrialLog) -> TrialLog {
    for r in &mut log.records {
        r.cost = 0.0;
        r.cumulative_cost = 0.0;
    }
    log
}

fn check(dir: &Path) -> Result<Vec<String>, String> {
    let mut problems = Vec::new();
    std::fs::write(dir.join("builtin.json"), CONFIG.replace("OBJECTIVE", "sphere")).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("external.json"), CONFIG.replace("OBJECTIVE", "external")).map_err(|e| e.to_string())?;
    cfo(&["bench", "--config", p(&dir.join("builtin.json")), "--out", p(&dir.join("bench"))])?;
    tune(dir, "tune", "")?;
    tune(dir, "wall", "--no-cost")?;
    for seed in 0..3 {
        let name = format!("log_seed{seed}.jsonl");
        let a = std::fs::read(dir.join("bench").join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.join("tune").join(&name)).map_err(|e| e.to_string())?;
        if a != b {
            problems.push(format!("seed {seed}: tune log differs from bench"));
        }
        if without_cost(log(dir, "bench", seed)?) != without_cost(log(dir, "wall", seed)?) {
            problems.push(format!("seed {seed}: wall-time-charged log differs beyond the cost columns"));
        }
    }

    // Each misbehaviour at id 7 fails that evaluation only.
    let reference = log(dir, "bench", 0)?;
    for failure in ["malformed", "crash", "mismatch", "error"] {
        let out = format!("fail_{failure}");
        tune(dir, &out, &format!("--fail-at 7 --failure {failure}"))?;
        let l = log(dir, &out, 0)?;
        let r = &l.records[7];
        let prefix_same = l.records[..7] == reference.records[..7];
        let ok = l.len() == 200
            && prefix_same
            && r.failed
            && r.loss == f64::INFINITY
            && r.incumbent_loss == l.records[6].incumbent_loss
            && l.records.iter().filter(|r| r.failed).count() == 1;
        if !ok {
            problems.push(format!(
                "{failure}: {} records, prefix same {prefix_same}, record 7 failed {} loss {} error {:?}",
                l.len(),
                r.failed,
                r.loss,
                r.error
            ));
        }
    }
    Ok(problems)
}

pub fn round_trip() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    match check(dir.path()) {
        Ok(p) if p.is_empty() => Outcome::new(
            true,
            "tune logs byte-identical to bench for 3 seeds, identical modulo cost when wall-time-charged; malformed, crash, id mismatch and error replies each failed one evaluation and the run finished",
        ),
        Ok(p) => Outcome::new(false, p.join("; ")),
        Err(e) => Outcome::new(false, e),
    }
}
