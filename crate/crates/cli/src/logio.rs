//! Trial-log and curve files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cfo_core::harness::{EvaluationRecord, TrialLog};

use crate::error::CliError;

pub fn log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("log_seed{seed}.jsonl"))
}

pub fn encode_record(r: &EvaluationRecord) -> String {
    serde_json::to_string(r).expect("records always serialize")
}

pub fn write_log(path: &Path, log: &TrialLog) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in &log.records {
        writeln!(w, "{}", encode_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_log(text: &str) -> Result<TrialLog, CliError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| CliError::Run(format!("log line {}: {e}", i + 1)))?;
        records.push(r);
    }
    Ok(TrialLog { records })
}

pub fn read_log(path: &Path) -> Result<TrialLog, CliError> {
    let mut text = String::new();
    for line in BufReader::new(File::open(path)?).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_log(&text)
}

/// `cumulative_cost,best_loss,seed`, one row per evaluation, seeds in the
/// given order.
pub fn write_curves(path: &Path, logs: &[(u64, &TrialLog)]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "cumulative_cost,best_loss,seed")?;
    for (seed, log) in logs {
        for r in &log.records {
            writeln!(w, "{},{},{seed}", r.cumulative_cost, r.best_so_far)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfo_core::harness::{run, BudgetSpec};
    use cfo_core::objectives::SyntheticObjective;
    use cfo_core::{Cfo, SearchSpace};

    fn sample_log() -> TrialLog {
        let obj = SyntheticObjective::builtin("sphere", 2).unwrap();
        let space = SearchSpace::unit_cube(obj.low_cost_init()).unwrap();
        let mut opt = Cfo::from_space(space, 4).unwrap();
        run(&mut opt, &mut &obj, &BudgetSpec::evals(30)).unwrap().log
    }

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = sample_log();
        log.records[3].loss = f64::INFINITY;
        log.records[3].failed = true;
        log.records[3].error = Some("boom".into());
        let path = log_path(dir.path(), 4);
        write_log(&path, &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 30);
        assert!(text.ends_with('\n'));
        assert_eq!(read_log(&path).unwrap(), log);
    }

    #[test]
    fn curves_csv() {
        let dir = tempfile::tempdir().unwrap();
        let log = sample_log();
        let path = dir.path().join("curves.csv");
        write_curves(&path, &[(0, &log), (7, &log)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cumulative_cost,best_loss,seed");
        assert_eq!(lines.len(), 61);
        let last: Vec<&str> = lines[60].split(',').collect();
        assert_eq!(last[2], "7");
        assert_eq!(last[1].parse::<f64>().unwrap(), log.records[29].best_so_far);
    }

    #[test]
    fn bad_lines_are_reported() {
        let err = parse_log("{}\n").unwrap_err();
        assert!(err.to_string().contains("log line 1"));
    }
}
