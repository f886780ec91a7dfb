//! Stub evaluator for `cfo tune`. Reads requests from stdin and answers with
//! the loss (and cost) of a builtin objective, taking the raw config values,
//! in order, as normalized coordinates. Declare every dimension as a linear
//! float on [0, 1] for the answers to match `cfo bench`.

use std::io::{BufRead, Write};
use std::time::Duration;

use clap::{Parser, ValueEnum};
use cfo_cli::wire::{encode, WireRequest, WireResponse};
use cfo_core::SyntheticObjective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Failure {
    /// Reply with an `error` field.
    Error,
    /// Reply with a line that is not JSON.
    Malformed,
    /// Exit without replying.
    Crash,
    /// Never reply.
    Hang,
    /// Reply with the wrong id.
    Mismatch,
}

#[derive(Debug, Parser)]
#[command(name = "sphere-evaluator")]
struct Args {
    /// Builtin objective to evaluate.
    #[arg(long, default_value = "sphere")]
    objective: String,
    /// Leave out the cost so the driver charges wall time.
    #[arg(long)]
    no_cost: bool,
    /// Add fields the driver does not know about.
    #[arg(long)]
    extra_fields: bool,
    /// Request id at which to misbehave.
    #[arg(long, value_name = "ID", requires = "failure")]
    fail_at: Option<u64>,
    #[arg(long, value_enum, requires = "fail_at")]
    failure: Option<Failure>,
}

fn main() {
    let args = Args::parse();
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let mut objective: Option<SyntheticObjective> = None;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { return };
        if line.trim().is_empty() {
            continue;
        }
        let req: WireRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("sphere-evaluator: bad request: {e}");
                std::process::exit(2);
            }
        };
        let x: Vec<f64> = req.config.iter().map(|(_, v)| v).collect();
        let reply = match (args.fail_at == Some(req.id)).then_some(args.failure).flatten() {
            Some(Failure::Error) => encode(&WireResponse::error(req.id, "injected failure")),
            Some(Failure::Malformed) => "this is not json\n".to_string(),
            Some(Failure::Crash) => std::process::exit(3),
            Some(Failure::Hang) => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            Some(Failure::Mismatch) => encode(&WireResponse::ok(req.id + 1000, 0.0, Some(1.0))),
            None => {
                if objective.as_ref().is_none_or(|o| o.dim() != x.len()) {
                    match SyntheticObjective::builtin(&args.objective, x.len()) {
                        Ok(o) => objective = Some(o),
                        Err(e) => {
                            eprintln!("sphere-evaluator: {e}");
                            std::process::exit(2);
                        }
                    }
                }
                let (loss, cost) = objective.as_ref().expect("built above").eval(&x);
                let resp = WireResponse::ok(req.id, loss, (!args.no_cost).then_some(cost));
                let mut line = encode(&resp);
                if args.extra_fields {
                    line = line.replacen('{', "{\"note\":\"stub\",\"metrics\":{\"acc\":0.5},", 1);
                }
                line
            }
        };
        if stdout.write_all(reply.as_bytes()).and_then(|_| stdout.flush()).is_err() {
            return;
        }
    }
}
