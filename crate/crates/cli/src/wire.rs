//! Line-delimited JSON protocol for external evaluators.
//!
//! The driver writes one request per line to the evaluator's stdin and reads
//! one response per line from its stdout:
//!
//! ```text
//! > {"id":0,"config":{"lr":0.1,"trees":12}}
//! < {"id":0,"loss":0.173,"cost":4.2}
//! ```
//!
//! `cost` is optional; when absent the wall time of the evaluation is
//! charged. A response carrying `error` marks the evaluation as failed.
//! Unknown response fields are ignored.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use cfo_core::harness::{nonfinite, Evaluation, Objective};
use cfo_core::space::{NormPoint, RawConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub config: RawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    #[serde(default, with = "nonfinite::option", skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WireResponse {
    pub fn ok(id: u64, loss: f64, cost: Option<f64>) -> Self {
        Self { id, loss: Some(loss), cost, error: None }
    }

    pub fn error(id: u64, message: impl Into<String>) -> Self {
        Self { id, loss: None, cost: None, error: Some(message.into()) }
    }
}

/// One JSON object, newline-terminated.
pub fn encode<T: Serialize>(msg: &T) -> String {
    let mut line = serde_json::to_string(msg).expect("wire messages always serialize");
    line.push('\n');
    line
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Running {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// An evaluator subprocess driven over the wire protocol.
///
/// Timeouts, crashes, malformed lines and id mismatches fail the evaluation
/// (loss `+inf`, wall time charged) and restart the subprocess before the next
/// request; an `error` response fails the evaluation but keeps the process.
pub struct SubprocessEvaluator {
    command: String,
    timeout: Option<Duration>,
    running: Option<Running>,
    next_id: u64,
    spawns: u64,
}

enum Reply {
    Line(String),
    Crashed(String),
    TimedOut,
}

impl SubprocessEvaluator {
    pub fn new(command: impl Into<String>, timeout: Option<Duration>) -> Self {
        Self { command: command.into(), timeout, running: None, next_id: 0, spawns: 0 }
    }

    /// Number of times the subprocess has been started.
    pub fn spawns(&self) -> u64 {
        self.spawns
    }

    fn spawn(&mut self) -> std::io::Result<()> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {}", self.command))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        self.running = Some(Running { child, stdin, lines: rx });
        self.spawns += 1;
        Ok(())
    }

    fn restart(&mut self) {
        if let Some(r) = self.running.take() {
            r.kill();
        }
    }

    fn exchange(&mut self, request: &str, started: Instant) -> Reply {
        let running = self.running.as_mut().expect("spawned before exchange");
        if let Err(e) = running.stdin.write_all(request.as_bytes()).and_then(|_| running.stdin.flush()) {
            return Reply::Crashed(format!("write failed: {e}"));
        }
        loop {
            let got = match self.timeout {
                Some(t) => match t.checked_sub(started.elapsed()) {
                    Some(left) => running.lines.recv_timeout(left),
                    None => Err(RecvTimeoutError::Timeout),
                },
                None => running.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            return match got {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => Reply::Line(line),
                Ok(Err(e)) => Reply::Crashed(format!("read failed: {e}")),
                Err(RecvTimeoutError::Disconnected) => Reply::Crashed("evaluator exited".into()),
                Err(RecvTimeoutError::Timeout) => Reply::TimedOut,
            };
        }
    }
}

impl Drop for SubprocessEvaluator {
    fn drop(&mut self) {
        self.restart();
    }
}

impl Objective for SubprocessEvaluator {
    fn evaluate(&mut self, _point: &NormPoint, config: &RawConfig) -> cfo_core::Result<Evaluation> {
        if self.running.is_none() {
            self.spawn()
                .map_err(|e| cfo_core::Error::Objective(format!("cannot start `{}`: {e}", self.command)))?;
        }
        let id = self.next_id;
        self.next_id += 1;
        let request = encode(&WireRequest { id, config: config.clone() });
        let started = Instant::now();
        let reply = self.exchange(&request, started);
        let wall = started.elapsed().as_secs_f64();
        let failure = |this: &mut Self, reason: String| {
            this.restart();
            Ok(Evaluation::failed(wall, reason))
        };
        let line = match reply {
            Reply::Line(line) => line,
            Reply::Crashed(why) => return failure(self, why),
            Reply::TimedOut => return failure(self, format!("timed out after {wall:.3}s")),
        };
        let resp: WireResponse = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => return failure(self, format!("malformed response: {e}")),
        };
        if resp.id != id {
            return failure(self, format!("response id {} does not match request {id}", resp.id));
        }
        let cost = match resp.cost {
            Some(c) if c.is_finite() && c >= 0.0 => c,
            Some(c) => return failure(self, format!("invalid cost {c}")),
            None => wall,
        };
        if let Some(message) = resp.error {
            return Ok(Evaluation::failed(cost, message));
        }
        match resp.loss {
            Some(loss) if !loss.is_nan() => Ok(Evaluation::ok(loss, cost)),
            Some(_) => Ok(Evaluation::failed(cost, "evaluator returned a NaN loss")),
            None => failure(self, "response has neither loss nor error".into()),
        }
    }
}
