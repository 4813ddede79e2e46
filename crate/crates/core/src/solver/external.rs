use std::io::Write;
use std::process::{Command, Stdio};

use super::{parse_model, to_smtlib2, Backend, SolverError, SolverRequest, SolverResponse};

/// An SMT-LIB2 solver run as a child process, script on stdin, answer on
/// stdout. `command` is split on whitespace, e.g. `z3 -in`.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: Vec<String>,
}

impl ExternalSolver {
    pub fn new(command: &str) -> Self {
        ExternalSolver { command: command.split_whitespace().map(str::to_string).collect() }
    }

    /// Reads `WEFTSCHED_SOLVER`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var("WEFTSCHED_SOLVER").ok().filter(|s| !s.trim().is_empty()).map(|s| Self::new(&s))
    }
}

impl Backend for ExternalSolver {
    fn check(&self, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
        let mut plain = request.clone();
        plain.objective = None;
        plain.tie_break.clear();
        let script = to_smtlib2(&plain)?;
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| SolverError::Unsupported("empty solver command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            stdin.write_all(script.as_bytes())?;
        }
        let output = child.wait_with_output()?;
        let text = String::from_utf8_lossy(&output.stdout);
        if text.trim().is_empty() {
            return Err(SolverError::Backend(format!(
                "no output (exit status {}): {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        parse_model(&text, request)
    }
}
