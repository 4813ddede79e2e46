//! The `weftsched` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::codegen::{emit_listing, synthesize};
use crate::costnorm::{
    apply_normalization, collect_costs, normalization_map, normalize_costs_with, CostError, DEFAULT_RESOLUTION,
};
use crate::ir::{parse_problem, serialize_problem, validate_graph, DepGraph, MachineDesc, ParseError};
use crate::joint::{apply_streaming_opt, joint_search_with, JointError, JointSolution, SearchOptions, DEFAULT_STREAM_DEPTH};
use crate::modsched::{
    default_lmax, modular_rrt, modular_rrt_json, modulo_schedule_with, rec_mii, res_mii, ScheduleError,
};
use crate::sim::{simulate_inorder, simulate_pipeline, validate_program, SimError};
use crate::solver::{Backend, ExternalSolver, InternalSolver};
use crate::straightline::build_straightline;
use crate::viz::{emit_dot, emit_gantt};

#[derive(Debug, Parser)]
#[command(name = "weftsched", version, about = "Joint modulo scheduling and warp specialization")]
pub struct RunConfig {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Dot,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shrink durations to small integers with the same ratios.
    Normalize {
        problem: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: u64,
        #[arg(long, default_value = "internal")]
        solver: String,
    },
    /// Optimal modulo schedule, ignoring warps.
    Schedule {
        problem: PathBuf,
        #[arg(long)]
        ii: Option<u32>,
        #[arg(long)]
        lmax: Option<u32>,
        #[arg(long, default_value = "internal")]
        solver: String,
    },
    /// Joint schedule and warp assignment with the smallest interval.
    Joint {
        problem: PathBuf,
        #[arg(long)]
        max_ii: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_STREAM_DEPTH)]
        stream_depth: u32,
        /// `internal`, `external` (uses WEFTSCHED_SOLVER) or `external:<command>`.
        #[arg(long, default_value = "internal")]
        solver: String,
    },
    /// Pipelined program for a joint solution.
    Codegen {
        solution: PathBuf,
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// In-order and pipelined throughput.
    Sim {
        problem: PathBuf,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        iters: u32,
        /// Print the per-cycle trace.
        #[arg(long)]
        trace: bool,
    },
    /// Re-check every constraint of a joint solution.
    Validate { solution: PathBuf, problem: PathBuf },
    /// Dependence graph as DOT, or the schedule as an SVG chart.
    Viz {
        problem: PathBuf,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Problem { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Joint(#[from] JointError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Usage(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_problem(path: &Path) -> Result<(DepGraph, MachineDesc), CliError> {
    let (g, m) = parse_problem(&read(path)?).map_err(|source| CliError::Problem { path: path.to_path_buf(), source })?;
    let diags = validate_graph(&g, &m);
    if let Some(d) = diags.first() {
        return Err(CliError::Invalid(format!("{}: {d}", path.display())));
    }
    Ok((g, m))
}

/// Reads a joint solution. Solutions found on a graph with streaming
/// operations refer to the rewritten graph, which is returned alongside.
fn load_solution(path: &Path, g: &DepGraph, m: &MachineDesc) -> Result<(JointSolution, DepGraph), CliError> {
    let value: Value =
        serde_json::from_str(&read(path)?).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    let streamed = value.get("streaming_depths").and_then(Value::as_object).is_some_and(|d| !d.is_empty());
    let g = if streamed { apply_streaming_opt(g).0 } else { g.clone() };
    let sol = JointSolution::from_json(&value, &g, m)?;
    Ok((sol, g))
}

fn backend(spec: &str) -> Result<Box<dyn Backend>, CliError> {
    match spec {
        "internal" => Ok(Box::new(InternalSolver::default())),
        "external" => ExternalSolver::from_env()
            .map(|s| Box::new(s) as Box<dyn Backend>)
            .ok_or_else(|| CliError::Usage("--solver external needs WEFTSCHED_SOLVER to be set".into())),
        s => match s.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(ExternalSolver::new(cmd))),
            _ => Err(CliError::Usage(format!("unknown solver `{s}`"))),
        },
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn execute(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Normalize { problem, resolution, solver } => {
            let (g, m) = load_problem(problem)?;
            let raw = collect_costs(&g);
            let norm = normalize_costs_with(&backend(solver)?, &raw, *resolution)?;
            let out = apply_normalization(&g, &raw, &norm);
            let doc: Value = serde_json::from_str(&serialize_problem(&out, &m)).expect("serializer emits json");
            let map: serde_json::Map<String, Value> =
                normalization_map(&raw, &norm).into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            Ok(pretty(&json!({
                "problem": doc,
                "map": map,
                "F": norm.distortion,
                "U": resolution,
            })))
        }
        Command::Schedule { problem, ii, lmax, solver } => {
            let (g, m) = load_problem(problem)?;
            let b = backend(solver)?;
            let found = match ii {
                Some(i) => {
                    let l = lmax.unwrap_or_else(|| default_lmax(&g, *i));
                    modulo_schedule_with(&b, &g, &m, *i, l)?
                }
                None => {
                    let lower = res_mii(&g, &m).max(rec_mii(&g));
                    let mut found = None;
                    for i in lower..=lower.saturating_mul(8).max(lower) {
                        let l = lmax.unwrap_or_else(|| default_lmax(&g, i));
                        if let Some(s) = modulo_schedule_with(&b, &g, &m, i, l)? {
                            found = Some(s);
                            break;
                        }
                    }
                    found
                }
            };
            let Some(s) = found else {
                return Err(CliError::Invalid(match ii {
                    Some(i) => format!("infeasible: no modulo schedule at I={i}"),
                    None => "infeasible: no modulo schedule found".into(),
                }));
            };
            let mut doc = s.to_json(&g);
            doc["modular_rrt"] = modular_rrt_json(&modular_rrt(&s, &g, &m), &m);
            doc["straightline"] = build_straightline(&s).to_json(&g);
            Ok(pretty(&doc))
        }
        Command::Joint { problem, max_ii, stream_depth, solver } => {
            let (g, m) = load_problem(problem)?;
            let opts = SearchOptions { max_ii: *max_ii, stream_depth: *stream_depth };
            let (sol, _, report) = joint_search_with(&backend(solver)?, &g, &m, &opts)?;
            let streamed = apply_streaming_opt(&g).0;
            let mut doc = sol.to_json(&streamed);
            doc["search_report"] = report.to_json();
            Ok(pretty(&doc))
        }
        Command::Codegen { solution, problem, format } => {
            let (g, m) = load_problem(problem)?;
            let (sol, g) = load_solution(solution, &g, &m)?;
            check(&sol, &g, &m)?;
            let p = synthesize(&sol, &g);
            match format {
                Format::Text => Ok(emit_listing(&p)),
                Format::Json => Ok(pretty(&p.to_json(&g))),
                f => Err(CliError::Usage(format!("codegen does not support --format {f:?}"))),
            }
        }
        Command::Sim { problem, solution, iters, trace } => {
            let (g, m) = load_problem(problem)?;
            if *iters == 0 {
                return Err(CliError::Usage("--iters must be at least 1".into()));
            }
            let base = simulate_inorder(&g, &m, *iters);
            let mut out = format!(
                "in-order: {} iterations/cycle ({} iterations in {} cycles)\n",
                base.throughput, base.iterations, base.elapsed
            );
            if *trace {
                out.push_str(&base.render(&g, &m));
            }
            if let Some(path) = solution {
                let (sol, g) = load_solution(path, &g, &m)?;
                check(&sol, &g, &m)?;
                let p = synthesize(&sol, &g);
                let run = simulate_pipeline(&p, &g, &m, (*iters).max(p.copies))?;
                out.push_str(&format!(
                    "pipelined: {} iterations/cycle in steady state ({} iterations in {} cycles)\n",
                    run.throughput, run.iterations, run.elapsed
                ));
                if *trace {
                    out.push_str(&run.render(&g, &m));
                }
            }
            Ok(out)
        }
        Command::Validate { solution, problem } => {
            let (g, m) = load_problem(problem)?;
            let (sol, g) = load_solution(solution, &g, &m)?;
            check(&sol, &g, &m)?;
            Ok("ok\n".into())
        }
        Command::Viz { problem, solution, format } => {
            let (g, m) = load_problem(problem)?;
            let sol = match solution {
                Some(p) => Some(load_solution(p, &g, &m)?),
                None => None,
            };
            match (format, sol) {
                (Format::Dot, Some((s, g))) => Ok(emit_dot(&g, Some(&s))),
                (Format::Dot, None) => Ok(emit_dot(&g, None)),
                (Format::Svg, Some((s, g))) => Ok(emit_gantt(&s, &g, &m)),
                (Format::Svg, None) => Err(CliError::Usage("--format svg needs --solution".into())),
                (f, _) => Err(CliError::Usage(format!("viz does not support --format {f:?}"))),
            }
        }
    }
}

fn check(sol: &JointSolution, g: &DepGraph, m: &MachineDesc) -> Result<(), CliError> {
    let violations = validate_program(sol, g, m);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
    Err(CliError::Invalid(format!("{} violation(s):\n{}", violations.len(), lines.join("\n"))))
}

/// Runs the command line `argv` (including the program name), writing
/// results to `stdout` and diagnostics to `stderr`. Returns the exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&config.command) {
        Ok(text) => {
            let written = match &config.output {
                Some(path) => std::fs::write(path, &text).map_err(|source| CliError::Io { path: path.clone(), source }),
                None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
