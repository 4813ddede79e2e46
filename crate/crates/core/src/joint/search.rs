use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::ir::{DepGraph, MachineDesc};
use crate::modsched::{default_lmax, modulo_schedule_with, res_mii, ModuloSchedule};
use crate::sim::validate_program;
use crate::solver::{self, Backend, InternalSolver, Status};
use crate::straightline::Shape;

use super::{apply_streaming_opt, emit_joint, JointError, JointSolution, DEFAULT_STREAM_DEPTH};

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Largest interval tried; defaults to eight times the resource bound.
    pub max_ii: Option<u32>,
    pub stream_depth: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_ii: None, stream_depth: DEFAULT_STREAM_DEPTH }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// No modulo schedule exists at this interval.
    NoModuloSchedule,
    Sat,
    Unsat,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::NoModuloSchedule => "no-modulo-schedule",
            Outcome::Sat => "sat",
            Outcome::Unsat => "unsat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub ii: u32,
    pub length: Option<u32>,
    pub outcome: Outcome,
    /// Copy-0 placements removed only by the consistency rule at the horizon.
    pub consistency_pruned: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchReport {
    pub attempts: Vec<Attempt>,
    pub streaming: Vec<String>,
}

impl SearchReport {
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.attempts
                .iter()
                .map(|a| {
                    json!({
                        "I": a.ii,
                        "L": a.length,
                        "outcome": a.outcome.as_str(),
                        "consistency_pruned": a.consistency_pruned,
                    })
                })
                .collect(),
        )
    }
}

fn attempt<B: Backend>(
    backend: &B,
    g: &DepGraph,
    m: &MachineDesc,
    shape: Shape,
    seed: Option<&[u32]>,
) -> Result<(Option<JointSolution>, usize), JointError> {
    let mut sys = emit_joint(g, m, shape);
    if let Some(start) = seed {
        sys.request.hints = sys.seed_hints(start);
    }
    let resp = solver::solve(backend, &sys.request)?;
    match (resp.status, resp.model) {
        (Status::Sat, Some(model)) => {
            let sol = sys.decode(m, &model);
            let violations = validate_program(&sol, g, m);
            if !violations.is_empty() {
                return Err(JointError::Decode(violations));
            }
            Ok((Some(sol), sys.consistency_pruned))
        }
        (Status::Unsat, _) => Ok((None, sys.consistency_pruned)),
        (status, _) => Err(solver::SolverError::Backend(status.to_string()).into()),
    }
}

/// Solves the joint system at interval `ii` and length `length`, optionally
/// steering the solver towards the copy-0 placements `seed`.
pub fn solve_joint_at_with<B: Backend>(
    backend: &B,
    g: &DepGraph,
    m: &MachineDesc,
    ii: u32,
    length: u32,
    seed: Option<&[u32]>,
) -> Result<Option<JointSolution>, JointError> {
    Ok(attempt(backend, g, m, Shape::new(ii, length), seed)?.0)
}

pub fn solve_joint_at(
    g: &DepGraph,
    m: &MachineDesc,
    ii: u32,
    length: u32,
    seed: Option<&[u32]>,
) -> Result<Option<JointSolution>, JointError> {
    solve_joint_at_with(&InternalSolver::default(), g, m, ii, length, seed)
}

/// The joint system seeded by `seed`, at its interval and length.
pub fn solve_joint(g: &DepGraph, m: &MachineDesc, seed: &ModuloSchedule) -> Result<Option<JointSolution>, JointError> {
    solve_joint_at(g, m, seed.ii, seed.length, Some(&seed.start))
}

pub fn joint_search(g: &DepGraph, m: &MachineDesc) -> Result<(JointSolution, u32, SearchReport), JointError> {
    joint_search_with(&InternalSolver::default(), g, m, &SearchOptions::default())
}

/// Increases the interval from 1. At each interval an optimal modulo
/// schedule seeds joint attempts at its length and at every longer length
/// that keeps the number of overlapped copies unchanged. The first
/// satisfiable attempt wins.
///
/// Streaming operations are rewritten first; the returned solution refers
/// to the rewritten graph (see [`apply_streaming_opt`]).
pub fn joint_search_with<B: Backend>(
    backend: &B,
    g: &DepGraph,
    m: &MachineDesc,
    opts: &SearchOptions,
) -> Result<(JointSolution, u32, SearchReport), JointError> {
    let (g, streaming) = apply_streaming_opt(g);
    let depths: BTreeMap<String, u32> = streaming.iter().map(|id| (id.clone(), opts.stream_depth)).collect();
    let max_ii = opts.max_ii.unwrap_or(8 * res_mii(&g, m));
    let mut report = SearchReport { attempts: Vec::new(), streaming };
    for ii in 1..=max_ii {
        let Some(seed) = modulo_schedule_with(backend, &g, m, ii, default_lmax(&g, ii))? else {
            report.attempts.push(Attempt { ii, length: None, outcome: Outcome::NoModuloSchedule, consistency_pruned: 0 });
            continue;
        };
        let copies = seed.length.div_ceil(ii);
        let mut length = seed.length;
        while length.div_ceil(ii) == copies {
            let (found, pruned) = attempt(backend, &g, m, Shape::new(ii, length), Some(&seed.start))?;
            let outcome = if found.is_some() { Outcome::Sat } else { Outcome::Unsat };
            report.attempts.push(Attempt { ii, length: Some(length), outcome, consistency_pruned: pruned });
            if let Some(mut sol) = found {
                sol.streaming_depths = depths;
                return Ok((sol, ii, report));
            }
            length += 1;
        }
    }
    Err(JointError::Exhausted { max_ii })
}
