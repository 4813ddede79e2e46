//! Joint modulo scheduling and warp assignment over the straight-line
//! program: constraint emission, decoding, the interval/length search and the
//! streaming rewrite for variable-latency loads.

mod emit;
mod search;
mod streaming;

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ir::{DepGraph, MachineDesc, WarpRange};
use crate::modsched::{ModuloSchedule, ScheduleError};
use crate::sim::Violation;
use crate::solver::SolverError;
use crate::straightline::Shape;

pub use emit::{emit_joint, JointSystem};
pub use search::{
    joint_search, joint_search_with, solve_joint, solve_joint_at, solve_joint_at_with, Attempt, Outcome,
    SearchOptions, SearchReport,
};
pub use streaming::{apply_streaming_opt, DEFAULT_STREAM_DEPTH};

#[derive(Debug, Error)]
pub enum JointError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no joint solution with initiation interval up to {max_ii}")]
    Exhausted { max_ii: u32 },
    #[error("decoded solution fails validation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Decode(Vec<Violation>),
    #[error("malformed solution: {0}")]
    Format(String),
}

/// A schedule `M*` at interval `I` and length `L` together with a warp range
/// per node, and the `op`/`live`/`opw` tables over the straight-line program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSolution {
    pub shape: Shape,
    /// `M*(v)`: cycle of copy 0.
    pub start: Vec<u32>,
    /// `A*(v)`.
    pub ranges: Vec<WarpRange>,
    /// `op[v][i][t]` for `t` in `[0, T)`.
    pub op: Vec<Vec<Vec<bool>>>,
    /// `live[v][i][t]` for `t` in `[0, T]`.
    pub live: Vec<Vec<Vec<bool>>>,
    /// `opw[v][w]` over every warp slot.
    pub opw: Vec<Vec<bool>>,
    pub streaming_depths: BTreeMap<String, u32>,
}

/// Whether copy `i` of `v` must still be live at the end of the program:
/// some consumer reads it from a copy past the last one.
pub fn live_out(g: &DepGraph, copies: u32, v: usize, i: u32) -> bool {
    g.out_edges(v).any(|e| i + e.delta >= copies)
}

/// Backward propagation of the liveness rules from the boundary at `T`: a
/// live value stays live going backwards until its definition; a dead value
/// becomes live just before a cycle in which a consumer issues.
pub fn propagate_liveness(g: &DepGraph, shape: Shape, op: &[Vec<Vec<bool>>]) -> Vec<Vec<Vec<bool>>> {
    let horizon = shape.horizon as usize;
    let at = |v: usize, i: u32, t: usize| -> bool {
        op.get(v).and_then(|c| c.get(i as usize)).and_then(|row| row.get(t)).copied().unwrap_or(false)
    };
    let mut live = vec![vec![vec![false; horizon + 1]; shape.copies as usize]; g.nodes.len()];
    for v in 0..g.nodes.len() {
        for i in 0..shape.copies {
            let row = &mut live[v][i as usize];
            row[horizon] = live_out(g, shape.copies, v, i);
            for t in (1..=horizon).rev() {
                row[t - 1] = if row[t] {
                    !at(v, i, t)
                } else {
                    g.out_edges(v).any(|e| i + e.delta < shape.copies && at(e.dst, i + e.delta, t))
                };
            }
        }
    }
    live
}

impl JointSolution {
    /// Builds the tables implied by copy-0 start cycles and warp ranges.
    pub fn from_assignment(
        g: &DepGraph,
        m: &MachineDesc,
        shape: Shape,
        start: Vec<u32>,
        ranges: Vec<WarpRange>,
        streaming_depths: BTreeMap<String, u32>,
    ) -> Self {
        let horizon = shape.horizon as usize;
        let mut op = vec![vec![vec![false; horizon]; shape.copies as usize]; g.nodes.len()];
        for (v, &s) in start.iter().enumerate() {
            for i in 0..shape.copies {
                let t = (s + i * shape.ii) as usize;
                if t < horizon {
                    op[v][i as usize][t] = true;
                }
            }
        }
        let live = propagate_liveness(g, shape, &op);
        let opw = ranges
            .iter()
            .map(|r| (0..m.total_warps()).map(|w| r.contains(w)).collect())
            .collect();
        JointSolution { shape, start, ranges, op, live, opw, streaming_depths }
    }

    pub fn ii(&self) -> u32 {
        self.shape.ii
    }

    pub fn length(&self) -> u32 {
        self.shape.length
    }

    pub fn copies(&self) -> u32 {
        self.shape.copies
    }

    pub fn horizon(&self) -> u32 {
        self.shape.horizon
    }

    /// `M*` as a modulo schedule at the attempted interval and length.
    pub fn schedule(&self) -> ModuloSchedule {
        ModuloSchedule { ii: self.shape.ii, length: self.shape.length, start: self.start.clone() }
    }

    /// Issue cycle of copy `i` of `v` in the straight-line program.
    pub fn placement(&self, v: usize, i: u32) -> u32 {
        self.start[v] + i * self.shape.ii
    }

    pub fn to_json(&self, g: &DepGraph) -> Value {
        let mut ms = Map::new();
        let mut a = Map::new();
        for (v, node) in g.nodes.iter().enumerate() {
            ms.insert(node.id.clone(), json!(self.start[v]));
            a.insert(node.id.clone(), json!(self.ranges[v].first()));
        }
        json!({
            "I": self.shape.ii,
            "L": self.shape.length,
            "M": ms,
            "A": a,
            "streaming_depths": self.streaming_depths,
        })
    }

    /// Rebuilds a solution from the `{I, L, M, A}` document written by
    /// [`JointSolution::to_json`].
    pub fn from_json(value: &Value, g: &DepGraph, m: &MachineDesc) -> Result<Self, JointError> {
        let field = |k: &str| value.get(k).ok_or_else(|| JointError::Format(format!("missing `{k}`")));
        let int = |v: &Value, what: &str| -> Result<u32, JointError> {
            v.as_u64()
                .and_then(|x| u32::try_from(x).ok())
                .ok_or_else(|| JointError::Format(format!("`{what}` is not a non-negative integer")))
        };
        let ii = int(field("I")?, "I")?;
        let length = int(field("L")?, "L")?;
        if ii == 0 || length == 0 {
            return Err(JointError::Format("`I` and `L` must be positive".into()));
        }
        let ms = field("M")?.as_object().ok_or_else(|| JointError::Format("`M` is not an object".into()))?;
        let a = field("A")?.as_object().ok_or_else(|| JointError::Format("`A` is not an object".into()))?;
        let mut start = Vec::new();
        let mut ranges = Vec::new();
        for node in &g.nodes {
            let t = ms.get(&node.id).ok_or_else(|| JointError::Format(format!("no cycle for `{}`", node.id)))?;
            start.push(int(t, &node.id)?);
            let w = a.get(&node.id).ok_or_else(|| JointError::Format(format!("no warp for `{}`", node.id)))?;
            let w = int(w, &node.id)?;
            let range = m
                .legal_ranges(node)
                .into_iter()
                .find(|r| r.first() == w)
                .unwrap_or_else(|| WarpRange { slots: (w..w + node.warps_required).collect() });
            ranges.push(range);
        }
        for id in ms.keys().chain(a.keys()) {
            if g.node_index(id).is_none() {
                return Err(JointError::Format(format!("unknown node `{id}`")));
            }
        }
        let mut depths = BTreeMap::new();
        if let Some(d) = value.get("streaming_depths").and_then(Value::as_object) {
            for (k, v) in d {
                depths.insert(k.clone(), int(v, k)?);
            }
        }
        Ok(Self::from_assignment(g, m, Shape::new(ii, length), start, ranges, depths))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_problem;

    #[test]
    fn gemm_exp_gemm_liveness_of_s() {
        let (g, m) = parse_problem(include_str!("../../fixtures/gemm_exp_gemm.json")).unwrap();
        let shape = Shape::new(2, 4);
        let ranges = vec![WarpRange::single(0); 3];
        let sol = JointSolution::from_assignment(&g, &m, shape, vec![0, 2, 3], ranges, BTreeMap::new());
        assert_eq!(sol.live[0][0], vec![true, true, false, false, false, false, false]);
        // O carries a value into the next iteration.
        assert!(sol.live[2][1][6]);
        assert!(!sol.live[0][1][6] && !sol.live[1][1][6]);
        assert!(!sol.live[2][0][6]);
    }

    #[test]
    fn json_round_trip() {
        let (g, m) = parse_problem(include_str!("../../fixtures/gemm_exp_gemm.json")).unwrap();
        let ranges = vec![WarpRange::single(0), WarpRange::single(1), WarpRange::single(0)];
        let sol = JointSolution::from_assignment(&g, &m, Shape::new(2, 4), vec![0, 2, 3], ranges, BTreeMap::new());
        let back = JointSolution::from_json(&sol.to_json(&g), &g, &m).unwrap();
        assert_eq!(back, sol);
    }
}
