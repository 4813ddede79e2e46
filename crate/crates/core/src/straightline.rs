//! The straight-line program: `ceil(L/I)` overlapped copies of one iteration,
//! each shifted `I` cycles from the previous.

use serde_json::{json, Value};

use crate::ir::DepGraph;
use crate::modsched::ModuloSchedule;

/// Shape of the overlapped program for a given interval and length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub ii: u32,
    pub length: u32,
    pub copies: u32,
    pub horizon: u32,
}

impl Shape {
    pub fn new(ii: u32, length: u32) -> Self {
        let copies = length.div_ceil(ii).max(1);
        Shape { ii, length, copies, horizon: (copies - 1) * ii + length }
    }

    /// End of the prologue, `(copies - 1) * I`.
    pub fn prologue_end(&self) -> u32 {
        (self.copies - 1) * self.ii
    }

    /// End of the single steady-state trip.
    pub fn steady_end(&self) -> u32 {
        self.prologue_end() + self.ii
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StraightLineProgram {
    pub shape: Shape,
    /// `placements[v][i]`: issue cycle of copy `i` of node `v`.
    pub placements: Vec<Vec<u32>>,
}

impl StraightLineProgram {
    pub fn copies(&self) -> u32 {
        self.shape.copies
    }

    pub fn horizon(&self) -> u32 {
        self.shape.horizon
    }

    pub fn to_json(&self, g: &DepGraph) -> Value {
        let placements: serde_json::Map<String, Value> = g
            .nodes
            .iter()
            .zip(&self.placements)
            .map(|(n, p)| (n.id.clone(), json!(p)))
            .collect();
        json!({
            "copies": self.shape.copies,
            "T": self.shape.horizon,
            "prologue": [0, self.shape.prologue_end()],
            "steady_state": [self.shape.prologue_end(), self.shape.steady_end()],
            "epilogue": [self.shape.steady_end(), self.shape.horizon],
            "placements": placements,
        })
    }
}

pub fn build_straightline(s: &ModuloSchedule) -> StraightLineProgram {
    let shape = Shape::new(s.ii, s.length);
    let placements = s
        .start
        .iter()
        .map(|&m| (0..shape.copies).map(|i| m + i * s.ii).collect())
        .collect();
    StraightLineProgram { shape, placements }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(ii: u32, length: u32, start: Vec<u32>) -> ModuloSchedule {
        ModuloSchedule { ii, length, start }
    }

    #[test]
    fn gemm_exp_gemm_overlap() {
        let q = build_straightline(&schedule(2, 4, vec![0, 2, 3]));
        assert_eq!(q.copies(), 2);
        assert_eq!(q.horizon(), 6);
        assert_eq!(q.placements[0], vec![0, 2]);
        assert_eq!((q.shape.prologue_end(), q.shape.steady_end()), (2, 4));
    }

    #[test]
    fn single_copy() {
        let q = build_straightline(&schedule(3, 3, vec![0, 1]));
        assert_eq!((q.copies(), q.horizon(), q.shape.prologue_end()), (1, 3, 0));
        assert_eq!(q.shape.steady_end(), q.horizon());
    }

    #[test]
    fn unit_interval() {
        let s = Shape::new(1, 3);
        assert_eq!((s.copies, s.horizon), (3, 5));
    }
}
