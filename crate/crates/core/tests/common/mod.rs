#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use weftsched::ir::{parse_problem, DepGraph, Edge, FunctionalUnit, MachineDesc, Memory, Node, Rrt, WarpRange};
use weftsched::joint::JointSolution;
use weftsched::sim::validate_program;
use weftsched::straightline::Shape;

pub fn fixture(name: &str) -> (DepGraph, MachineDesc) {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_problem(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn machine(caps: &[u32], num_warps: u32, reg_limit: u64) -> MachineDesc {
    MachineDesc {
        units: caps.iter().enumerate().map(|(i, &c)| FunctionalUnit { name: format!("U{i}"), capacity: c }).collect(),
        memories: Vec::new(),
        num_warps,
        reg_limit,
        vl_warp: num_warps,
    }
}

/// Random graph without warp-related costs: single-unit nodes of 1..=max_cycles
/// cycles, forward edges with `delta` in 0..=max_delta and back edges with
/// `delta >= 1`.
pub fn random_plain(rng: &mut impl Rng, max_nodes: usize, max_cycles: u32, max_delta: u32, units: usize) -> DepGraph {
    let n = rng.gen_range(1..=max_nodes);
    let nodes = (0..n)
        .map(|v| Node::new(format!("N{v}"), Rrt::uniform(units, rng.gen_range(0..units), 1, rng.gen_range(1..=max_cycles))))
        .collect();
    let mut edges = Vec::new();
    for _ in 0..rng.gen_range(0..=n + 1) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let delta = if a < b { rng.gen_range(0..=max_delta) } else { rng.gen_range(1..=max_delta.max(1)) };
        edges.push(Edge::new(a, b, rng.gen_range(0..=2), delta));
    }
    DepGraph { nodes, edges }
}

/// Random instance exercising warps: registers, spills, blocking edges and
/// shared memory on top of [`random_plain`].
pub fn random_ws(rng: &mut impl Rng, max_nodes: usize) -> (DepGraph, MachineDesc) {
    let mut g = random_plain(rng, max_nodes, 2, 1, 3);
    let mut m = machine(&[1, 1, 1], rng.gen_range(1..=2), rng.gen_range(1..=5));
    if rng.gen_bool(0.5) {
        m.memories.push(Memory { name: "smem".into(), capacity: rng.gen_range(1..=6) });
    }
    for node in &mut g.nodes {
        node.regs = rng.gen_range(0..=2);
        node.spill_cost = rng.gen_range(0..=1);
        if !m.memories.is_empty() {
            node.footprint = vec![rng.gen_range(0..=2)];
        }
    }
    for e in &mut g.edges {
        e.blocking = rng.gen_bool(0.3);
    }
    (g, m)
}

/// Every joint solution at `(ii, length)` by enumeration of copy-0 cycles and
/// warp ranges. Calls `f` for each valid one; stops early when it returns
/// `false`.
pub fn enumerate_joint(
    g: &DepGraph,
    m: &MachineDesc,
    ii: u32,
    length: u32,
    mut f: impl FnMut(&JointSolution) -> bool,
) {
    let shape = Shape::new(ii, length);
    let n = g.nodes.len();
    let limits: Vec<u32> = g.nodes.iter().map(|v| length.saturating_sub(v.span()) + 1).collect();
    if limits.contains(&0) || length < g.nodes.iter().map(|v| v.span()).max().unwrap_or(1) {
        return;
    }
    let ranges: Vec<Vec<WarpRange>> = g.nodes.iter().map(|v| m.legal_ranges(v)).collect();
    if ranges.iter().any(Vec::is_empty) {
        return;
    }
    let mut start = vec![0u32; n];
    loop {
        let mut pick = vec![0usize; n];
        loop {
            let rs: Vec<WarpRange> = (0..n).map(|v| ranges[v][pick[v]].clone()).collect();
            let sol = JointSolution::from_assignment(g, m, shape, start.clone(), rs, BTreeMap::new());
            if validate_program(&sol, g, m).is_empty() && !f(&sol) {
                return;
            }
            let mut k = 0;
            while k < n {
                pick[k] += 1;
                if pick[k] < ranges[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        let mut k = 0;
        while k < n {
            start[k] += 1;
            if start[k] < limits[k] {
                break;
            }
            start[k] = 0;
            k += 1;
        }
        if k == n {
            return;
        }
    }
}

pub fn joint_feasible(g: &DepGraph, m: &MachineDesc, ii: u32, length: u32) -> Option<JointSolution> {
    let mut found = None;
    enumerate_joint(g, m, ii, length, |s| {
        found = Some(s.clone());
        false
    });
    found
}
