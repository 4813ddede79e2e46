//! Dependence graph and machine model.
//!
//! A problem is a loop body expressed as a [`DepGraph`] of tile-level
//! operations plus a [`MachineDesc`] describing functional-unit capacities,
//! memories and warps. Both are read from a single JSON document (see
//! [`parse_problem`]) and checked with [`validate_graph`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalUnit {
    pub name: String,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    pub name: String,
    pub capacity: u64,
}

/// Warp slots are numbered `0..=num_warps`: `num_warps` compute warps plus
/// the dedicated variable-latency warp at index `vl_warp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineDesc {
    pub units: Vec<FunctionalUnit>,
    pub memories: Vec<Memory>,
    pub num_warps: u32,
    pub reg_limit: u64,
    pub vl_warp: u32,
}

/// A set of warp slots that cooperatively issue one operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WarpRange {
    pub slots: Vec<u32>,
}

impl WarpRange {
    pub fn single(slot: u32) -> Self {
        WarpRange { slots: vec![slot] }
    }

    pub fn first(&self) -> u32 {
        self.slots[0]
    }

    pub fn contains(&self, slot: u32) -> bool {
        self.slots.contains(&slot)
    }

    pub fn overlaps(&self, other: &WarpRange) -> bool {
        self.slots.iter().any(|s| other.contains(*s))
    }
}

impl fmt::Display for WarpRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let contiguous = self.slots.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous {
            write!(f, "{}..{}", self.slots[0], self.slots[self.slots.len() - 1])
        } else {
            let parts: Vec<String> = self.slots.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl MachineDesc {
    pub fn unit_index(&self, name: &str) -> Option<usize> {
        self.units.iter().position(|u| u.name == name)
    }

    pub fn memory_index(&self, name: &str) -> Option<usize> {
        self.memories.iter().position(|m| m.name == name)
    }

    /// Total number of warp slots, including the variable-latency warp.
    pub fn total_warps(&self) -> u32 {
        self.num_warps + 1
    }

    /// Compute warp slots in ascending order (every slot except `vl_warp`).
    pub fn compute_warps(&self) -> Vec<u32> {
        (0..self.total_warps()).filter(|w| *w != self.vl_warp).collect()
    }

    /// Aligned ranges of `width` compute warps: the `j`-th range holds compute
    /// warps `j*width .. (j+1)*width` in compute-warp order.
    pub fn aligned_ranges(&self, width: u32) -> Vec<WarpRange> {
        let compute = self.compute_warps();
        if width == 0 {
            return Vec::new();
        }
        compute
            .chunks(width as usize)
            .filter(|c| c.len() == width as usize)
            .map(|c| WarpRange { slots: c.to_vec() })
            .collect()
    }

    /// Legal placements for a node: the variable-latency warp alone for
    /// variable-latency nodes, aligned compute ranges otherwise.
    pub fn legal_ranges(&self, node: &Node) -> Vec<WarpRange> {
        if node.variable_latency {
            vec![WarpRange::single(self.vl_warp)]
        } else {
            self.aligned_ranges(node.warps_required)
        }
    }
}

/// Resource reservation table: `rows[unit][cycle]` instances of each unit
/// held during each cycle of execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rrt {
    rows: Vec<Vec<u32>>,
    cycles: u32,
}

impl Rrt {
    /// Rows shorter than `cycles` are zero-padded.
    pub fn new(mut rows: Vec<Vec<u32>>, cycles: u32) -> Self {
        for row in &mut rows {
            row.resize(cycles as usize, 0);
        }
        Rrt { rows, cycles }
    }

    /// One unit busy with `occupancy` instances for `cycles` consecutive cycles.
    pub fn uniform(num_units: usize, unit: usize, occupancy: u32, cycles: u32) -> Self {
        let mut rows = vec![vec![0; cycles as usize]; num_units];
        rows[unit] = vec![occupancy; cycles as usize];
        Rrt { rows, cycles }
    }

    pub fn empty(num_units: usize) -> Self {
        Rrt { rows: vec![Vec::new(); num_units], cycles: 0 }
    }

    pub fn cycles(&self) -> u32 {
        self.cycles
    }

    pub fn num_units(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, unit: usize, cycle: u32) -> u32 {
        self.rows.get(unit).and_then(|r| r.get(cycle as usize)).copied().unwrap_or(0)
    }

    pub fn row(&self, unit: usize) -> &[u32] {
        &self.rows[unit]
    }

    pub fn total_usage(&self, unit: usize) -> u64 {
        self.rows[unit].iter().map(|&x| x as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&x| x == 0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub rrt: Rrt,
    pub regs: u64,
    /// Indexed by memory kind, parallel to `MachineDesc::memories`.
    pub footprint: Vec<u64>,
    pub spill_cost: u32,
    pub variable_latency: bool,
    pub warps_required: u32,
    /// Mnemonic used in generated listings; defaults to the lowercased id.
    pub opcode: Option<String>,
    /// External operands, e.g. `K[i]` for a per-iteration tile.
    pub inputs: Vec<String>,
}

impl Node {
    /// A single-warp node with no memory or register cost.
    pub fn new(id: impl Into<String>, rrt: Rrt) -> Self {
        Node {
            id: id.into(),
            rrt,
            regs: 0,
            footprint: Vec::new(),
            spill_cost: 0,
            variable_latency: false,
            warps_required: 1,
            opcode: None,
            inputs: Vec::new(),
        }
    }

    pub fn cycles(&self) -> u32 {
        self.rrt.cycles()
    }

    /// Cycles the node occupies in a schedule; zero-latency nodes still take
    /// an issue slot.
    pub fn span(&self) -> u32 {
        self.cycles().max(1)
    }

    pub fn footprint_in(&self, memory: usize) -> u64 {
        self.footprint.get(memory).copied().unwrap_or(0)
    }

    pub fn opcode(&self) -> String {
        self.opcode.clone().unwrap_or_else(|| self.id.to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub d: u32,
    pub delta: u32,
    pub blocking: bool,
}

impl Edge {
    pub fn new(src: usize, dst: usize, d: u32, delta: u32) -> Self {
        Edge { src, dst, d, delta, blocking: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl DepGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.dst == v)
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.src == v)
    }

    pub fn max_delta(&self) -> u32 {
        self.edges.iter().map(|e| e.delta).max().unwrap_or(0)
    }

    pub fn total_cycles(&self) -> u32 {
        self.nodes.iter().map(Node::cycles).sum()
    }

    pub fn max_cycles(&self) -> u32 {
        self.nodes.iter().map(Node::cycles).max().unwrap_or(0)
    }

    /// Node indices in a topological order of the zero-delta subgraph, or
    /// `None` if that subgraph has a cycle.
    pub fn zero_delta_topo_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for e in self.edges.iter().filter(|e| e.delta == 0) {
            indeg[e.dst] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for e in self.edges.iter().filter(|e| e.delta == 0 && e.src == v) {
                indeg[e.dst] -= 1;
                if indeg[e.dst] == 0 {
                    ready.push(e.dst);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Longest zero-delta path (sum of `d`) ending at each node.
    pub fn zero_delta_earliest(&self) -> Option<Vec<u32>> {
        let order = self.zero_delta_topo_order()?;
        let mut earliest = vec![0u32; self.nodes.len()];
        for &v in &order {
            for e in self.edges.iter().filter(|e| e.delta == 0 && e.src == v) {
                earliest[e.dst] = earliest[e.dst].max(earliest[v] + e.d);
            }
        }
        Some(earliest)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("reference to undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    machine: MachineFile,
    graph: GraphFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineFile {
    units: Vec<UnitFile>,
    #[serde(default)]
    memories: Vec<MemoryFile>,
    num_warps: u32,
    reg_limit: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vl_warp: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitFile {
    name: String,
    capacity: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryFile {
    name: String,
    capacity: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    nodes: Vec<NodeFile>,
    #[serde(default)]
    edges: Vec<EdgeFile>,
}

fn is_zero_u64(x: &u64) -> bool {
    *x == 0
}
fn is_zero_u32(x: &u32) -> bool {
    *x == 0
}
fn is_false(x: &bool) -> bool {
    !*x
}
fn is_one(x: &u32) -> bool {
    *x == 1
}
fn one() -> u32 {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: String,
    #[serde(default)]
    rrt: BTreeMap<String, Vec<u32>>,
    #[serde(default)]
    cycles: Option<u32>,
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    regs: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    footprint: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    spill_cost: u32,
    #[serde(default, skip_serializing_if = "is_false")]
    variable_latency: bool,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    warps_required: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opcode: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    src: String,
    dst: String,
    d: u32,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    delta: u32,
    #[serde(default, skip_serializing_if = "is_false")]
    blocking: bool,
}

/// Parses a problem document into a graph and machine description.
pub fn parse_problem(text: &str) -> Result<(DepGraph, MachineDesc), ParseError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let machine = build_machine(file.machine)?;
    let graph = build_graph(file.graph, &machine)?;
    Ok((graph, machine))
}

fn check_unique<'a>(
    kind: &'static str,
    names: impl Iterator<Item = &'a str>,
) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(ParseError::Duplicate { kind, name: name.to_string() });
        }
    }
    Ok(())
}

fn build_machine(file: MachineFile) -> Result<MachineDesc, ParseError> {
    check_unique("unit", file.units.iter().map(|u| u.name.as_str()))?;
    check_unique("memory", file.memories.iter().map(|m| m.name.as_str()))?;
    if let Some(u) = file.units.iter().find(|u| u.capacity == 0) {
        return Err(ParseError::Invalid(format!("unit `{}` has zero capacity", u.name)));
    }
    if file.num_warps == 0 {
        return Err(ParseError::Invalid("num_warps must be at least 1".into()));
    }
    let vl_warp = file.vl_warp.unwrap_or(file.num_warps);
    if vl_warp > file.num_warps {
        return Err(ParseError::Invalid(format!(
            "vl_warp {vl_warp} outside warp slots 0..={}",
            file.num_warps
        )));
    }
    Ok(MachineDesc {
        units: file
            .units
            .into_iter()
            .map(|u| FunctionalUnit { name: u.name, capacity: u.capacity })
            .collect(),
        memories: file
            .memories
            .into_iter()
            .map(|m| Memory { name: m.name, capacity: m.capacity })
            .collect(),
        num_warps: file.num_warps,
        reg_limit: file.reg_limit,
        vl_warp,
    })
}

fn build_graph(file: GraphFile, machine: &MachineDesc) -> Result<DepGraph, ParseError> {
    if file.nodes.is_empty() {
        return Err(ParseError::EmptyGraph);
    }
    check_unique("node", file.nodes.iter().map(|n| n.id.as_str()))?;
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for nf in file.nodes {
        let longest = nf.rrt.values().map(Vec::len).max().unwrap_or(0) as u32;
        let cycles = nf.cycles.unwrap_or(longest.max(1));
        if longest > cycles {
            return Err(ParseError::Invalid(format!(
                "node `{}`: RRT has {longest} rows but cycles is {cycles}",
                nf.id
            )));
        }
        if cycles == 0 && !nf.variable_latency {
            return Err(ParseError::Invalid(format!(
                "node `{}`: only variable-latency nodes may take zero cycles",
                nf.id
            )));
        }
        let mut rows = vec![Vec::new(); machine.units.len()];
        for (unit, row) in nf.rrt {
            let idx = machine
                .unit_index(&unit)
                .ok_or(ParseError::Undeclared { kind: "unit", name: unit.clone() })?;
            rows[idx] = row;
        }
        let mut footprint = vec![0; machine.memories.len()];
        for (mem, amount) in nf.footprint {
            let idx = machine
                .memory_index(&mem)
                .ok_or(ParseError::Undeclared { kind: "memory", name: mem.clone() })?;
            footprint[idx] = amount;
        }
        if nf.warps_required == 0 {
            return Err(ParseError::Invalid(format!(
                "node `{}`: warps_required must be at least 1",
                nf.id
            )));
        }
        nodes.push(Node {
            id: nf.id,
            rrt: Rrt::new(rows, cycles),
            regs: nf.regs,
            footprint,
            spill_cost: nf.spill_cost,
            variable_latency: nf.variable_latency,
            warps_required: nf.warps_required,
            opcode: nf.opcode,
            inputs: nf.inputs,
        });
    }
    let index: HashMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or(ParseError::Undeclared { kind: "node", name: name.to_string() })
    };
    let mut edges = Vec::with_capacity(file.edges.len());
    for ef in &file.edges {
        edges.push(Edge {
            src: lookup(&ef.src)?,
            dst: lookup(&ef.dst)?,
            d: ef.d,
            delta: ef.delta,
            blocking: ef.blocking,
        });
    }
    Ok(DepGraph { nodes, edges })
}

/// Serializes a problem back into the document format accepted by
/// [`parse_problem`].
pub fn serialize_problem(graph: &DepGraph, machine: &MachineDesc) -> String {
    let file = ProblemFile {
        machine: MachineFile {
            units: machine
                .units
                .iter()
                .map(|u| UnitFile { name: u.name.clone(), capacity: u.capacity })
                .collect(),
            memories: machine
                .memories
                .iter()
                .map(|m| MemoryFile { name: m.name.clone(), capacity: m.capacity })
                .collect(),
            num_warps: machine.num_warps,
            reg_limit: machine.reg_limit,
            vl_warp: Some(machine.vl_warp),
        },
        graph: GraphFile {
            nodes: graph
                .nodes
                .iter()
                .map(|n| NodeFile {
                    id: n.id.clone(),
                    rrt: machine
                        .units
                        .iter()
                        .enumerate()
                        .filter(|(u, _)| n.rrt.row(*u).iter().any(|&x| x != 0))
                        .map(|(u, unit)| (unit.name.clone(), n.rrt.row(u).to_vec()))
                        .collect(),
                    cycles: Some(n.cycles()),
                    regs: n.regs,
                    footprint: machine
                        .memories
                        .iter()
                        .enumerate()
                        .filter(|(m, _)| n.footprint_in(*m) != 0)
                        .map(|(m, mem)| (mem.name.clone(), n.footprint_in(m)))
                        .collect(),
                    spill_cost: n.spill_cost,
                    variable_latency: n.variable_latency,
                    warps_required: n.warps_required,
                    opcode: n.opcode.clone(),
                    inputs: n.inputs.clone(),
                })
                .collect(),
            edges: graph
                .edges
                .iter()
                .map(|e| EdgeFile {
                    src: graph.nodes[e.src].id.clone(),
                    dst: graph.nodes[e.dst].id.clone(),
                    d: e.d,
                    delta: e.delta,
                    blocking: e.blocking,
                })
                .collect(),
        },
    };
    serde_json::to_string_pretty(&file).expect("problem serialization cannot fail")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    ZeroDeltaCycle { nodes: Vec<String> },
    RrtExceedsCapacity { node: String, unit: String, cycle: u32, usage: u32, capacity: u32 },
    TooManyWarps { node: String, required: u32, available: u32 },
    VariableLatencyMultiWarp { node: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::ZeroDeltaCycle { nodes } => {
                write!(f, "zero-delta cycle through {}", nodes.join(", "))
            }
            Diagnostic::RrtExceedsCapacity { node, unit, cycle, usage, capacity } => write!(
                f,
                "RRT exceeds capacity: node `{node}` uses {usage} of unit `{unit}` \
                 (capacity {capacity}) at cycle {cycle}"
            ),
            Diagnostic::TooManyWarps { node, required, available } => write!(
                f,
                "node `{node}` requires {required} warps but only {available} compute warps exist"
            ),
            Diagnostic::VariableLatencyMultiWarp { node } => {
                write!(f, "variable-latency node `{node}` must require exactly one warp")
            }
        }
    }
}

/// Structural checks that every modulo-schedulable problem satisfies.
pub fn validate_graph(graph: &DepGraph, machine: &MachineDesc) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for scc in zero_delta_cycles(graph) {
        out.push(Diagnostic::ZeroDeltaCycle {
            nodes: scc.iter().map(|&v| graph.nodes[v].id.clone()).collect(),
        });
    }
    for node in &graph.nodes {
        for (u, unit) in machine.units.iter().enumerate() {
            for c in 0..node.cycles() {
                let usage = node.rrt.get(u, c);
                if usage > unit.capacity {
                    out.push(Diagnostic::RrtExceedsCapacity {
                        node: node.id.clone(),
                        unit: unit.name.clone(),
                        cycle: c,
                        usage,
                        capacity: unit.capacity,
                    });
                }
            }
        }
        if node.warps_required > machine.num_warps {
            out.push(Diagnostic::TooManyWarps {
                node: node.id.clone(),
                required: node.warps_required,
                available: machine.num_warps,
            });
        }
        if node.variable_latency && node.warps_required != 1 {
            out.push(Diagnostic::VariableLatencyMultiWarp { node: node.id.clone() });
        }
    }
    out
}

/// Strongly connected components of the zero-delta subgraph that contain a
/// cycle (size > 1, or a zero-delta self-loop).
fn zero_delta_cycles(graph: &DepGraph) -> Vec<Vec<usize>> {
    let n = graph.nodes.len();
    let mut succ = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for e in graph.edges.iter().filter(|e| e.delta == 0) {
        succ[e.src].push(e.dst);
        if e.src == e.dst {
            self_loop[e.src] = true;
        }
    }
    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = work.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    if comp.len() > 1 || self_loop[v] {
                        comp.sort_unstable();
                        out.push(comp);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const GEMM_EXP_GEMM: &str = include_str!("../fixtures/gemm_exp_gemm.json");

    #[test]
    fn parses_attention_example() {
        let (g, m) = parse_problem(GEMM_EXP_GEMM).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(m.units.len(), 2);
        assert!(validate_graph(&g, &m).is_empty());
        let o = g.node_index("O").unwrap();
        assert!(g.edges.iter().any(|e| e.src == o && e.dst == o && e.delta == 1));
    }

    #[test]
    fn defaults_are_applied() {
        let text = r#"{"machine":{"units":[{"name":"TC","capacity":1}],"num_warps":2,"reg_limit":8},
            "graph":{"nodes":[{"id":"A","rrt":{"TC":[1]}},{"id":"B","rrt":{"TC":[1]}}],
                     "edges":[{"src":"A","dst":"B","d":1}]}}"#;
        let (g, m) = parse_problem(text).unwrap();
        assert_eq!(m.vl_warp, 2);
        assert_eq!(g.edges[0].delta, 0);
        assert!(!g.edges[0].blocking);
        assert_eq!(g.nodes[0].warps_required, 1);
        assert_eq!(g.nodes[0].spill_cost, 0);
        assert_eq!(g.nodes[0].regs, 0);
        assert_eq!(g.nodes[0].cycles(), 1);
    }

    #[test]
    fn empty_graph_is_rejected() {
        let text = r#"{"machine":{"units":[],"num_warps":1,"reg_limit":1},"graph":{"nodes":[]}}"#;
        let err = parse_problem(text).unwrap_err();
        assert_eq!(err.to_string(), "graph has no nodes");
    }

    #[test]
    fn undeclared_edge_target_is_named() {
        let text = r#"{"machine":{"units":[{"name":"TC","capacity":1}],"num_warps":1,"reg_limit":1},
            "graph":{"nodes":[{"id":"A","rrt":{"TC":[1]}}],"edges":[{"src":"A","dst":"X","d":1}]}}"#;
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("`X`"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_problem("{\n  \"machine\": [}").unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"machine":{"units":[],"num_warps":1,"reg_limit":1,"bogus":3},"graph":{"nodes":[]}}"#;
        assert!(matches!(parse_problem(text), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn duplicate_node_ids_are_rejected() {
        let text = r#"{"machine":{"units":[{"name":"TC","capacity":1}],"num_warps":1,"reg_limit":1},
            "graph":{"nodes":[{"id":"A","rrt":{"TC":[1]}},{"id":"A","rrt":{"TC":[1]}}]}}"#;
        assert_eq!(
            parse_problem(text).unwrap_err(),
            ParseError::Duplicate { kind: "node", name: "A".into() }
        );
    }

    fn two_node_machine() -> MachineDesc {
        MachineDesc {
            units: vec![FunctionalUnit { name: "TC".into(), capacity: 1 }],
            memories: vec![],
            num_warps: 1,
            reg_limit: 1,
            vl_warp: 1,
        }
    }

    #[test]
    fn zero_delta_cycle_is_diagnosed() {
        let g = DepGraph {
            nodes: vec![Node::new("A", Rrt::uniform(1, 0, 1, 1)), Node::new("B", Rrt::uniform(1, 0, 1, 1))],
            edges: vec![Edge::new(0, 1, 1, 0), Edge::new(1, 0, 1, 0)],
        };
        let diags = validate_graph(&g, &two_node_machine());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].to_string().contains("zero-delta cycle"));
    }

    #[test]
    fn oversubscribed_rrt_is_diagnosed() {
        let g = DepGraph { nodes: vec![Node::new("A", Rrt::uniform(1, 0, 2, 1))], edges: vec![] };
        let diags = validate_graph(&g, &two_node_machine());
        assert!(diags[0].to_string().contains("RRT exceeds capacity"));
    }

    #[test]
    fn aligned_ranges_skip_the_variable_latency_warp() {
        let mut m = two_node_machine();
        m.num_warps = 4;
        m.vl_warp = 0;
        assert_eq!(m.compute_warps(), vec![1, 2, 3, 4]);
        let pairs = m.aligned_ranges(2);
        assert_eq!(pairs, vec![WarpRange { slots: vec![1, 2] }, WarpRange { slots: vec![3, 4] }]);
        assert_eq!(m.aligned_ranges(3).len(), 1);
    }
}
