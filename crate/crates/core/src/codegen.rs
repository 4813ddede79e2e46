//! Reads the pipelined loop off a joint solution: prologue, one steady-state
//! trip that loops, and epilogue, with versioned value names and warp
//! annotations.
//!
//! Values consumed `k` trips after they are produced get `k` extra versions
//! (`S`, `Sn`, `Snn`, ...). The producer writes the newest name and the
//! body ends with moves shifting every version down by one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::ir::{DepGraph, WarpRange};
use crate::joint::JointSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Prologue,
    SteadyState,
    Epilogue,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Prologue => "prologue",
            Region::SteadyState => "steady_state",
            Region::Epilogue => "epilogue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operand {
    pub name: String,
    /// Producing node for dependence operands; `None` for external inputs.
    pub producer: Option<usize>,
    /// The producer runs on a different warp range, so the value travels
    /// through shared memory.
    pub spill: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    Compute { opcode: String, accumulate: bool },
    /// `dest = operands[0]`, issued at the end of a trip.
    Move,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinedInstr {
    pub node: usize,
    /// Copy of the iteration in the straight-line program.
    pub copy: u32,
    /// `floor(M*(v) / I)`.
    pub stage: u32,
    /// Issue cycle relative to the start of the region.
    pub cycle: u32,
    pub warps: WarpRange,
    pub dest: String,
    pub operands: Vec<Operand>,
    pub kind: InstrKind,
}

impl PipelinedInstr {
    pub fn is_move(&self) -> bool {
        matches!(self.kind, InstrKind::Move)
    }

    /// Source text without annotations.
    pub fn text(&self) -> String {
        let args: Vec<&str> = self.operands.iter().map(|o| o.name.as_str()).collect();
        match &self.kind {
            InstrKind::Move => format!("{} = {}", self.dest, args.join(", ")),
            InstrKind::Compute { opcode, accumulate } => {
                let op = if *accumulate { "+=" } else { "=" };
                format!("{} {op} {opcode}({})", self.dest, args.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinedProgram {
    pub ii: u32,
    pub length: u32,
    pub copies: u32,
    pub prologue: Vec<PipelinedInstr>,
    pub steady_state: Vec<PipelinedInstr>,
    pub epilogue: Vec<PipelinedInstr>,
    /// Versioned names per node id, oldest first.
    pub version_map: BTreeMap<String, Vec<String>>,
}

impl PipelinedProgram {
    pub fn region(&self, r: Region) -> &[PipelinedInstr] {
        match r {
            Region::Prologue => &self.prologue,
            Region::SteadyState => &self.steady_state,
            Region::Epilogue => &self.epilogue,
        }
    }

    /// First value of the loop counter in the steady state.
    pub fn loop_start(&self) -> u32 {
        self.copies - 1
    }

    pub fn to_json(&self, g: &DepGraph) -> Value {
        let region = |r: Region| -> Value {
            self.region(r)
                .iter()
                .map(|ins| {
                    let operands: Vec<Value> = ins
                        .operands
                        .iter()
                        .map(|o| json!({ "name": o.name, "spill": o.spill }))
                        .collect();
                    json!({
                        "node": g.nodes[ins.node].id,
                        "kind": if ins.is_move() { "move" } else { "compute" },
                        "copy": ins.copy,
                        "stage": ins.stage,
                        "cycle": ins.cycle,
                        "warps": ins.warps.slots,
                        "text": ins.text(),
                        "operands": operands,
                    })
                })
                .collect()
        };
        json!({
            "I": self.ii,
            "L": self.length,
            "copies": self.copies,
            "prologue": region(Region::Prologue),
            "steady_state": region(Region::SteadyState),
            "epilogue": region(Region::Epilogue),
            "version_map": self.version_map,
        })
    }
}

/// Iteration that an instruction belongs to, in the region's own terms.
#[derive(Clone, Copy)]
enum Iter {
    Const(i64),
    Loop(i64),
    End(i64),
}

impl Iter {
    fn render(self, offset: i64) -> String {
        let signed = |base: &str, k: i64| match k {
            0 => base.to_string(),
            k if k > 0 => format!("{base}+{k}"),
            k => format!("{base}-{}", -k),
        };
        match self {
            Iter::Const(c) => (c + offset).to_string(),
            Iter::Loop(o) => signed("i", o + offset),
            Iter::End(o) => signed("n", o + offset),
        }
    }
}

/// Rewrites the `i`-relative index of an input such as `K[i]` or `V[i-1]`.
fn index_input(input: &str, it: Iter) -> String {
    let Some(open) = input.rfind('[') else { return input.to_string() };
    let Some(expr) = input[open + 1..].strip_suffix(']') else { return input.to_string() };
    let expr: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let offset = if expr == "i" {
        0
    } else if let Some(k) = expr.strip_prefix("i+").and_then(|k| k.parse::<i64>().ok()) {
        k
    } else if let Some(k) = expr.strip_prefix("i-").and_then(|k| k.parse::<i64>().ok()) {
        -k
    } else {
        return input.to_string();
    };
    format!("{}[{}]", &input[..open], it.render(offset))
}

fn version(id: &str, j: u32) -> String {
    format!("{id}{}", "n".repeat(j as usize))
}

struct Builder<'a> {
    sol: &'a JointSolution,
    g: &'a DepGraph,
    stage: Vec<u32>,
    rank: Vec<usize>,
    /// Extra versions kept per node.
    pending: Vec<u32>,
    accumulates: Vec<bool>,
}

impl<'a> Builder<'a> {
    fn new(sol: &'a JointSolution, g: &'a DepGraph) -> Self {
        let ii = sol.ii();
        let stage: Vec<u32> = sol.start.iter().map(|&m| m / ii).collect();
        let mut rank = vec![0; g.nodes.len()];
        let order = g.zero_delta_topo_order().unwrap_or_else(|| (0..g.nodes.len()).collect());
        for (r, v) in order.into_iter().enumerate() {
            rank[v] = r;
        }
        let accumulates: Vec<bool> = (0..g.nodes.len())
            .map(|v| g.edges.iter().any(|e| e.src == v && e.dst == v && e.delta == 1))
            .collect();
        let mut pending = vec![0; g.nodes.len()];
        for e in &g.edges {
            if e.src == e.dst && e.delta == 1 {
                continue;
            }
            let lag = (stage[e.dst] + e.delta).saturating_sub(stage[e.src]);
            pending[e.src] = pending[e.src].max(lag);
        }
        Builder { sol, g, stage, rank, pending, accumulates }
    }

    fn lag(&self, e: &crate::ir::Edge) -> u32 {
        (self.stage[e.dst] + e.delta).saturating_sub(self.stage[e.src])
    }

    /// Compute instructions of trip `tau` of the straight-line program, in
    /// issue order, with absolute cycles.
    fn trip(&self, tau: u32, it: impl Fn(u32) -> Iter) -> Vec<(u32, PipelinedInstr)> {
        let sol = self.sol;
        let mut out = Vec::new();
        for (v, node) in self.g.nodes.iter().enumerate() {
            if tau < self.stage[v] || tau - self.stage[v] >= sol.copies() {
                continue;
            }
            let copy = tau - self.stage[v];
            let mut operands = Vec::new();
            for e in self.g.in_edges(v) {
                if e.src == v && e.delta == 1 {
                    continue;
                }
                let j = self.pending[e.src] - self.lag(e);
                operands.push(Operand {
                    name: version(&self.g.nodes[e.src].id, j),
                    producer: Some(e.src),
                    spill: sol.ranges[e.src] != sol.ranges[v],
                });
            }
            let iteration = it(copy);
            for input in &node.inputs {
                operands.push(Operand { name: index_input(input, iteration), producer: None, spill: false });
            }
            let instr = PipelinedInstr {
                node: v,
                copy,
                stage: self.stage[v],
                cycle: 0,
                warps: sol.ranges[v].clone(),
                dest: version(&node.id, self.pending[v]),
                operands,
                kind: InstrKind::Compute { opcode: node.opcode(), accumulate: self.accumulates[v] },
            };
            out.push((sol.placement(v, copy), instr));
        }
        out.sort_by_key(|(t, ins)| (*t, self.rank[ins.node]));
        out
    }

    /// End-of-trip moves for `v`, oldest version first.
    fn moves(&self, v: usize, copy: u32, at: u32) -> Vec<(u32, PipelinedInstr)> {
        let id = &self.g.nodes[v].id;
        (0..self.pending[v])
            .map(|j| {
                let ins = PipelinedInstr {
                    node: v,
                    copy,
                    stage: self.stage[v],
                    cycle: 0,
                    warps: self.sol.ranges[v].clone(),
                    dest: version(id, j),
                    operands: vec![Operand { name: version(id, j + 1), producer: Some(v), spill: false }],
                    kind: InstrKind::Move,
                };
                (at, ins)
            })
            .collect()
    }
}

fn reads(ins: &PipelinedInstr, name: &str) -> bool {
    ins.operands.iter().any(|o| o.producer.is_some() && o.name == name)
}

fn relative(instrs: Vec<(u32, PipelinedInstr)>, base: u32) -> Vec<PipelinedInstr> {
    instrs
        .into_iter()
        .map(|(t, mut ins)| {
            ins.cycle = t - base;
            ins
        })
        .collect()
}

/// Slices the solution into prologue `[0, (C-1)I)`, steady state
/// `[(C-1)I, CI)` and epilogue `[CI, T)`.
pub fn synthesize(sol: &JointSolution, g: &DepGraph) -> PipelinedProgram {
    let b = Builder::new(sol, g);
    let (ii, copies) = (sol.ii(), sol.copies());
    let last = copies - 1;

    let mut prologue = Vec::new();
    for tau in 0..last {
        let mut trip = b.trip(tau, |c| Iter::Const(c as i64));
        let end = (tau + 1) * ii - 1;
        for v in 0..g.nodes.len() {
            if tau < b.stage[v] || b.pending[v] == 0 {
                continue;
            }
            // A single pending version whose new value is not read again in
            // this trip can be written to its final name directly.
            let id = &g.nodes[v].id;
            let pos = trip.iter().position(|(_, ins)| ins.node == v && !ins.is_move());
            let foldable = b.pending[v] == 1
                && pos.is_some_and(|p| {
                    trip[p + 1..].iter().all(|(_, ins)| !reads(ins, &version(id, 0)) && !reads(ins, &version(id, 1)))
                });
            if foldable {
                trip[pos.unwrap()].1.dest = version(id, 0);
            } else {
                let copy = tau - b.stage[v];
                trip.extend(b.moves(v, copy, end));
            }
        }
        prologue.extend(trip);
    }

    let base = last * ii;
    let mut body = b.trip(last, |c| Iter::Loop(-((last - c) as i64)));
    for v in 0..g.nodes.len() {
        body.extend(b.moves(v, last - b.stage[v], base + ii - 1));
    }

    let mut tail: Vec<Vec<(u32, PipelinedInstr)>> = Vec::new();
    let mut tau = copies;
    while tau * ii < sol.horizon() {
        tail.push(b.trip(tau, |c| Iter::End(-((copies - c) as i64))));
        tau += 1;
    }
    let mut epilogue = Vec::new();
    for k in 0..tail.len() {
        let mut trip = std::mem::take(&mut tail[k]);
        let end = (copies + k as u32 + 1) * ii - 1;
        for v in 0..g.nodes.len() {
            let id = &g.nodes[v].id;
            let later_old_read = tail[k + 1..]
                .iter()
                .flatten()
                .any(|(_, ins)| (0..b.pending[v]).any(|j| reads(ins, &version(id, j))));
            if later_old_read {
                let copy = (copies + k as u32).saturating_sub(b.stage[v]).min(last);
                trip.extend(b.moves(v, copy, end));
            }
        }
        epilogue.extend(trip);
    }

    let version_map = g
        .nodes
        .iter()
        .enumerate()
        .filter(|(v, _)| b.pending[*v] > 0)
        .map(|(v, n)| (n.id.clone(), (0..=b.pending[v]).map(|j| version(&n.id, j)).collect()))
        .collect();

    PipelinedProgram {
        ii,
        length: sol.length(),
        copies,
        prologue: relative(prologue, 0),
        steady_state: relative(body, base),
        epilogue: relative(epilogue, copies * ii),
        version_map,
    }
}

/// Human-readable listing with region headers and per-line warp and cycle
/// annotations. Cross-warp operands are preceded by a shared-memory
/// transfer line.
pub fn emit_listing(p: &PipelinedProgram) -> String {
    let mut out = String::new();
    let warps_of = |v: usize| p.steady_state.iter().find(|i| i.node == v).map(|i| &i.warps);
    let lines = |out: &mut String, instrs: &[PipelinedInstr]| {
        let width = instrs.iter().map(|i| i.text().len()).max().unwrap_or(0);
        for ins in instrs {
            for o in ins.operands.iter().filter(|o| o.spill) {
                let from = o.producer.and_then(&warps_of).map(|w| w.to_string()).unwrap_or_default();
                let _ = writeln!(out, "    smem.transfer {} warp[{from}] -> warp[{}]", o.name, ins.warps);
            }
            let _ = writeln!(out, "    {:<width$}  @warp[{}] @cycle {}", ins.text(), ins.warps, ins.cycle);
        }
    };
    let _ = writeln!(out, "prologue:");
    lines(&mut out, &p.prologue);
    let _ = writeln!(out, "steady_state: for i in {}..n", p.loop_start());
    lines(&mut out, &p.steady_state);
    let _ = writeln!(out, "epilogue:");
    lines(&mut out, &p.epilogue);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_problem;

    fn gemm_exp_gemm(ranges: Vec<WarpRange>) -> (JointSolution, DepGraph) {
        let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        let shape = crate::straightline::Shape::new(2, 4);
        let sol = JointSolution::from_assignment(&g, &m, shape, vec![0, 2, 3], ranges, BTreeMap::new());
        (sol, g)
    }

    fn texts(instrs: &[PipelinedInstr]) -> Vec<String> {
        instrs.iter().map(|i| i.text()).collect()
    }

    #[test]
    fn gemm_exp_gemm_regions() {
        let (sol, g) = gemm_exp_gemm(vec![WarpRange::single(0); 3]);
        let p = synthesize(&sol, &g);
        assert_eq!(texts(&p.prologue), ["S = gemm(Q, K[0])"]);
        assert_eq!(
            texts(&p.steady_state),
            ["Sn = gemm(Q, K[i])", "P = exp(S)", "O += gemm(P, V[i-1])", "S = Sn"]
        );
        assert_eq!(texts(&p.epilogue), ["P = exp(S)", "O += gemm(P, V[n-1])"]);
        assert_eq!(p.steady_state.iter().map(|i| i.cycle).collect::<Vec<_>>(), [0, 0, 1, 1]);
        assert_eq!(p.version_map["S"], ["S", "Sn"]);
    }

    #[test]
    fn spill_operand_is_flagged() {
        let (sol, g) = gemm_exp_gemm(vec![WarpRange::single(0), WarpRange::single(1), WarpRange::single(0)]);
        let p = synthesize(&sol, &g);
        let o = p.steady_state.iter().find(|i| i.node == 2).unwrap();
        assert!(o.operands[0].spill);
        let listing = emit_listing(&p);
        assert!(listing.contains("smem.transfer P warp[1..1] -> warp[0..0]"));
        assert_eq!(listing, emit_listing(&p));
    }

    #[test]
    fn input_indices() {
        assert_eq!(index_input("K[i]", Iter::Const(2)), "K[2]");
        assert_eq!(index_input("V[i-1]", Iter::Loop(-1)), "V[i-2]");
        assert_eq!(index_input("V[i]", Iter::End(-1)), "V[n-1]");
        assert_eq!(index_input("Q", Iter::Loop(0)), "Q");
    }
}
