use std::collections::{BTreeMap, HashMap};

use crate::ir::{DepGraph, MachineDesc, WarpRange};
use crate::sim::Family;
use crate::solver::{Cmp, Lit, Model, Phase, Sort, SolverRequest, Var};
use crate::straightline::Shape;

use super::JointSolution;

/// The emitted constraint system with the variable tables needed to decode a
/// model. `families[k]` names the family of `request.constraints[k]`.
#[derive(Debug, Clone)]
pub struct JointSystem {
    pub request: SolverRequest,
    pub families: Vec<Family>,
    pub shape: Shape,
    /// `op[v][i][t]`; `None` where the completion rule folds the entry to false.
    pub op: Vec<Vec<Vec<Option<Var>>>>,
    pub live: Vec<Vec<Vec<Var>>>,
    /// Legal ranges of each node with their selector variables.
    pub opw: Vec<Vec<(WarpRange, Var)>>,
    /// Copy-0 placements ruled out only because a later copy would run past
    /// the horizon.
    pub consistency_pruned: usize,
}

struct Emitter<'a> {
    g: &'a DepGraph,
    m: &'a MachineDesc,
    sys: JointSystem,
    live_regs: HashMap<(usize, u32, u32, usize), Var>,
    blocked: BTreeMap<(usize, u32, u32), Var>,
    busy: HashMap<(usize, u32, u32), Var>,
}

impl JointSystem {
    pub fn op_var(&self, v: usize, i: u32, t: u32) -> Option<Var> {
        self.op.get(v)?.get(i as usize)?.get(t as usize).copied().flatten()
    }

    /// Number of emitted constraints in `family`.
    pub fn count(&self, family: Family) -> usize {
        self.families.iter().filter(|f| **f == family).count()
    }

    /// Hints steering the solver towards a seed placement.
    pub fn seed_hints(&self, start: &[u32]) -> Vec<(Var, i64)> {
        start
            .iter()
            .enumerate()
            .filter_map(|(v, &t)| self.op_var(v, 0, t).map(|x| (x, 1)))
            .collect()
    }

    /// Reads the tables back out of a model.
    pub fn decode(&self, m: &MachineDesc, model: &Model) -> JointSolution {
        let horizon = self.shape.horizon as usize;
        let op: Vec<Vec<Vec<bool>>> = self
            .op
            .iter()
            .map(|copies| {
                copies
                    .iter()
                    .map(|row| (0..horizon).map(|t| row[t].is_some_and(|x| model.is_true(x))).collect())
                    .collect()
            })
            .collect();
        let live = self
            .live
            .iter()
            .map(|copies| copies.iter().map(|row| row.iter().map(|&x| model.is_true(x)).collect()).collect())
            .collect();
        let start = op
            .iter()
            .map(|copies| copies[0].iter().position(|&b| b).unwrap_or(0) as u32)
            .collect();
        let ranges: Vec<WarpRange> = self
            .opw
            .iter()
            .map(|opts| {
                opts.iter()
                    .find(|(_, x)| model.is_true(*x))
                    .map(|(r, _)| r.clone())
                    .unwrap_or(WarpRange { slots: Vec::new() })
            })
            .collect();
        let opw = ranges
            .iter()
            .map(|r| (0..m.total_warps()).map(|w| r.contains(w)).collect())
            .collect();
        JointSolution { shape: self.shape, start, ranges, op, live, opw, streaming_depths: BTreeMap::new() }
    }
}

fn name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

impl<'a> Emitter<'a> {
    fn add_clause(&mut self, family: Family, lits: Vec<Lit>) {
        self.sys.request.clause(lits);
        self.sys.families.push(family);
    }

    fn add_linear(&mut self, family: Family, terms: Vec<(i64, Var)>, cmp: Cmp, rhs: i64) {
        self.sys.request.linear(terms, cmp, rhs);
        self.sys.families.push(family);
    }

    fn op(&self, v: usize, i: u32, t: i64) -> Option<Var> {
        if t < 0 {
            return None;
        }
        self.sys.op_var(v, i, t as u32)
    }

    /// Copies `i` whose slots exist, with their possible cycles.
    fn slots(&self, v: usize, i: u32) -> impl Iterator<Item = (u32, Var)> + '_ {
        self.sys.op[v][i as usize].iter().enumerate().filter_map(|(t, x)| x.map(|x| (t as u32, x)))
    }

    fn declare(g: &'a DepGraph, m: &'a MachineDesc, shape: Shape) -> Self {
        let mut r = SolverRequest::new();
        let horizon = shape.horizon;
        let n = g.nodes.len();
        let mut op = vec![Vec::new(); n];
        let mut opw = vec![Vec::new(); n];
        // Decision variables first: copy-0 placements, then warp selectors.
        for (v, node) in g.nodes.iter().enumerate() {
            let id = name(&node.id);
            let last = horizon as i64 - node.span() as i64;
            let row: Vec<Option<Var>> = (0..horizon as i64)
                .map(|t| (t <= last).then(|| r.declare(format!("op_{id}_0_{t}"), Sort::Bool, Phase::High)))
                .collect();
            op[v].push(row);
            for range in m.legal_ranges(node) {
                let x = r.declare(
                    format!("opw_{id}_{}_{}", range.first(), range.slots.last().unwrap()),
                    Sort::Bool,
                    Phase::High,
                );
                opw[v].push((range, x));
            }
        }
        for (v, node) in g.nodes.iter().enumerate() {
            let id = name(&node.id);
            let last = horizon as i64 - node.span() as i64;
            for i in 1..shape.copies {
                let row = (0..horizon as i64)
                    .map(|t| (t <= last).then(|| r.bool_var(format!("op_{id}_{i}_{t}"))))
                    .collect();
                op[v].push(row);
            }
        }
        let live = g
            .nodes
            .iter()
            .map(|node| {
                let id = name(&node.id);
                (0..shape.copies)
                    .map(|i| (0..=horizon).map(|t| r.bool_var(format!("live_{id}_{i}_{t}"))).collect())
                    .collect()
            })
            .collect();
        Emitter {
            g,
            m,
            sys: JointSystem {
                request: r,
                families: Vec::new(),
                shape,
                op,
                live,
                opw,
                consistency_pruned: 0,
            },
            live_regs: HashMap::new(),
            blocked: BTreeMap::new(),
            busy: HashMap::new(),
        }
    }

    fn modsched(&mut self) {
        let (g, shape) = (self.g, self.sys.shape);
        let ii = shape.ii as i64;
        for v in 0..g.nodes.len() {
            for i in 0..shape.copies {
                let terms: Vec<(i64, Var)> = self.slots(v, i).map(|(_, x)| (1, x)).collect();
                self.add_linear(Family::Uniqueness, terms, Cmp::Eq, 1);
            }
            let firsts: Vec<(u32, Var)> = self.slots(v, 0).collect();
            for (t, x) in firsts {
                let mut pruned = false;
                for i in 1..shape.copies {
                    match self.op(v, i, t as i64 + i as i64 * ii) {
                        Some(y) => self.add_clause(Family::Consistency, vec![Lit::neg(x), Lit::pos(y)]),
                        None => pruned = true,
                    }
                }
                if pruned {
                    self.sys.consistency_pruned += 1;
                    self.add_clause(Family::Consistency, vec![Lit::neg(x)]);
                }
            }
        }
        for e in &g.edges {
            let (d, delta) = (e.d as i64, e.delta);
            if delta < shape.copies {
                for i in 0..shape.copies - delta {
                    let srcs: Vec<(u32, Var)> = self.slots(e.src, i).collect();
                    for (t, x) in srcs {
                        let before: Vec<(i64, Var)> = self
                            .slots(e.dst, i + delta)
                            .filter(|&(t2, _)| (t2 as i64) < t as i64 + d)
                            .map(|(_, y)| (1, y))
                            .collect();
                        if !before.is_empty() {
                            let mut terms = before;
                            terms.push((1, x));
                            self.add_linear(Family::Dependence, terms, Cmp::Le, 1);
                        }
                    }
                }
            } else {
                // The consumer copy lies past the program; constrain the
                // copy-0 images instead so the schedule stays a valid modulo
                // schedule.
                let shift = delta as i64 * ii;
                let srcs: Vec<(u32, Var)> = self.slots(e.src, 0).collect();
                for (t, x) in srcs {
                    let before: Vec<(i64, Var)> = self
                        .slots(e.dst, 0)
                        .filter(|&(t2, _)| (t2 as i64) + shift < t as i64 + d)
                        .map(|(_, y)| (1, y))
                        .collect();
                    if !before.is_empty() {
                        let mut terms = before;
                        terms.push((1, x));
                        self.add_linear(Family::Dependence, terms, Cmp::Le, 1);
                    }
                }
            }
        }
        for (f, unit) in self.m.units.iter().enumerate() {
            for t in 0..shape.horizon as i64 {
                let mut terms = Vec::new();
                for (v, node) in g.nodes.iter().enumerate() {
                    for c in 0..node.cycles() {
                        let w = node.rrt.get(f, c);
                        if w == 0 {
                            continue;
                        }
                        for i in 0..shape.copies {
                            if let Some(x) = self.op(v, i, t - c as i64) {
                                terms.push((w as i64, x));
                            }
                        }
                    }
                }
                let total: i64 = terms.iter().map(|t| t.0).sum();
                if total > unit.capacity as i64 {
                    self.add_linear(Family::Capacity, terms, Cmp::Le, unit.capacity as i64);
                }
            }
        }
    }

    fn memory(&mut self) {
        let (g, shape) = (self.g, self.sys.shape);
        let horizon = shape.horizon;
        for v in 0..g.nodes.len() {
            for i in 0..shape.copies {
                let end = self.sys.live[v][i as usize][horizon as usize];
                let lit = if super::live_out(g, shape.copies, v, i) { Lit::pos(end) } else { Lit::neg(end) };
                self.add_clause(Family::Liveness, vec![lit]);
                for t in 1..=horizon {
                    let now = self.sys.live[v][i as usize][t as usize];
                    let prev = self.sys.live[v][i as usize][t as usize - 1];
                    let def = self.op(v, i, t as i64);
                    let uses: Vec<Var> = g
                        .out_edges(v)
                        .filter(|e| i + e.delta < shape.copies)
                        .filter_map(|e| self.op(e.dst, i + e.delta, t as i64))
                        .collect();
                    // Live and defined here: dead just before.
                    if let Some(x) = def {
                        self.add_clause(Family::Liveness, vec![Lit::neg(now), Lit::neg(x), Lit::neg(prev)]);
                    }
                    // Live and not defined here: live just before.
                    let mut c = vec![Lit::neg(now), Lit::pos(prev)];
                    if let Some(x) = def {
                        c.push(Lit::pos(x));
                    }
                    self.add_clause(Family::Liveness, c);
                    // Dead here but used here: live just before.
                    for &u in &uses {
                        self.add_clause(Family::Liveness, vec![Lit::pos(now), Lit::neg(u), Lit::pos(prev)]);
                    }
                    // Dead and unused here: dead just before.
                    let mut c = vec![Lit::pos(now), Lit::neg(prev)];
                    c.extend(uses.iter().map(|&u| Lit::pos(u)));
                    self.add_clause(Family::Liveness, c);
                }
            }
        }
        for (mi, mem) in self.m.memories.iter().enumerate() {
            for t in 0..=horizon {
                let mut terms = Vec::new();
                for (v, node) in g.nodes.iter().enumerate() {
                    let fp = node.footprint_in(mi);
                    if fp == 0 {
                        continue;
                    }
                    for i in 0..shape.copies {
                        terms.push((fp as i64, self.sys.live[v][i as usize][t as usize]));
                    }
                }
                let total: i64 = terms.iter().map(|t| t.0).sum();
                if total > mem.capacity as i64 {
                    self.add_linear(Family::MemoryCapacity, terms, Cmp::Le, mem.capacity.min(i64::MAX as u64) as i64);
                }
            }
        }
    }

    /// `live[v][i][t] and opw[v][r]`, created on first use.
    fn live_on(&mut self, v: usize, i: u32, t: u32, k: usize) -> Var {
        if let Some(&y) = self.live_regs.get(&(v, i, t, k)) {
            return y;
        }
        let (range, w) = self.sys.opw[v][k].clone();
        let live = self.sys.live[v][i as usize][t as usize];
        let y = self.sys.request.bool_var(format!(
            "lw_{}_{i}_{t}_{}",
            name(&self.g.nodes[v].id),
            range.first()
        ));
        self.add_clause(Family::RegisterLimit, vec![Lit::neg(y), Lit::pos(live)]);
        self.add_clause(Family::RegisterLimit, vec![Lit::neg(y), Lit::pos(w)]);
        self.add_clause(Family::RegisterLimit, vec![Lit::pos(y), Lit::neg(live), Lit::neg(w)]);
        self.live_regs.insert((v, i, t, k), y);
        y
    }

    fn blocked(&mut self, v: usize, w: u32, t: u32) -> Var {
        let g = self.g;
        let r = &mut self.sys.request;
        *self
            .blocked
            .entry((v, w, t))
            .or_insert_with(|| r.bool_var(format!("blk_{}_{w}_{t}", name(&g.nodes[v].id))))
    }

    /// Some copy of `o` on warp `w` started within its duration before `t`.
    fn busy(&mut self, o: usize, w: u32, t: u32) -> Var {
        if let Some(&b) = self.busy.get(&(o, w, t)) {
            return b;
        }
        let g = self.g;
        let b = self.sys.request.bool_var(format!("busy_{}_{w}_{t}", name(&g.nodes[o].id)));
        self.busy.insert((o, w, t), b);
        let cycles = g.nodes[o].cycles() as i64;
        let selectors: Vec<Var> = self.sys.opw[o].iter().filter(|(r, _)| r.contains(w)).map(|(_, x)| *x).collect();
        for i in 0..self.sys.shape.copies {
            for t2 in (t as i64 - (cycles - 1))..=t as i64 {
                if let Some(x) = self.op(o, i, t2) {
                    for &s in &selectors {
                        self.add_clause(Family::Concurrency, vec![Lit::neg(x), Lit::neg(s), Lit::pos(b)]);
                    }
                }
            }
        }
        b
    }

    fn warps(&mut self) {
        let (g, m, shape) = (self.g, self.m, self.sys.shape);
        let horizon = shape.horizon;
        for v in 0..g.nodes.len() {
            let terms: Vec<(i64, Var)> = self.sys.opw[v].iter().map(|(_, x)| (1, *x)).collect();
            self.add_linear(Family::WarpUniqueness, terms, Cmp::Eq, 1);
            if g.nodes[v].variable_latency {
                let on_vl: Vec<Lit> = self.sys.opw[v]
                    .iter()
                    .filter(|(r, _)| r.slots == [m.vl_warp])
                    .map(|(_, x)| Lit::pos(*x))
                    .collect();
                self.add_clause(Family::VariableLatency, on_vl);
            }
        }

        // Register limit per warp slot and cycle.
        for w in 0..m.total_warps() {
            let bound: u64 = g
                .nodes
                .iter()
                .enumerate()
                .filter(|(v, _)| self.sys.opw[*v].iter().any(|(r, _)| r.contains(w)))
                .map(|(_, n)| n.regs.saturating_mul(shape.copies as u64))
                .fold(0u64, u64::saturating_add);
            if bound <= m.reg_limit {
                continue;
            }
            for t in 0..=horizon {
                let mut terms = Vec::new();
                for (v, node) in g.nodes.iter().enumerate() {
                    if node.regs == 0 {
                        continue;
                    }
                    for k in 0..self.sys.opw[v].len() {
                        if !self.sys.opw[v][k].0.contains(w) {
                            continue;
                        }
                        for i in 0..shape.copies {
                            let y = self.live_on(v, i, t, k);
                            terms.push((node.regs as i64, y));
                        }
                    }
                }
                self.add_linear(Family::RegisterLimit, terms, Cmp::Le, m.reg_limit.min(i64::MAX as u64) as i64);
            }
        }

        // Cross-warp spills, with `xw[e]` true iff the endpoints sit on
        // different ranges.
        for (k, e) in g.edges.iter().enumerate() {
            let sc = g.nodes[e.src].spill_cost;
            if sc == 0 || e.src == e.dst {
                continue;
            }
            let xw = self.sys.request.bool_var(format!("xw_{k}"));
            let dst_opts = self.sys.opw[e.dst].clone();
            for (r, su) in self.sys.opw[e.src].clone() {
                match dst_opts.iter().find(|(r2, _)| *r2 == r) {
                    Some(&(_, sv)) => {
                        self.add_clause(Family::CrossWarpSpill, vec![Lit::neg(su), Lit::neg(sv), Lit::neg(xw)]);
                        self.add_clause(Family::CrossWarpSpill, vec![Lit::neg(su), Lit::pos(sv), Lit::pos(xw)]);
                    }
                    None => self.add_clause(Family::CrossWarpSpill, vec![Lit::neg(su), Lit::pos(xw)]),
                }
            }
            let (d, sc) = (e.d as i64, sc as i64);
            let in_range = e.delta < shape.copies;
            let (src_copies, shift) = if in_range { (shape.copies - e.delta, 0) } else { (1, e.delta as i64 * shape.ii as i64) };
            for i in 0..src_copies {
                let j = if in_range { i + e.delta } else { 0 };
                let srcs: Vec<(u32, Var)> = self.slots(e.src, i).collect();
                for (t, x) in srcs {
                    let lo = t as i64 + d;
                    let window: Vec<(i64, Var)> = self
                        .slots(e.dst, j)
                        .filter(|&(t2, _)| (lo..lo + sc).contains(&(t2 as i64 + shift)))
                        .map(|(_, y)| (1, y))
                        .collect();
                    if !window.is_empty() {
                        let mut terms = window;
                        terms.push((1, x));
                        terms.push((1, xw));
                        self.add_linear(Family::CrossWarpSpill, terms, Cmp::Le, 2);
                    }
                    // The receiving warp waits for the transfer.
                    let receive = lo + sc - 1;
                    if in_range && receive < horizon as i64 {
                        for (r, sv) in dst_opts.clone() {
                            for &w in &r.slots {
                                let b = self.blocked(e.dst, w, receive as u32);
                                self.add_clause(
                                    Family::Concurrency,
                                    vec![Lit::neg(x), Lit::neg(xw), Lit::neg(sv), Lit::pos(b)],
                                );
                            }
                        }
                    }
                }
            }
        }

        // Blocking consumers stall their warps when they issue.
        for v in 0..g.nodes.len() {
            if !g.in_edges(v).any(|e| e.blocking) {
                continue;
            }
            for i in 0..shape.copies {
                let slots: Vec<(u32, Var)> = self.slots(v, i).collect();
                for (t, x) in slots {
                    for (r, s) in self.sys.opw[v].clone() {
                        for &w in &r.slots {
                            let b = self.blocked(v, w, t);
                            self.add_clause(Family::Concurrency, vec![Lit::neg(x), Lit::neg(s), Lit::pos(b)]);
                        }
                    }
                }
            }
        }
        let blocked: Vec<((usize, u32, u32), Var)> = self.blocked.iter().map(|(k, v)| (*k, *v)).collect();
        for ((v, w, t), b) in blocked {
            for o in 0..g.nodes.len() {
                if o == v || g.nodes[o].cycles() == 0 || !self.sys.opw[o].iter().any(|(r, _)| r.contains(w)) {
                    continue;
                }
                let busy = self.busy(o, w, t);
                self.add_clause(Family::Concurrency, vec![Lit::neg(b), Lit::neg(busy)]);
            }
        }
    }
}

/// Every constraint family over the straight-line program of shape `shape`.
pub fn emit_joint(g: &DepGraph, m: &MachineDesc, shape: Shape) -> JointSystem {
    let mut e = Emitter::declare(g, m, shape);
    e.modsched();
    e.memory();
    e.warps();
    e.sys
}
