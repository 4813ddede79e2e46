//! Independent re-checking of schedules and joint solutions, and discrete
//! simulation of in-order and pipelined execution.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::codegen::{PipelinedProgram, Region};
use crate::ir::{DepGraph, MachineDesc, WarpRange};
use crate::joint::{propagate_liveness, JointSolution};
use crate::modsched::{schedule_length, ModuloSchedule};

/// Constraint family a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Shape,
    Uniqueness,
    Consistency,
    Completion,
    Dependence,
    Capacity,
    MemoryCapacity,
    Liveness,
    WarpUniqueness,
    VariableLatency,
    RegisterLimit,
    CrossWarpSpill,
    Concurrency,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Shape => "shape",
            Family::Uniqueness => "uniqueness",
            Family::Consistency => "consistency",
            Family::Completion => "completion",
            Family::Dependence => "dependence",
            Family::Capacity => "capacity",
            Family::MemoryCapacity => "memory capacity",
            Family::Liveness => "liveness",
            Family::WarpUniqueness => "warp uniqueness",
            Family::VariableLatency => "variable latency",
            Family::RegisterLimit => "register limit",
            Family::CrossWarpSpill => "cross-warp spill",
            Family::Concurrency => "concurrency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub family: Family,
    pub message: String,
}

impl Violation {
    fn new(family: Family, message: impl Into<String>) -> Self {
        Violation { family, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.family, self.message)
    }
}

/// Checks a modulo schedule: start count and length, dependences under the
/// interval, and modular unit capacity.
pub fn validate_schedule(s: &ModuloSchedule, g: &DepGraph, m: &MachineDesc) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.ii == 0 {
        return vec![Violation::new(Family::Shape, "initiation interval is zero")];
    }
    if s.start.len() != g.nodes.len() {
        return vec![Violation::new(
            Family::Shape,
            format!("{} start cycles for {} nodes", s.start.len(), g.nodes.len()),
        )];
    }
    if !g.nodes.is_empty() {
        if s.length != schedule_length(g, &s.start) {
            out.push(Violation::new(
                Family::Shape,
                format!("length {} but operations finish at {}", s.length, schedule_length(g, &s.start)),
            ));
        }
        if s.start.iter().min() != Some(&0) {
            out.push(Violation::new(Family::Shape, "no operation starts at cycle 0"));
        }
    }
    for e in &g.edges {
        let lhs = s.start[e.dst] as i64 + e.delta as i64 * s.ii as i64;
        let rhs = s.start[e.src] as i64 + e.d as i64;
        if lhs < rhs {
            out.push(Violation::new(
                Family::Dependence,
                format!(
                    "{} -> {}: M({}) + {}*{} = {lhs} < M({}) + {} = {rhs}",
                    g.nodes[e.src].id, g.nodes[e.dst].id, g.nodes[e.dst].id, e.delta, s.ii, g.nodes[e.src].id, e.d
                ),
            ));
        }
    }
    for (f, unit) in m.units.iter().enumerate() {
        let mut usage = vec![0u32; s.ii as usize];
        let mut users: Vec<Vec<(usize, u32)>> = vec![Vec::new(); s.ii as usize];
        for (v, node) in g.nodes.iter().enumerate() {
            for c in 0..node.cycles() {
                let x = node.rrt.get(f, c);
                if x > 0 {
                    let r = ((s.start[v] + c) % s.ii) as usize;
                    usage[r] += x;
                    users[r].push((v, s.start[v] + c));
                }
            }
        }
        for r in 0..s.ii as usize {
            if usage[r] > unit.capacity {
                let who: Vec<String> =
                    users[r].iter().map(|(v, t)| format!("{}@{t}", g.nodes[*v].id)).collect();
                let cycles: Vec<String> = users[r].iter().map(|(_, t)| t.to_string()).collect();
                out.push(Violation::new(
                    Family::Capacity,
                    format!(
                        "{} oversubscribed at residue {r} ({} ≡ {r} mod {}): {} uses {} > {}",
                        unit.name,
                        cycles.join(" ≡ "),
                        s.ii,
                        who.join(", "),
                        usage[r],
                        unit.capacity
                    ),
                ));
            }
        }
    }
    out
}

fn true_cycles(row: &[bool]) -> impl Iterator<Item = u32> + '_ {
    row.iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| t as u32)
}

/// Re-checks every constraint family directly on the tables of `sol`.
pub fn validate_program(sol: &JointSolution, g: &DepGraph, m: &MachineDesc) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.nodes.len();
    let shape = sol.shape;
    let (copies, horizon, ii) = (shape.copies as usize, shape.horizon as usize, shape.ii);
    let slots = m.total_warps() as usize;
    if shape.ii == 0 || shape.copies != shape.length.div_ceil(shape.ii).max(1) {
        return vec![Violation::new(Family::Shape, "interval, length and copy count disagree")];
    }
    let dims_ok = sol.start.len() == n
        && sol.ranges.len() == n
        && sol.op.len() == n
        && sol.live.len() == n
        && sol.opw.len() == n
        && sol.op.iter().all(|c| c.len() == copies && c.iter().all(|r| r.len() == horizon))
        && sol.live.iter().all(|c| c.len() == copies && c.iter().all(|r| r.len() == horizon + 1))
        && sol.opw.iter().all(|r| r.len() == slots);
    if !dims_ok {
        return vec![Violation::new(Family::Shape, "table dimensions do not match the program")];
    }
    let id = |v: usize| g.nodes[v].id.as_str();

    // Placements, when unique.
    let mut place: Vec<Vec<Option<u32>>> = vec![vec![None; copies]; n];
    for v in 0..n {
        for i in 0..copies {
            let ts: Vec<u32> = true_cycles(&sol.op[v][i]).collect();
            if ts.len() == 1 {
                place[v][i] = Some(ts[0]);
            } else {
                out.push(Violation::new(
                    Family::Uniqueness,
                    format!("{} copy {i} issues {} times ({ts:?})", id(v), ts.len()),
                ));
            }
            for &t in &ts {
                if t + g.nodes[v].span() > shape.horizon {
                    out.push(Violation::new(
                        Family::Completion,
                        format!("{} copy {i} at {t} runs past T = {}", id(v), shape.horizon),
                    ));
                }
            }
        }
        if let Some(t0) = place[v][0] {
            if sol.start[v] != t0 {
                out.push(Violation::new(
                    Family::Consistency,
                    format!("M*({}) = {} but copy 0 issues at {t0}", id(v), sol.start[v]),
                ));
            }
            for i in 1..copies {
                if let Some(t) = place[v][i] {
                    if t != t0 + i as u32 * ii {
                        out.push(Violation::new(
                            Family::Consistency,
                            format!("{} copy {i} at {t}, expected {}", id(v), t0 + i as u32 * ii),
                        ));
                    }
                }
            }
        }
    }

    // Dependences, including edges whose consumer copy lies past the program.
    for e in &g.edges {
        let delta = e.delta as usize;
        let pairs: Vec<(usize, usize, i64)> = if delta < copies {
            (0..copies - delta).map(|i| (i, i + delta, 0)).collect()
        } else {
            vec![(0, 0, e.delta as i64 * ii as i64)]
        };
        for (i, j, shift) in pairs {
            if let (Some(tu), Some(tv)) = (place[e.src][i], place[e.dst][j]) {
                if (tv as i64 + shift) < tu as i64 + e.d as i64 {
                    out.push(Violation::new(
                        Family::Dependence,
                        format!("{}#{i}@{tu} -> {}#{j}@{tv} (delta {}) needs a gap of {}", id(e.src), id(e.dst), e.delta, e.d),
                    ));
                }
            }
        }
    }

    // Unit capacity over every issued entry.
    for (f, unit) in m.units.iter().enumerate() {
        for t in 0..horizon as u32 {
            let mut used = 0u32;
            for (v, node) in g.nodes.iter().enumerate() {
                for i in 0..copies {
                    for s in true_cycles(&sol.op[v][i]) {
                        if s <= t && t < s + node.cycles() {
                            used += node.rrt.get(f, t - s);
                        }
                    }
                }
            }
            if used > unit.capacity {
                out.push(Violation::new(
                    Family::Capacity,
                    format!("{} uses {used} > {} at cycle {t}", unit.name, unit.capacity),
                ));
            }
        }
    }

    // Liveness must be the fixed point of the propagation rules.
    let expected = propagate_liveness(g, shape, &sol.op);
    for v in 0..n {
        for i in 0..copies {
            for t in 0..=horizon {
                if sol.live[v][i][t] != expected[v][i][t] {
                    out.push(Violation::new(
                        Family::Liveness,
                        format!("live[{}, {i}, {t}] is {} but propagation gives {}", id(v), sol.live[v][i][t], expected[v][i][t]),
                    ));
                }
            }
        }
    }
    for (mi, mem) in m.memories.iter().enumerate() {
        for t in 0..=horizon {
            let used: u64 = (0..n)
                .map(|v| {
                    let k = (0..copies).filter(|&i| sol.live[v][i][t]).count() as u64;
                    k * g.nodes[v].footprint_in(mi)
                })
                .sum();
            if used > mem.capacity {
                out.push(Violation::new(
                    Family::MemoryCapacity,
                    format!("{} holds {used} > {} at cycle {t}", mem.name, mem.capacity),
                ));
            }
        }
    }

    // Warp assignment.
    for (v, node) in g.nodes.iter().enumerate() {
        let set: Vec<u32> = (0..slots as u32).filter(|&w| sol.opw[v][w as usize]).collect();
        let on_vl = sol.opw[v][m.vl_warp as usize];
        if node.variable_latency != on_vl {
            out.push(Violation::new(
                Family::VariableLatency,
                if node.variable_latency {
                    format!("{} is variable-latency but not on warp {}", id(v), m.vl_warp)
                } else {
                    format!("{} is on the variable-latency warp {}", id(v), m.vl_warp)
                },
            ));
        }
        let mut shapes = m.aligned_ranges(node.warps_required);
        if node.warps_required == 1 {
            shapes.push(WarpRange::single(m.vl_warp));
        }
        if !shapes.iter().any(|r| r.slots == set) {
            out.push(Violation::new(
                Family::WarpUniqueness,
                format!("{} is assigned warps {set:?}, not one aligned range of {}", id(v), node.warps_required),
            ));
        } else if sol.ranges[v].slots != set {
            out.push(Violation::new(
                Family::WarpUniqueness,
                format!("A*({}) = {} disagrees with its warp table {set:?}", id(v), sol.ranges[v]),
            ));
        }
    }
    for w in 0..slots {
        for t in 0..=horizon {
            let used: u64 = (0..n)
                .filter(|&v| sol.opw[v][w])
                .map(|v| (0..copies).filter(|&i| sol.live[v][i][t]).count() as u64 * g.nodes[v].regs)
                .fold(0, u64::saturating_add);
            if used > m.reg_limit {
                out.push(Violation::new(
                    Family::RegisterLimit,
                    format!("warp {w} holds {used} > {} registers at cycle {t}", m.reg_limit),
                ));
            }
        }
    }

    // Which warps are busy starting an operation other than `v` within its
    // duration before `t`.
    let busy_other = |v: usize, w: usize, t: i64| -> Option<String> {
        for (o, node) in g.nodes.iter().enumerate() {
            if o == v || !sol.opw[o][w] || node.cycles() == 0 {
                continue;
            }
            for i in 0..copies {
                for s in true_cycles(&sol.op[o][i]) {
                    let s = s as i64;
                    if s <= t && t < s + node.cycles() as i64 {
                        return Some(format!("{}#{i}@{s}", node.id));
                    }
                }
            }
        }
        None
    };

    // Cross-warp transfers.
    for e in &g.edges {
        let sc = g.nodes[e.src].spill_cost;
        if sc == 0 || e.src == e.dst || sol.opw[e.src] == sol.opw[e.dst] {
            continue;
        }
        let delta = e.delta as usize;
        let in_range = delta < copies;
        let pairs: Vec<(usize, usize, i64)> = if in_range {
            (0..copies - delta).map(|i| (i, i + delta, 0)).collect()
        } else {
            vec![(0, 0, e.delta as i64 * ii as i64)]
        };
        for (i, j, shift) in pairs {
            let (Some(tu), Some(tv)) = (place[e.src][i], place[e.dst][j]) else { continue };
            let lo = tu as i64 + e.d as i64;
            if (lo..lo + sc as i64).contains(&(tv as i64 + shift)) {
                out.push(Violation::new(
                    Family::CrossWarpSpill,
                    format!("{}#{j}@{tv} reads {}#{i}@{tu} across warps before the {sc}-cycle transfer", id(e.dst), id(e.src)),
                ));
            }
            let receive = lo + sc as i64 - 1;
            if in_range && receive < horizon as i64 {
                for w in (0..slots).filter(|&w| sol.opw[e.dst][w]) {
                    if let Some(who) = busy_other(e.dst, w, receive) {
                        out.push(Violation::new(
                            Family::Concurrency,
                            format!("warp {w} waits at {receive} for {} but {who} issues there", id(e.dst)),
                        ));
                    }
                }
            }
        }
    }

    // Blocking consumers.
    for v in 0..n {
        if !g.in_edges(v).any(|e| e.blocking) {
            continue;
        }
        for i in 0..copies {
            for t in true_cycles(&sol.op[v][i]) {
                for w in (0..slots).filter(|&w| sol.opw[v][w]) {
                    if let Some(who) = busy_other(v, w, t as i64) {
                        out.push(Violation::new(
                            Family::Concurrency,
                            format!("{}#{i} blocks warp {w} at {t} while {who} issues", id(v)),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Iterations per cycle as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Throughput {
    pub num: u64,
    pub den: u64,
}

impl Throughput {
    pub fn new(num: u64, den: u64) -> Self {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        let g = gcd(num, den).max(1);
        Throughput { num: num / g, den: den / g }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Throughput {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some((self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128)))
    }
}

impl fmt::Display for Throughput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpActivity {
    Idle,
    Issue,
    /// An operation issued earlier still occupies the warp.
    Busy,
    /// Waiting on a dependence before its next instruction.
    Stall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub node: usize,
    pub iteration: u32,
    pub warps: WarpRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleRecord {
    pub issued: Vec<Issue>,
    /// Occupancy per functional unit.
    pub units: Vec<u32>,
    pub warps: Vec<WarpActivity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub cycles: Vec<CycleRecord>,
    pub iterations: u32,
    pub elapsed: u32,
    pub throughput: Throughput,
    /// Issue cycle of each `(node, iteration)`.
    pub issue: Vec<Vec<u32>>,
}

impl ExecutionTrace {
    /// One line per cycle: issued instructions, unit occupancy and warp states.
    pub fn render(&self, g: &DepGraph, m: &MachineDesc) -> String {
        let mut out = String::new();
        for (t, c) in self.cycles.iter().enumerate() {
            let issued: Vec<String> =
                c.issued.iter().map(|i| format!("{}#{}@w[{}]", g.nodes[i.node].id, i.iteration, i.warps)).collect();
            let units: Vec<String> = m.units.iter().zip(&c.units).map(|(u, k)| format!("{}={k}", u.name)).collect();
            let warps: String = c
                .warps
                .iter()
                .map(|w| match w {
                    WarpActivity::Idle => '.',
                    WarpActivity::Issue => 'I',
                    WarpActivity::Busy => 'b',
                    WarpActivity::Stall => 's',
                })
                .collect();
            out.push_str(&format!("{t:>4}  [{warps}]  {:<24} {}\n", units.join(" "), issued.join(" ")));
        }
        out
    }

    /// Cycles in which at least two warps are issuing or busy.
    pub fn concurrent_cycles(&self) -> Vec<u32> {
        (0..self.cycles.len() as u32)
            .filter(|&t| {
                self.cycles[t as usize]
                    .warps
                    .iter()
                    .filter(|w| matches!(w, WarpActivity::Issue | WarpActivity::Busy))
                    .count()
                    >= 2
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("need at least {copies} iterations to run the pipelined program, got {iterations}")]
    TooFewIterations { iterations: u32, copies: u32 },
    #[error("{node} iteration {iteration} issues {count} times")]
    IssueCount { node: String, iteration: u32, count: usize },
    #[error("replay deadlock: {consumer} iteration {iteration} issues at {at} before {producer} is ready at {ready}")]
    Deadlock { producer: String, consumer: String, iteration: u32, at: u32, ready: u32 },
    #[error("unit {unit} over capacity at cycle {cycle}")]
    Capacity { unit: String, cycle: u32 },
    #[error("warp {warp} is blocked at cycle {cycle} but {other} occupies it")]
    Blocked { warp: u32, cycle: u32, other: String },
    #[error("steady-state trip {trip} advances {advance} cycles instead of {ii}")]
    Trip { trip: u32, advance: u32, ii: u32 },
}

fn occupancy(g: &DepGraph, m: &MachineDesc, issue: &[Vec<u32>], horizon: u32) -> Vec<Vec<u32>> {
    let mut occ = vec![vec![0u32; m.units.len()]; horizon as usize];
    for (v, node) in g.nodes.iter().enumerate() {
        for &s in &issue[v] {
            for f in 0..m.units.len() {
                for k in 0..node.cycles() {
                    if let Some(row) = occ.get_mut((s + k) as usize) {
                        row[f] += node.rrt.get(f, k);
                    }
                }
            }
        }
    }
    occ
}

fn dependences_met(g: &DepGraph, issue: &[Vec<u32>]) -> Result<(), SimError> {
    for e in &g.edges {
        for it in 0..issue[e.src].len() as u32 {
            let j = it + e.delta;
            let Some(&tv) = issue[e.dst].get(j as usize) else { continue };
            let ready = issue[e.src][it as usize] + e.d;
            if tv < ready {
                return Err(SimError::Deadlock {
                    producer: g.nodes[e.src].id.clone(),
                    consumer: g.nodes[e.dst].id.clone(),
                    iteration: j,
                    at: tv,
                    ready,
                });
            }
        }
    }
    Ok(())
}

/// Single-warp in-order execution of `iterations` loop iterations: each
/// instruction, in declaration order, issues strictly after its predecessor
/// once its dependences and units allow.
pub fn simulate_inorder(g: &DepGraph, m: &MachineDesc, iterations: u32) -> ExecutionTrace {
    let n = g.nodes.len();
    let mut issue: Vec<Vec<u32>> = vec![Vec::with_capacity(iterations as usize); n];
    let mut occ: Vec<Vec<u32>> = Vec::new();
    let mut order: Vec<(u32, usize, u32)> = Vec::new();
    let mut next = 0u32;
    for it in 0..iterations {
        for (v, node) in g.nodes.iter().enumerate() {
            let mut t = next;
            for e in g.in_edges(v) {
                if let Some(src_it) = it.checked_sub(e.delta) {
                    if let Some(&ts) = issue[e.src].get(src_it as usize) {
                        t = t.max(ts + e.d);
                    }
                }
            }
            let fits = |t: u32, occ: &Vec<Vec<u32>>| {
                (0..m.units.len()).all(|f| {
                    (0..node.cycles()).all(|k| {
                        let used = occ.get((t + k) as usize).map_or(0, |r| r[f]);
                        used + node.rrt.get(f, k) <= m.units[f].capacity
                    })
                })
            };
            while !fits(t, &occ) {
                t += 1;
            }
            let end = (t + node.span()) as usize;
            if occ.len() < end {
                occ.resize(end, vec![0; m.units.len()]);
            }
            for f in 0..m.units.len() {
                for k in 0..node.cycles() {
                    occ[(t + k) as usize][f] += node.rrt.get(f, k);
                }
            }
            issue[v].push(t);
            order.push((t, v, it));
            next = t + 1;
        }
    }
    let elapsed = occ.len() as u32;
    let mut cycles: Vec<CycleRecord> = occ
        .into_iter()
        .map(|units| CycleRecord { issued: Vec::new(), units, warps: vec![WarpActivity::Idle] })
        .collect();
    let mut prev: Option<u32> = None;
    for &(t, v, it) in &order {
        let from = prev.map_or(0, |p| p + 1);
        for c in from..t {
            cycles[c as usize].warps[0] = WarpActivity::Stall;
        }
        cycles[t as usize].issued.push(Issue { node: v, iteration: it, warps: WarpRange::single(0) });
        cycles[t as usize].warps[0] = WarpActivity::Issue;
        for k in 1..g.nodes[v].span() {
            if let Some(c) = cycles.get_mut((t + k) as usize) {
                if c.warps[0] == WarpActivity::Idle {
                    c.warps[0] = WarpActivity::Busy;
                }
            }
        }
        prev = Some(t);
    }
    ExecutionTrace {
        cycles,
        iterations,
        elapsed,
        throughput: Throughput::new(iterations as u64, elapsed.max(1) as u64),
        issue,
    }
}

/// Replays a pipelined program for `iterations` iterations: the prologue
/// once, the steady state `iterations - copies + 1` times and the epilogue
/// once, re-checking dependences, unit capacity and blocking waits.
pub fn simulate_pipeline(
    p: &PipelinedProgram,
    g: &DepGraph,
    m: &MachineDesc,
    iterations: u32,
) -> Result<ExecutionTrace, SimError> {
    if iterations < p.copies {
        return Err(SimError::TooFewIterations { iterations, copies: p.copies });
    }
    let ii = p.ii;
    let trips = iterations - p.copies + 1;
    let steady_base = (p.copies - 1) * ii;
    let epilogue_base = steady_base + trips * ii;

    // (region base, iteration shift, instructions)
    let mut runs: Vec<(u32, u32, Region)> = vec![(0, 0, Region::Prologue)];
    for k in 0..trips {
        runs.push((steady_base + k * ii, k, Region::SteadyState));
    }
    runs.push((epilogue_base, iterations - p.copies, Region::Epilogue));

    let n = g.nodes.len();
    let mut seen: HashMap<(usize, u32), Vec<u32>> = HashMap::new();
    let mut issued: Vec<(u32, Issue)> = Vec::new();
    let mut last_trip_start: Option<u32> = None;
    for (k, &(base, shift, region)) in runs.iter().enumerate() {
        if region == Region::SteadyState {
            let first = p.steady_state.iter().filter(|i| !i.is_move()).map(|i| base + i.cycle).min();
            if let (Some(prev), Some(first)) = (last_trip_start, first) {
                if first - prev != ii {
                    return Err(SimError::Trip { trip: k as u32 - 1, advance: first - prev, ii });
                }
            }
            last_trip_start = first.or(last_trip_start);
        }
        for ins in p.region(region).iter().filter(|i| !i.is_move()) {
            let it = ins.copy + shift;
            let t = base + ins.cycle;
            seen.entry((ins.node, it)).or_default().push(t);
            issued.push((t, Issue { node: ins.node, iteration: it, warps: ins.warps.clone() }));
        }
    }

    let mut issue = vec![vec![0u32; iterations as usize]; n];
    for v in 0..n {
        for it in 0..iterations {
            let ts = seen.get(&(v, it)).map(Vec::as_slice).unwrap_or(&[]);
            if ts.len() != 1 {
                return Err(SimError::IssueCount { node: g.nodes[v].id.clone(), iteration: it, count: ts.len() });
            }
            issue[v][it as usize] = ts[0];
        }
    }
    if seen.len() != n * iterations as usize {
        let (&(v, it), ts) = seen.iter().find(|((_, it), _)| *it >= iterations).expect("extra issue");
        return Err(SimError::IssueCount { node: g.nodes[v].id.clone(), iteration: it, count: ts.len() });
    }
    dependences_met(g, &issue)?;

    let elapsed = issued.iter().map(|(t, i)| t + g.nodes[i.node].span()).max().unwrap_or(0);
    let occ = occupancy(g, m, &issue, elapsed);
    for (t, row) in occ.iter().enumerate() {
        for (f, &used) in row.iter().enumerate() {
            if used > m.units[f].capacity {
                return Err(SimError::Capacity { unit: m.units[f].name.clone(), cycle: t as u32 });
            }
        }
    }

    let slots = m.total_warps() as usize;
    let mut cycles: Vec<CycleRecord> = occ
        .into_iter()
        .map(|units| CycleRecord { issued: Vec::new(), units, warps: vec![WarpActivity::Idle; slots] })
        .collect();
    issued.sort_by_key(|(t, i)| (*t, i.node, i.iteration));
    for (t, ins) in &issued {
        let span = g.nodes[ins.node].cycles();
        for &w in &ins.warps.slots {
            for k in 1..span {
                let c = &mut cycles[(t + k) as usize].warps[w as usize];
                if *c == WarpActivity::Idle {
                    *c = WarpActivity::Busy;
                }
            }
            cycles[*t as usize].warps[w as usize] = WarpActivity::Issue;
        }
        cycles[*t as usize].issued.push(ins.clone());
    }

    // A blocking consumer stalls its warps at its issue cycle: nothing else
    // may be in flight there.
    for (t, ins) in &issued {
        if !g.in_edges(ins.node).any(|e| e.blocking) {
            continue;
        }
        for (t2, other) in &issued {
            let c = g.nodes[other.node].cycles();
            if other.node == ins.node || c == 0 || !other.warps.overlaps(&ins.warps) {
                continue;
            }
            if *t2 <= *t && *t < t2 + c {
                return Err(SimError::Blocked {
                    warp: *ins.warps.slots.iter().find(|w| other.warps.contains(**w)).unwrap(),
                    cycle: *t,
                    other: format!("{}#{}", g.nodes[other.node].id, other.iteration),
                });
            }
        }
    }

    Ok(ExecutionTrace { cycles, iterations, elapsed, throughput: Throughput::new(1, ii as u64), issue })
}

#[cfg(test)]
mod sim_tests {
    use super::*;
    use crate::codegen::synthesize;
    use crate::ir::parse_problem;
    use crate::straightline::Shape;

    #[test]
    fn gemm_exp_gemm_inorder_one_third() {
        let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        let tr = simulate_inorder(&g, &m, 4);
        assert_eq!(tr.elapsed, 12);
        assert_eq!(tr.throughput, Throughput::new(1, 3));
        assert_eq!(tr.issue[0], vec![0, 3, 6, 9]);
    }

    #[test]
    fn gemm_exp_gemm_pipeline_one_half() {
        let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        let sol = JointSolution::from_assignment(
            &g,
            &m,
            Shape::new(2, 4),
            vec![0, 2, 3],
            vec![WarpRange::single(0); 3],
            Default::default(),
        );
        let p = synthesize(&sol, &g);
        let tr = simulate_pipeline(&p, &g, &m, 5).unwrap();
        assert_eq!(tr.throughput, Throughput::new(1, 2));
        assert_eq!(tr.issue[0], vec![0, 2, 4, 6, 8]);
        assert_eq!(tr.issue[2], vec![3, 5, 7, 9, 11]);
        assert_eq!(tr.elapsed, 12);
        assert!(simulate_pipeline(&p, &g, &m, 1).is_err());
    }

    #[test]
    fn single_node_inorder() {
        let (g, m) = parse_problem(
            r#"{"machine":{"units":[{"name":"U","capacity":1}],"num_warps":1,"reg_limit":0},
               "graph":{"nodes":[{"id":"A","rrt":{"U":[1]}}],"edges":[]}}"#,
        )
        .unwrap();
        assert_eq!(simulate_inorder(&g, &m, 7).throughput, Throughput::new(1, 1));
    }

    #[test]
    fn independent_nodes_issue_one_per_cycle() {
        let (g, m) = parse_problem(
            r#"{"machine":{"units":[{"name":"U","capacity":1},{"name":"W","capacity":1}],"num_warps":1,"reg_limit":0},
               "graph":{"nodes":[{"id":"A","rrt":{"U":[1]}},{"id":"B","rrt":{"W":[1]}}],"edges":[]}}"#,
        )
        .unwrap();
        let tr = simulate_inorder(&g, &m, 3);
        assert_eq!(tr.issue, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        assert_eq!(tr.throughput, Throughput::new(1, 2));
    }
}
