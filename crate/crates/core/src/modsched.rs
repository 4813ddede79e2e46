//! Modulo scheduling: lower bounds on the initiation interval, the
//! time-indexed ILP, an exhaustive oracle and the modular RRT.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ir::{DepGraph, MachineDesc};
use crate::solver::{self, Backend, Cmp, InternalSolver, Objective, Phase, Sort, SolverError, SolverRequest, Var};

/// Issue cycles `start[v]` (indexed like `DepGraph::nodes`), repeated every
/// `ii` cycles; `length` is the span of one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuloSchedule {
    pub ii: u32,
    pub length: u32,
    pub start: Vec<u32>,
}

impl ModuloSchedule {
    /// Builds a schedule and computes its length.
    pub fn new(g: &DepGraph, ii: u32, start: Vec<u32>) -> Self {
        let length = schedule_length(g, &start);
        ModuloSchedule { ii, length, start }
    }

    pub fn copies(&self) -> u32 {
        self.length.div_ceil(self.ii)
    }

    pub fn to_json(&self, g: &DepGraph) -> Value {
        let mut m = Map::new();
        for (v, t) in self.start.iter().enumerate() {
            m.insert(g.nodes[v].id.clone(), json!(t));
        }
        json!({ "I": self.ii, "L": self.length, "M": m })
    }
}

/// `max(M(v) + span(v))`.
pub fn schedule_length(g: &DepGraph, start: &[u32]) -> u32 {
    g.nodes
        .iter()
        .zip(start)
        .map(|(n, &t)| t + n.span())
        .max()
        .unwrap_or(1)
}

/// Steady-state unit usage, `rows[unit][residue]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularRrt {
    pub rows: Vec<Vec<u32>>,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("length bound {l_max} is shorter than the critical path ({critical_path} cycles)")]
    LmaxTooSmall { l_max: u32, critical_path: u32 },
    #[error("the graph has a cycle with zero total iteration delay")]
    ZeroDeltaCycle,
    #[error("instance too large for exhaustive search ({nodes} nodes, length bound {l_max})")]
    TooLarge { nodes: usize, l_max: u32 },
    #[error("initiation interval must be at least 1")]
    ZeroInterval,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub fn res_mii(g: &DepGraph, m: &MachineDesc) -> u32 {
    m.units
        .iter()
        .enumerate()
        .map(|(f, unit)| {
            let usage: u64 = g.nodes.iter().map(|n| n.rrt.total_usage(f)).sum();
            usage.div_ceil(unit.capacity.max(1) as u64) as u32
        })
        .max()
        .unwrap_or(0)
        .max(1)
}

/// Recurrence bound: exact cycle enumeration up to 12 nodes, otherwise a
/// search on the smallest interval without a positive cycle.
pub fn rec_mii(g: &DepGraph) -> u32 {
    if g.nodes.len() <= 12 {
        rec_mii_by_cycles(g)
    } else {
        rec_mii_by_bisection(g)
    }
}

/// Maximum of `ceil(sum d / sum delta)` over elementary cycles. Cycles with a
/// zero delta total are skipped.
pub fn rec_mii_by_cycles(g: &DepGraph) -> u32 {
    let n = g.nodes.len();
    let mut best = 1u32;
    // Elementary cycles whose smallest node is `s`, walked edge by edge.
    fn walk(g: &DepGraph, s: usize, v: usize, d: u64, delta: u64, on_path: &mut Vec<bool>, best: &mut u32) {
        for e in g.edges.iter().filter(|e| e.src == v && e.dst >= s) {
            let (d2, delta2) = (d + e.d as u64, delta + e.delta as u64);
            if e.dst == s {
                if delta2 > 0 {
                    *best = (*best).max(d2.div_ceil(delta2) as u32);
                }
            } else if !on_path[e.dst] {
                on_path[e.dst] = true;
                walk(g, s, e.dst, d2, delta2, on_path, best);
                on_path[e.dst] = false;
            }
        }
    }
    let mut on_path = vec![false; n];
    for s in 0..n {
        on_path[s] = true;
        walk(g, s, s, 0, 0, &mut on_path, &mut best);
        on_path[s] = false;
    }
    best
}

/// Whether the constraints `t(v) >= t(u) + d - delta*ii` admit a solution,
/// i.e. the graph weighted by `d - delta*ii` has no positive cycle.
pub fn recurrence_feasible(g: &DepGraph, ii: u32) -> bool {
    let n = g.nodes.len();
    let mut dist = vec![0i64; n];
    for _ in 0..=n {
        let mut changed = false;
        for e in &g.edges {
            let w = e.d as i64 - e.delta as i64 * ii as i64;
            if dist[e.src] + w > dist[e.dst] {
                dist[e.dst] = dist[e.src] + w;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    false
}

pub fn rec_mii_by_bisection(g: &DepGraph) -> u32 {
    let mut hi = g.edges.iter().map(|e| e.d).sum::<u32>().max(1);
    if !recurrence_feasible(g, hi) {
        return hi;
    }
    let mut lo = 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if recurrence_feasible(g, mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Longest zero-delta path to each node plus its own duration.
pub fn critical_path(g: &DepGraph) -> Option<u32> {
    let earliest = g.zero_delta_earliest()?;
    Some(g.nodes.iter().zip(&earliest).map(|(n, &e)| e + n.span()).max().unwrap_or(1))
}

/// A length bound within which a schedule exists at `ii` whenever one exists
/// at all: every operation and every delay laid end to end, plus slack for
/// loop-carried edges.
pub fn default_lmax(g: &DepGraph, ii: u32) -> u32 {
    let delays: u32 = g.edges.iter().map(|e| e.d).sum();
    let spans: u32 = g.nodes.iter().map(|n| n.span()).sum();
    spans + delays + ii * (1 + g.max_delta())
}

/// Residue usage of a concrete schedule.
pub fn modular_rrt(s: &ModuloSchedule, g: &DepGraph, m: &MachineDesc) -> ModularRrt {
    let mut rows = vec![vec![0u32; s.ii as usize]; m.units.len()];
    for (v, node) in g.nodes.iter().enumerate() {
        for (f, row) in rows.iter_mut().enumerate() {
            for c in 0..node.cycles() {
                row[((s.start[v] + c) % s.ii) as usize] += node.rrt.get(f, c);
            }
        }
    }
    ModularRrt { rows }
}

/// Sort key of the tie-break: shorter first, then later starts in
/// declaration order.
fn preference_key(s: &ModuloSchedule) -> (u32, Vec<std::cmp::Reverse<u32>>) {
    (s.length, s.start.iter().map(|&t| std::cmp::Reverse(t)).collect())
}

fn check_preconditions(g: &DepGraph, i: u32, l_max: u32) -> Result<(), ScheduleError> {
    if i == 0 {
        return Err(ScheduleError::ZeroInterval);
    }
    let cp = critical_path(g).ok_or(ScheduleError::ZeroDeltaCycle)?;
    if l_max < cp {
        return Err(ScheduleError::LmaxTooSmall { l_max, critical_path: cp });
    }
    Ok(())
}

/// Variables of the time-indexed formulation, kept so callers can decode.
pub struct ScheduleModel {
    pub request: SolverRequest,
    pub length: Var,
    pub start: Vec<Var>,
    pub slots: Vec<Vec<Var>>,
}

/// Time-indexed ILP: `a[v][t]` picks the start of `v`, `sigma(v)` mirrors it
/// as an integer, `L` bounds every finish time. Minimizes `L`, then
/// maximizes each `sigma(v)` in declaration order.
pub fn schedule_ilp(g: &DepGraph, m: &MachineDesc, i: u32, l_max: u32) -> ScheduleModel {
    let mut r = SolverRequest::new();
    let length = r.declare("L", Sort::Int { lo: 1, hi: l_max as i64 }, Phase::Low);
    let mut slots = Vec::new();
    let mut start = Vec::new();
    for node in &g.nodes {
        let last = l_max - node.span();
        let vars: Vec<Var> = (0..=last)
            .map(|t| r.declare(format!("a_{}_{t}", node.id), Sort::Bool, Phase::High))
            .collect();
        slots.push(vars);
    }
    for (v, node) in g.nodes.iter().enumerate() {
        let sigma = r.int_var(format!("sigma_{}", node.id), 0, slots[v].len() as i64 - 1);
        start.push(sigma);
        r.linear(slots[v].iter().map(|&a| (1, a)).collect(), Cmp::Eq, 1);
        let mut link: Vec<(i64, Var)> = slots[v].iter().enumerate().skip(1).map(|(t, &a)| (t as i64, a)).collect();
        link.push((-1, sigma));
        r.linear(link, Cmp::Eq, 0);
        r.linear(vec![(1, length), (-1, sigma)], Cmp::Ge, node.span() as i64);
    }
    for e in &g.edges {
        let rhs = e.d as i64 - e.delta as i64 * i as i64;
        if e.src == e.dst {
            if rhs > 0 {
                r.clause(Vec::new());
            }
            continue;
        }
        r.linear(vec![(1, start[e.dst]), (-1, start[e.src])], Cmp::Ge, rhs);
    }
    for (f, unit) in m.units.iter().enumerate() {
        for res in 0..i {
            let mut terms: Vec<(i64, Var)> = Vec::new();
            for (v, node) in g.nodes.iter().enumerate() {
                for (t, &a) in slots[v].iter().enumerate() {
                    let w: u32 = (0..node.cycles())
                        .filter(|c| (t as u32 + c) % i == res)
                        .map(|c| node.rrt.get(f, c))
                        .sum();
                    if w > 0 {
                        terms.push((w as i64, a));
                    }
                }
            }
            let total: i64 = terms.iter().map(|t| t.0).sum();
            if total > unit.capacity as i64 {
                r.linear(terms, Cmp::Le, unit.capacity as i64);
            }
        }
    }
    r.objective = Some(Objective::minimize(length));
    r.tie_break = start.iter().map(|&s| Objective::maximize(s)).collect();
    ScheduleModel { request: r, length, start, slots }
}

/// Optimal schedule at interval `i` with length at most `l_max`, using the
/// internal solver. `Ok(None)` means infeasible at this interval.
pub fn modulo_schedule(g: &DepGraph, m: &MachineDesc, i: u32, l_max: u32) -> Result<Option<ModuloSchedule>, ScheduleError> {
    modulo_schedule_with(&InternalSolver::default(), g, m, i, l_max)
}

pub fn modulo_schedule_with<B: Backend>(
    backend: &B,
    g: &DepGraph,
    m: &MachineDesc,
    i: u32,
    l_max: u32,
) -> Result<Option<ModuloSchedule>, ScheduleError> {
    check_preconditions(g, i, l_max)?;
    if i < res_mii(g, m).max(rec_mii(g)) {
        return Ok(None);
    }
    let model = schedule_ilp(g, m, i, l_max);
    let resp = solver::solve(backend, &model.request)?;
    let Some(values) = resp.model.filter(|_| resp.status == solver::Status::Sat) else {
        return match resp.status {
            solver::Status::Unsat => Ok(None),
            s => Err(SolverError::Backend(s.to_string()).into()),
        };
    };
    let start = model.start.iter().map(|&s| values.value(s) as u32).collect();
    Ok(Some(ModuloSchedule::new(g, i, start)))
}

/// Smallest feasible interval starting from the lower bounds, with the default
/// length bound at each candidate. Returns `None` past `max_ii`.
pub fn minimal_schedule(g: &DepGraph, m: &MachineDesc, max_ii: u32) -> Result<Option<ModuloSchedule>, ScheduleError> {
    let lower = res_mii(g, m).max(rec_mii(g));
    for i in lower..=max_ii {
        if let Some(s) = modulo_schedule(g, m, i, default_lmax(g, i))? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Exhaustive oracle with the same contract and tie-break as
/// [`modulo_schedule`]. Limited to 5 nodes and `l_max <= 8`.
pub fn brute_force_modulo_schedule(
    g: &DepGraph,
    m: &MachineDesc,
    i: u32,
    l_max: u32,
) -> Result<Option<ModuloSchedule>, ScheduleError> {
    if g.nodes.len() > 5 || l_max > 8 {
        return Err(ScheduleError::TooLarge { nodes: g.nodes.len(), l_max });
    }
    check_preconditions(g, i, l_max)?;
    let n = g.nodes.len();
    let mut best: Option<ModuloSchedule> = None;
    let mut start = vec![0u32; n];
    loop {
        let s = ModuloSchedule::new(g, i, start.clone());
        if s.length <= l_max && crate::sim::validate_schedule(&s, g, m).is_empty()
            && best.as_ref().is_none_or(|b| preference_key(&s) < preference_key(b)) {
                best = Some(s);
            }
        // Odometer over [0, l_max).
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            start[k] += 1;
            if start[k] < l_max {
                break;
            }
            start[k] = 0;
            k += 1;
        }
    }
}

/// Serializes a modular RRT as `{unit: [usage per residue]}`.
pub fn modular_rrt_json(r: &ModularRrt, m: &MachineDesc) -> Value {
    let mut map = Map::new();
    for (f, unit) in m.units.iter().enumerate() {
        map.insert(unit.name.clone(), json!(r.rows[f]));
    }
    Value::Object(map)
}
