//! Shrinking cycle counts to small integers while keeping their ratios.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ir::{DepGraph, Rrt};
use crate::solver::{self, Backend, Cmp, InternalSolver, Objective, Phase, Sort, SolverError, SolverRequest};

/// Where a collected duration came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostSource {
    NodeCycles(usize),
    EdgeDelay(usize),
    SpillCost(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVector {
    pub values: Vec<u64>,
    /// `U`, set once normalized.
    pub resolution_bound: Option<u64>,
    /// `F`, set once normalized.
    pub distortion: Option<u64>,
    /// For each entry, every place in the graph carrying that duration.
    pub sources: Vec<Vec<CostSource>>,
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("resolution bound {bound} is below the number of distinct costs ({count})")]
    ResolutionTooSmall { bound: u64, count: usize },
    #[error("a cost of zero cannot be normalized")]
    ZeroCost,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Default resolution bound for `normalize`.
pub const DEFAULT_RESOLUTION: u64 = 300;

/// Distinct positive durations in `g`: node cycles, then edge delays, then
/// spill costs, each in declaration order.
pub fn collect_costs(g: &DepGraph) -> CostVector {
    let mut values: Vec<u64> = Vec::new();
    let mut sources: Vec<Vec<CostSource>> = Vec::new();
    let mut push = |value: u64, source: CostSource| {
        if value == 0 {
            return;
        }
        match values.iter().position(|&v| v == value) {
            Some(i) => sources[i].push(source),
            None => {
                values.push(value);
                sources.push(vec![source]);
            }
        }
    };
    for (i, n) in g.nodes.iter().enumerate() {
        push(n.cycles() as u64, CostSource::NodeCycles(i));
    }
    for (i, e) in g.edges.iter().enumerate() {
        push(e.d as u64, CostSource::EdgeDelay(i));
    }
    for (i, n) in g.nodes.iter().enumerate() {
        push(n.spill_cost as u64, CostSource::SpillCost(i));
    }
    CostVector { values, resolution_bound: None, distortion: None, sources }
}

/// Largest pairwise cross-product gap `max |C[i]C'[j] - C[j]C'[i]|`.
pub fn distortion(original: &[u64], normalized: &[u64]) -> u64 {
    let mut worst = 0;
    for i in 0..original.len() {
        for j in i + 1..original.len() {
            let a = original[i] as i128 * normalized[j] as i128;
            let b = original[j] as i128 * normalized[i] as i128;
            worst = worst.max((a - b).unsigned_abs() as u64);
        }
    }
    worst
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Normalizes with the internal solver.
pub fn normalize_costs(c: &CostVector, u: u64) -> Result<CostVector, CostError> {
    normalize_costs_with(&InternalSolver::default(), c, u)
}

/// Minimizes `F`, then the sum of `C'`, then `C'` lexicographically, subject
/// to `|C[i]C'[j] - C[j]C'[i]| <= F` and `1 <= sum C' <= u`.
pub fn normalize_costs_with<B: Backend>(backend: &B, c: &CostVector, u: u64) -> Result<CostVector, CostError> {
    let n = c.values.len();
    if c.values.contains(&0) {
        return Err(CostError::ZeroCost);
    }
    if (u as usize) < n || u == 0 {
        return Err(CostError::ResolutionTooSmall { bound: u, count: n });
    }
    let done = |values: Vec<u64>, f: u64| CostVector {
        values,
        resolution_bound: Some(u),
        distortion: Some(f),
        sources: c.sources.clone(),
    };
    if n == 0 {
        return Ok(done(Vec::new(), 0));
    }
    // Exact ratios at the smallest possible sum.
    let g = c.values.iter().copied().fold(0, gcd);
    let reduced: Vec<u64> = c.values.iter().map(|v| v / g).collect();
    if reduced.iter().sum::<u64>() <= u {
        return Ok(done(reduced, 0));
    }

    let mut r = SolverRequest::new();
    let cs: Vec<_> = (0..n).map(|i| r.int_var(format!("c{i}"), 1, u as i64)).collect();
    let max_c = *c.values.iter().max().unwrap() as i64;
    let f = r.declare("F", Sort::Int { lo: 0, hi: max_c * u as i64 }, Phase::Low);
    let s = r.int_var("S", n as i64, u as i64);
    for i in 0..n {
        for j in i + 1..n {
            let (ci, cj) = (c.values[i] as i64, c.values[j] as i64);
            r.linear(vec![(ci, cs[j]), (-cj, cs[i]), (-1, f)], Cmp::Le, 0);
            r.linear(vec![(ci, cs[j]), (-cj, cs[i]), (1, f)], Cmp::Ge, 0);
        }
    }
    let mut sum: Vec<(i64, _)> = cs.iter().map(|&v| (1, v)).collect();
    sum.push((-1, s));
    r.linear(sum, Cmp::Eq, 0);
    r.objective = Some(Objective::minimize(f));
    r.tie_break = std::iter::once(Objective::minimize(s)).chain(cs.iter().map(|&v| Objective::minimize(v))).collect();
    let resp = solver::solve(backend, &r)?;
    let model = resp
        .model
        .ok_or_else(|| SolverError::Backend(format!("normalization returned {}", resp.status)))?;
    let values: Vec<u64> = cs.iter().map(|&v| model.value(v) as u64).collect();
    let f = distortion(&c.values, &values);
    Ok(done(values, f))
}

/// Map from each original duration to its normalized value.
pub fn normalization_map(raw: &CostVector, normalized: &CostVector) -> BTreeMap<u64, u64> {
    raw.values.iter().copied().zip(normalized.values.iter().copied()).collect()
}

/// Stretches or shrinks an RRT to `new_cycles` rows; row `r'` of the result
/// copies row `floor(r' * n / new_cycles)` of the original.
pub fn stretch_rrt(rrt: &Rrt, new_cycles: u32) -> Rrt {
    let n = rrt.cycles();
    if n == 0 || new_cycles == n {
        return rrt.clone();
    }
    let rows = (0..rrt.num_units())
        .map(|f| {
            (0..new_cycles)
                .map(|r| rrt.get(f, ((r as u64 * n as u64) / new_cycles as u64) as u32))
                .collect()
        })
        .collect();
    Rrt::new(rows, new_cycles)
}

/// Rewrites every duration in `g` through `raw -> normalized`. Durations of
/// zero, and durations absent from `raw`, are left alone.
pub fn apply_normalization(g: &DepGraph, raw: &CostVector, normalized: &CostVector) -> DepGraph {
    let map = normalization_map(raw, normalized);
    let scale = |v: u32| -> u32 { map.get(&(v as u64)).map(|&x| x as u32).unwrap_or(v) };
    let mut out = g.clone();
    for node in &mut out.nodes {
        let cycles = node.cycles();
        if cycles > 0 {
            node.rrt = stretch_rrt(&node.rrt, scale(cycles));
        }
        node.spill_cost = scale(node.spill_cost);
    }
    for e in &mut out.edges {
        e.d = scale(e.d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_problem;

    fn costs(values: &[u64]) -> CostVector {
        CostVector { values: values.to_vec(), resolution_bound: None, distortion: None, sources: Vec::new() }
    }

    #[test]
    fn gemm_exp_gemm_durations_collapse_to_one() {
        let (g, _) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        assert_eq!(collect_costs(&g).values, vec![1]);
    }

    #[test]
    fn spill_costs_are_collected_after_cycles() {
        let (mut g, _) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        for n in &mut g.nodes {
            n.rrt = Rrt::uniform(2, 0, 1, 1000);
        }
        for e in &mut g.edges {
            e.d = 0;
        }
        g.nodes[1].spill_cost = 40;
        assert_eq!(collect_costs(&g).values, vec![1000, 40]);
    }

    #[test]
    fn equal_costs_become_ones() {
        let r = normalize_costs(&costs(&[1000, 1000]), 300).unwrap();
        assert_eq!(r.values, vec![1, 1]);
        assert_eq!(r.distortion, Some(0));
    }

    #[test]
    fn exact_ratio_is_kept() {
        let r = normalize_costs(&costs(&[2000, 3000]), 300).unwrap();
        assert_eq!(r.values, vec![2, 3]);
        assert_eq!(r.distortion, Some(0));
    }

    #[test]
    fn solver_path_matches_distortion_helper() {
        let c = costs(&[1000, 950, 100]);
        let r = normalize_costs(&c, 20).unwrap();
        assert_eq!(r.distortion, Some(distortion(&c.values, &r.values)));
        assert!(r.values.iter().sum::<u64>() <= 20);
    }

    #[test]
    fn resolution_below_count_is_rejected() {
        assert!(matches!(
            normalize_costs(&costs(&[3, 5, 7]), 2),
            Err(CostError::ResolutionTooSmall { .. })
        ));
    }

    #[test]
    fn uniform_stretch() {
        let rrt = Rrt::uniform(1, 0, 1, 1000);
        let s = stretch_rrt(&rrt, 2);
        assert_eq!(s.row(0), &[1, 1]);
        let patterned = Rrt::new(vec![vec![1, 0, 0, 2]], 4);
        assert_eq!(stretch_rrt(&patterned, 2).row(0), &[1, 0]);
        assert_eq!(stretch_rrt(&patterned, 8).row(0), &[1, 1, 0, 0, 0, 0, 2, 2]);
    }

    #[test]
    fn apply_rewrites_edges_and_rrts() {
        let (mut g, _) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        g.nodes[0].rrt = Rrt::uniform(2, 0, 1, 1000);
        g.edges[0].d = 1000;
        let raw = collect_costs(&g);
        let norm = normalize_costs(&raw, 300).unwrap();
        let out = apply_normalization(&g, &raw, &norm);
        assert_eq!(out.nodes[0].cycles(), (norm.values[0] as u32));
        assert_eq!(out.edges[0].d, norm.values[0] as u32);
        let identity = apply_normalization(&out, &collect_costs(&out), &collect_costs(&out));
        assert_eq!(identity, out);
    }
}
