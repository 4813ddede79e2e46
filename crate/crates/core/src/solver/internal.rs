//! Exhaustive depth-first search with bounds propagation.
//!
//! Every assertion is normalized to `sum(a_i * x_i) <= b` and propagated to
//! bounds consistency. Branching picks the first unfixed variable (hints
//! first, then declaration order) and tries the phase-preferred end of its
//! domain before the rest, so results are fully deterministic.

use super::{
    Backend, Cmp, Constraint, Model, Phase, SolverError, SolverRequest, SolverResponse,
};

#[derive(Debug, Clone, Copy)]
pub struct InternalSolver {
    /// Upper bound on branching decisions before giving up.
    pub max_decisions: u64,
}

impl Default for InternalSolver {
    fn default() -> Self {
        InternalSolver { max_decisions: 50_000_000 }
    }
}

impl InternalSolver {
    pub fn with_budget(max_decisions: u64) -> Self {
        InternalSolver { max_decisions }
    }
}

impl Backend for InternalSolver {
    fn check(&self, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
        let Some(mut engine) = Engine::new(request) else {
            return Ok(SolverResponse::unsat());
        };
        match engine.search(request, self.max_decisions)? {
            Some(values) => Ok(SolverResponse::sat(Model::new(values))),
            None => Ok(SolverResponse::unsat()),
        }
    }
}

struct LinCon {
    terms: Vec<(i64, u32)>,
    rhs: i64,
}

struct Engine {
    lo: Vec<i64>,
    hi: Vec<i64>,
    cons: Vec<LinCon>,
    occurs: Vec<Vec<u32>>,
    trail: Vec<(u32, i64, i64)>,
    queue: Vec<u32>,
    queued: Vec<bool>,
}

struct Decision {
    var: u32,
    trail_len: usize,
    scan_from: usize,
    /// Remaining domain pieces to try, in order.
    options: Vec<(i64, i64)>,
}

impl Engine {
    /// Returns `None` when some assertion is trivially false.
    fn new(request: &SolverRequest) -> Option<Engine> {
        let n = request.vars.len();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for d in &request.vars {
            let (a, b) = d.sort.bounds();
            if a > b {
                return None;
            }
            lo.push(a);
            hi.push(b);
        }
        let mut cons = Vec::new();
        for c in &request.constraints {
            match c {
                Constraint::Clause(lits) => {
                    // sum(pos) + sum(1 - neg) >= 1
                    let negs = lits.iter().filter(|l| !l.positive).count() as i64;
                    let terms =
                        lits.iter().map(|l| (if l.positive { -1 } else { 1 }, l.var.0)).collect();
                    cons.push(LinCon { terms, rhs: negs - 1 });
                }
                Constraint::Linear { terms, cmp, rhs } => {
                    let t: Vec<(i64, u32)> = terms.iter().map(|(a, v)| (*a, v.0)).collect();
                    if matches!(cmp, Cmp::Le | Cmp::Eq) {
                        cons.push(LinCon { terms: t.clone(), rhs: *rhs });
                    }
                    if matches!(cmp, Cmp::Ge | Cmp::Eq) {
                        cons.push(LinCon { terms: t.iter().map(|(a, v)| (-a, *v)).collect(), rhs: -rhs });
                    }
                }
            }
        }
        let mut occurs = vec![Vec::new(); n];
        for (ci, c) in cons.iter_mut().enumerate() {
            merge_terms(&mut c.terms);
            if c.terms.is_empty() && c.rhs < 0 {
                return None;
            }
            for &(_, v) in &c.terms {
                occurs[v as usize].push(ci as u32);
            }
        }
        let m = cons.len();
        Some(Engine {
            lo,
            hi,
            cons,
            occurs,
            trail: Vec::new(),
            queue: (0..m as u32).rev().collect(),
            queued: vec![true; m],
        })
    }

    fn set_lo(&mut self, v: u32, val: i64) -> bool {
        let i = v as usize;
        if val <= self.lo[i] {
            return true;
        }
        if val > self.hi[i] {
            return false;
        }
        self.trail.push((v, self.lo[i], self.hi[i]));
        self.lo[i] = val;
        self.touch(v);
        true
    }

    fn set_hi(&mut self, v: u32, val: i64) -> bool {
        let i = v as usize;
        if val >= self.hi[i] {
            return true;
        }
        if val < self.lo[i] {
            return false;
        }
        self.trail.push((v, self.lo[i], self.hi[i]));
        self.hi[i] = val;
        self.touch(v);
        true
    }

    fn touch(&mut self, v: u32) {
        for k in 0..self.occurs[v as usize].len() {
            let c = self.occurs[v as usize][k];
            if !self.queued[c as usize] {
                self.queued[c as usize] = true;
                self.queue.push(c);
            }
        }
    }

    fn clear_queue(&mut self) {
        for c in self.queue.drain(..) {
            self.queued[c as usize] = false;
        }
    }

    fn propagate(&mut self) -> bool {
        while let Some(c) = self.queue.pop() {
            self.queued[c as usize] = false;
            let ci = c as usize;
            let mut min_sum = 0i64;
            for &(a, v) in &self.cons[ci].terms {
                let v = v as usize;
                min_sum += if a > 0 { a * self.lo[v] } else { a * self.hi[v] };
            }
            let slack = self.cons[ci].rhs - min_sum;
            if slack < 0 {
                self.clear_queue();
                return false;
            }
            for k in 0..self.cons[ci].terms.len() {
                let (a, v) = self.cons[ci].terms[k];
                let vi = v as usize;
                let ok = if a > 0 {
                    let bound = self.lo[vi] + slack / a;
                    self.set_hi(v, bound)
                } else {
                    let bound = self.hi[vi] - slack / (-a);
                    self.set_lo(v, bound)
                };
                if !ok {
                    self.clear_queue();
                    return false;
                }
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let (v, lo, hi) = self.trail.pop().unwrap();
            self.lo[v as usize] = lo;
            self.hi[v as usize] = hi;
        }
    }

    fn restrict(&mut self, v: u32, (a, b): (i64, i64)) -> bool {
        self.set_lo(v, a) && self.set_hi(v, b) && self.propagate()
    }

    fn options_for(&self, request: &SolverRequest, v: u32, hint: Option<i64>) -> Vec<(i64, i64)> {
        let (lo, hi) = (self.lo[v as usize], self.hi[v as usize]);
        let mut opts = Vec::with_capacity(3);
        match hint {
            Some(p) if (lo..=hi).contains(&p) => {
                opts.push((p, p));
                if p > lo {
                    opts.push((lo, p - 1));
                }
                if p < hi {
                    opts.push((p + 1, hi));
                }
            }
            _ => match request.vars[v as usize].phase {
                Phase::Low => {
                    opts.push((lo, lo));
                    opts.push((lo + 1, hi));
                }
                Phase::High => {
                    opts.push((hi, hi));
                    opts.push((lo, hi - 1));
                }
            },
        }
        opts
    }

    fn search(
        &mut self,
        request: &SolverRequest,
        budget: u64,
    ) -> Result<Option<Vec<i64>>, SolverError> {
        if !self.propagate() {
            return Ok(None);
        }
        let mut order: Vec<(u32, Option<i64>)> = Vec::new();
        let mut seen = vec![false; self.lo.len()];
        for &(v, p) in &request.hints {
            if !seen[v.index()] {
                seen[v.index()] = true;
                order.push((v.0, Some(p)));
            }
        }
        // Hinted vars appear again without a hint so that a failed hint falls
        // back to phase order.
        order.extend((0..self.lo.len() as u32).map(|v| (v, None)));

        let mut stack: Vec<Decision> = Vec::new();
        let mut decisions = 0u64;
        let mut scan = 0usize;
        loop {
            while scan < order.len() && self.lo[order[scan].0 as usize] == self.hi[order[scan].0 as usize] {
                scan += 1;
            }
            if scan == order.len() {
                return Ok(Some(self.lo.clone()));
            }
            let (v, hint) = order[scan];
            let mut options = self.options_for(request, v, hint);
            options.reverse();
            stack.push(Decision { var: v, trail_len: self.trail.len(), scan_from: scan, options });
            // Try options of the top decision, backtracking on exhaustion.
            loop {
                let Some(top) = stack.last_mut() else {
                    return Ok(None);
                };
                let Some(opt) = top.options.pop() else {
                    stack.pop();
                    continue;
                };
                let (var, trail_len, scan_from) = (top.var, top.trail_len, top.scan_from);
                self.undo_to(trail_len);
                decisions += 1;
                if decisions > budget {
                    return Err(SolverError::TooLarge { limit: budget });
                }
                if self.restrict(var, opt) {
                    scan = scan_from;
                    break;
                }
            }
        }
    }
}

fn merge_terms(terms: &mut Vec<(i64, u32)>) {
    terms.sort_by_key(|&(_, v)| v);
    let mut out: Vec<(i64, u32)> = Vec::with_capacity(terms.len());
    for &(a, v) in terms.iter() {
        match out.last_mut() {
            Some((b, w)) if *w == v => *b += a,
            _ => out.push((a, v)),
        }
    }
    out.retain(|&(a, _)| a != 0);
    *terms = out;
}
