//! Constraint systems over booleans and bounded integers, their SMT-LIB2 and
//! LP-file serializations, model parsing, and the solver backends.
//!
//! Every assertion is linear: clauses are disjunctions of boolean literals and
//! linear constraints compare a weighted sum against a constant, with booleans
//! counting as 0/1. Optimization is lexicographic over declared variables and
//! is layered on top of plain satisfiability checks (see [`solve`]), so it
//! works the same way with the internal engine and with an external process.

mod external;
mod internal;
mod lp;
mod model;
mod smtlib;

use std::fmt;

use thiserror::Error;

pub use external::ExternalSolver;
pub use internal::InternalSolver;
pub use lp::to_lp_format;
pub use model::parse_model;
pub use smtlib::to_smtlib2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Bool,
    Int { lo: i64, hi: i64 },
}

impl Sort {
    pub fn bounds(self) -> (i64, i64) {
        match self {
            Sort::Bool => (0, 1),
            Sort::Int { lo, hi } => (lo, hi),
        }
    }
}

/// Which end of a domain the internal engine tries first when branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    #[default]
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub sort: Sort,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lit {
    pub var: Var,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Self {
        Lit { var, positive: true }
    }

    pub fn neg(var: Var) -> Self {
        Lit { var, positive: false }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit { var: self.var, positive: !self.positive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    /// At least one literal holds.
    Clause(Vec<Lit>),
    /// `sum(coef * var) cmp rhs`.
    Linear { terms: Vec<(i64, Var)>, cmp: Cmp, rhs: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Objective {
    pub var: Var,
    pub sense: Sense,
}

impl Objective {
    pub fn minimize(var: Var) -> Self {
        Objective { var, sense: Sense::Minimize }
    }

    pub fn maximize(var: Var) -> Self {
        Objective { var, sense: Sense::Maximize }
    }
}

/// A quantifier-free linear integer problem, optionally with an objective.
///
/// `tie_break` objectives are applied after `objective` in order, each with
/// the previous optima fixed. `hints` give the internal engine preferred
/// values to branch on first; they never change the answer's status.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverRequest {
    pub vars: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<Objective>,
    pub tie_break: Vec<Objective>,
    pub hints: Vec<(Var, i64)>,
}

impl SolverRequest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: impl Into<String>, sort: Sort, phase: Phase) -> Var {
        let var = Var(self.vars.len() as u32);
        self.vars.push(VarDecl { name: name.into(), sort, phase });
        var
    }

    pub fn bool_var(&mut self, name: impl Into<String>) -> Var {
        self.declare(name, Sort::Bool, Phase::Low)
    }

    pub fn int_var(&mut self, name: impl Into<String>, lo: i64, hi: i64) -> Var {
        self.declare(name, Sort::Int { lo, hi }, Phase::Low)
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn clause(&mut self, lits: Vec<Lit>) {
        self.constraints.push(Constraint::Clause(lits));
    }

    pub fn linear(&mut self, terms: Vec<(i64, Var)>, cmp: Cmp, rhs: i64) {
        self.constraints.push(Constraint::Linear { terms, cmp, rhs });
    }

    pub fn name(&self, var: Var) -> &str {
        &self.vars[var.index()].name
    }

    pub fn sort(&self, var: Var) -> Sort {
        self.vars[var.index()].sort
    }

    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.vars.iter().position(|d| d.name == name).map(|i| Var(i as u32))
    }

    pub fn has_objective(&self) -> bool {
        self.objective.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
            Status::Error => "error",
        })
    }
}

/// Values for every declared variable, booleans as 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<i64>,
}

impl Model {
    pub fn new(values: Vec<i64>) -> Self {
        Model { values }
    }

    pub fn value(&self, var: Var) -> i64 {
        self.values[var.index()]
    }

    pub fn is_true(&self, var: Var) -> bool {
        self.values[var.index()] != 0
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Checks every declared bound and constraint against this model.
    pub fn satisfies(&self, request: &SolverRequest) -> bool {
        let in_bounds = request.vars.iter().enumerate().all(|(i, d)| {
            let (lo, hi) = d.sort.bounds();
            (lo..=hi).contains(&self.values[i])
        });
        in_bounds
            && request.constraints.iter().all(|c| match c {
                Constraint::Clause(lits) => {
                    lits.iter().any(|l| self.is_true(l.var) == l.positive)
                }
                Constraint::Linear { terms, cmp, rhs } => {
                    let sum: i64 = terms.iter().map(|(a, v)| a * self.value(*v)).sum();
                    match cmp {
                        Cmp::Le => sum <= *rhs,
                        Cmp::Ge => sum >= *rhs,
                        Cmp::Eq => sum == *rhs,
                    }
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResponse {
    pub status: Status,
    pub model: Option<Model>,
    pub objective_value: Option<i64>,
}

impl SolverResponse {
    pub fn sat(model: Model) -> Self {
        SolverResponse { status: Status::Sat, model: Some(model), objective_value: None }
    }

    pub fn unsat() -> Self {
        SolverResponse { status: Status::Unsat, model: None, objective_value: None }
    }

    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance too large: exceeded {limit} branching decisions")]
    TooLarge { limit: u64 },
    #[error("malformed solver output: {0}")]
    Malformed(String),
    #[error("solver reported `{0}`")]
    Backend(String),
    #[error("failed to run external solver: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported request: {0}")]
    Unsupported(String),
}

/// Anything that can decide satisfiability of a request, ignoring objectives.
pub trait Backend {
    fn check(&self, request: &SolverRequest) -> Result<SolverResponse, SolverError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn check(&self, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
        (**self).check(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn check(&self, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
        (**self).check(request)
    }
}

/// Runs `request` on the internal engine with the default budget.
pub fn solve_internal(request: &SolverRequest) -> Result<SolverResponse, SolverError> {
    solve(&InternalSolver::default(), request)
}

/// Satisfiability, or lexicographic optimization when the request carries an
/// objective. Each objective is optimized by bisection on its bound, then
/// pinned before the next one; the returned model is the last one found.
pub fn solve<B: Backend>(backend: &B, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
    let first = backend.check(request)?;
    let Some(primary) = request.objective else {
        return Ok(first);
    };
    let Some(mut model) = first.model.clone().filter(|_| first.is_sat()) else {
        return Ok(first);
    };
    let mut pinned = request.clone();
    pinned.objective = None;
    pinned.tie_break.clear();
    let mut primary_value = None;
    for objective in std::iter::once(primary).chain(request.tie_break.iter().copied()) {
        let (lo, hi) = pinned.sort(objective.var).bounds();
        let mut best = model.value(objective.var);
        // Bisect between the declared bound and the incumbent.
        let (mut a, mut b) = match objective.sense {
            Sense::Minimize => (lo, best),
            Sense::Maximize => (best, hi),
        };
        while a < b {
            let mid = match objective.sense {
                Sense::Minimize => a + (b - a) / 2,
                Sense::Maximize => b - (b - a) / 2,
            };
            let mut probe = pinned.clone();
            let cmp = match objective.sense {
                Sense::Minimize => Cmp::Le,
                Sense::Maximize => Cmp::Ge,
            };
            probe.linear(vec![(1, objective.var)], cmp, mid);
            let resp = backend.check(&probe)?;
            match (resp.status, resp.model) {
                (Status::Sat, Some(m)) => {
                    best = m.value(objective.var);
                    model = m;
                    match objective.sense {
                        Sense::Minimize => b = best,
                        Sense::Maximize => a = best,
                    }
                }
                (Status::Unsat, _) => match objective.sense {
                    Sense::Minimize => a = mid + 1,
                    Sense::Maximize => b = mid - 1,
                },
                (status, _) => return Err(SolverError::Backend(status.to_string())),
            }
        }
        pinned.linear(vec![(1, objective.var)], Cmp::Eq, best);
        if primary_value.is_none() {
            primary_value = Some(best);
        }
    }
    // Re-solve with every optimum pinned so the model does not depend on the
    // bisection path.
    let last = backend.check(&pinned)?;
    let model = match (last.status, last.model) {
        (Status::Sat, Some(m)) => m,
        (status, _) => return Err(SolverError::Backend(status.to_string())),
    };
    Ok(SolverResponse { status: Status::Sat, model: Some(model), objective_value: primary_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contradiction_is_unsat() {
        let mut r = SolverRequest::new();
        let b = r.bool_var("b");
        r.clause(vec![Lit::pos(b)]);
        r.clause(vec![Lit::neg(b)]);
        assert_eq!(solve_internal(&r).unwrap().status, Status::Unsat);
    }

    #[test]
    fn lexicographic_objectives_are_applied_in_order() {
        let mut r = SolverRequest::new();
        let x = r.int_var("x", 0, 10);
        let y = r.int_var("y", 0, 10);
        r.linear(vec![(1, x), (1, y)], Cmp::Ge, 7);
        r.objective = Some(Objective::minimize(x));
        r.tie_break = vec![Objective::maximize(y)];
        let resp = solve_internal(&r).unwrap();
        let m = resp.model.unwrap();
        assert_eq!((m.value(x), m.value(y)), (0, 10));
        assert_eq!(resp.objective_value, Some(0));
    }

    #[test]
    fn maximize_reaches_upper_bound_of_feasible_region() {
        let mut r = SolverRequest::new();
        let x = r.int_var("x", -5, 50);
        let y = r.int_var("y", 0, 3);
        r.linear(vec![(2, x), (-1, y)], Cmp::Le, 9);
        r.objective = Some(Objective::maximize(x));
        let m = solve_internal(&r).unwrap().model.unwrap();
        assert_eq!(m.value(x), 6);
        assert!(m.satisfies(&r));
    }
}
