// Build a small constraint system, export it, and read a model back.

use std::error::Error;

use weftsched::solver::{
    parse_model, solve_internal, to_lp_format, to_smtlib2, Cmp, Lit, Objective, SolverRequest, Status,
};

pub fn run() -> Result<(), Box<dyn Error>> {
    let mut r = SolverRequest::new();
    let a = r.bool_var("a");
    let b = r.bool_var("b");
    let t = r.int_var("t", 0, 5);
    r.clause(vec![Lit::pos(a), Lit::pos(b)]);
    r.linear(vec![(1, t), (-2, a)], Cmp::Ge, 1);

    let smt = to_smtlib2(&r)?;
    println!("{smt}");

    let resp = solve_internal(&r)?;
    let model = resp.model.as_ref().expect("satisfiable");
    println!("internal: a={} b={} t={}", model.value(a), model.value(b), model.value(t));

    // The shape of answer an external solver prints.
    let answer = "sat\n(model (define-fun a () Bool false) (define-fun b () Bool true) (define-fun t () Int 1))";
    let parsed = parse_model(answer, &r)?;
    assert_eq!(parsed.status, Status::Sat);
    println!("parsed model satisfies request: {}", parsed.model.unwrap().satisfies(&r));

    let mut opt = r.clone();
    opt.objective = Some(Objective::minimize(t));
    println!("{}", to_lp_format(&opt)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
