use std::fmt::Write;

use super::{Constraint, Lit, SolverError, SolverRequest, Sort};

/// Renders a symbol, quoting it when it is not a simple SMT-LIB symbol.
pub(crate) fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn lit(r: &SolverRequest, l: &Lit) -> String {
    let s = symbol(r.name(l.var));
    if l.positive {
        s
    } else {
        format!("(not {s})")
    }
}

/// QF_LIA script for a satisfiability request.
pub fn to_smtlib2(r: &SolverRequest) -> Result<String, SolverError> {
    if r.objective.is_some() {
        return Err(SolverError::Unsupported(
            "SMT-LIB export takes satisfiability requests; drop the objective or use LP".into(),
        ));
    }
    let mut out = String::new();
    out.push_str("(set-logic QF_LIA)\n");
    for d in &r.vars {
        let sort = match d.sort {
            Sort::Bool => "Bool",
            Sort::Int { .. } => "Int",
        };
        writeln!(out, "(declare-const {} {sort})", symbol(&d.name)).unwrap();
    }
    for d in &r.vars {
        if let Sort::Int { lo, hi } = d.sort {
            let s = symbol(&d.name);
            writeln!(out, "(assert (and (<= {} {s}) (<= {s} {})))", int(lo), int(hi)).unwrap();
        }
    }
    for c in &r.constraints {
        match c {
            Constraint::Clause(lits) => match lits.as_slice() {
                [] => out.push_str("(assert false)\n"),
                [l] => writeln!(out, "(assert {})", lit(r, l)).unwrap(),
                ls => {
                    let parts: Vec<String> = ls.iter().map(|l| lit(r, l)).collect();
                    writeln!(out, "(assert (or {}))", parts.join(" ")).unwrap();
                }
            },
            Constraint::Linear { terms, cmp, rhs } => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|(a, v)| {
                        let base = match r.sort(*v) {
                            Sort::Bool => format!("(ite {} 1 0)", symbol(r.name(*v))),
                            Sort::Int { .. } => symbol(r.name(*v)),
                        };
                        if *a == 1 {
                            base
                        } else {
                            format!("(* {} {base})", int(*a))
                        }
                    })
                    .collect();
                let sum = match parts.len() {
                    0 => "0".to_string(),
                    1 => parts[0].clone(),
                    _ => format!("(+ {})", parts.join(" ")),
                };
                writeln!(out, "(assert ({cmp} {sum} {}))", int(*rhs)).unwrap();
            }
        }
    }
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{Cmp, Objective};
    use super::*;

    #[test]
    fn single_boolean_assertion() {
        let mut r = SolverRequest::new();
        let b = r.bool_var("b");
        r.clause(vec![Lit::pos(b)]);
        let text = to_smtlib2(&r).unwrap();
        assert!(text.contains("(declare-const b Bool)"));
        assert!(text.contains("(assert b)"));
        assert!(text.contains("(check-sat)"));
    }

    #[test]
    fn uniqueness_sum_uses_ite_casts() {
        let mut r = SolverRequest::new();
        let vs: Vec<_> = (0..3).map(|t| r.bool_var(format!("op_v_0_{t}"))).collect();
        r.linear(vs.iter().map(|&v| (1, v)).collect(), Cmp::Eq, 1);
        let text = to_smtlib2(&r).unwrap();
        assert!(text.contains(
            "(assert (= (+ (ite op_v_0_0 1 0) (ite op_v_0_1 1 0) (ite op_v_0_2 1 0)) 1))"
        ));
    }

    #[test]
    fn objectives_are_rejected() {
        let mut r = SolverRequest::new();
        let x = r.int_var("x", 0, 3);
        r.objective = Some(Objective::minimize(x));
        assert!(to_smtlib2(&r).is_err());
    }

    #[test]
    fn odd_names_are_quoted_and_negatives_wrapped() {
        let mut r = SolverRequest::new();
        let x = r.int_var("0x", -2, 2);
        r.linear(vec![(-3, x)], Cmp::Le, -1);
        let text = to_smtlib2(&r).unwrap();
        assert!(text.contains("(assert (<= (* (- 3) |0x|) (- 1)))"), "{text}");
    }
}
