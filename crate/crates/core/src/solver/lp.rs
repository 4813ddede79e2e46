use std::fmt::Write;

use super::{Cmp, Constraint, Sense, SolverError, SolverRequest, Sort, Var};

/// CPLEX-style LP file for a request with an objective. Only the primary
/// objective is written; tie-break objectives have no LP equivalent.
pub fn to_lp_format(r: &SolverRequest) -> Result<String, SolverError> {
    let objective = r
        .objective
        .ok_or_else(|| SolverError::Unsupported("LP export needs an objective".into()))?;
    let mut out = String::new();
    out.push_str("\\ generated by weftsched\n");
    out.push_str(match objective.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    writeln!(out, " obj: {}", r.name(objective.var)).unwrap();
    out.push_str("Subject To\n");
    for (i, c) in r.constraints.iter().enumerate() {
        let (terms, cmp, rhs) = match c {
            Constraint::Clause(lits) => {
                // sum(pos) - sum(neg) >= 1 - #neg
                let negs = lits.iter().filter(|l| !l.positive).count() as i64;
                let terms: Vec<(i64, Var)> =
                    lits.iter().map(|l| (if l.positive { 1 } else { -1 }, l.var)).collect();
                (terms, Cmp::Ge, 1 - negs)
            }
            Constraint::Linear { terms, cmp, rhs } => (terms.clone(), *cmp, *rhs),
        };
        writeln!(out, " c{i}: {} {cmp} {rhs}", expr(r, &terms)).unwrap();
    }
    out.push_str("Bounds\n");
    for d in &r.vars {
        if let Sort::Int { lo, hi } = d.sort {
            writeln!(out, " {lo} <= {} <= {hi}", d.name).unwrap();
        }
    }
    let generals: Vec<&str> = r
        .vars
        .iter()
        .filter(|d| matches!(d.sort, Sort::Int { .. }))
        .map(|d| d.name.as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        writeln!(out, " {}", generals.join(" ")).unwrap();
    }
    let binaries: Vec<&str> = r
        .vars
        .iter()
        .filter(|d| d.sort == Sort::Bool)
        .map(|d| d.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        writeln!(out, " {}", binaries.join(" ")).unwrap();
    }
    out.push_str("End\n");
    Ok(out)
}

fn expr(r: &SolverRequest, terms: &[(i64, Var)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (a, v)) in terms.iter().enumerate() {
        let name = r.name(*v);
        let (sign, mag) = if *a < 0 { ("-", -a) } else { ("+", *a) };
        if k == 0 {
            if *a < 0 {
                s.push_str("- ");
            }
        } else {
            write!(s, " {sign} ").unwrap();
        }
        if mag == 1 {
            s.push_str(name);
        } else {
            write!(s, "{mag} {name}").unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::{Lit, Objective};
    use super::*;

    #[test]
    fn ratio_constraints_for_two_costs() {
        // minimize F subject to |2000*c1 - 3000*c0| <= F
        let mut r = SolverRequest::new();
        let c0 = r.int_var("c0", 1, 300);
        let c1 = r.int_var("c1", 1, 300);
        let f = r.int_var("F", 0, 900000);
        r.linear(vec![(2000, c1), (-3000, c0), (-1, f)], Cmp::Le, 0);
        r.linear(vec![(2000, c1), (-3000, c0), (1, f)], Cmp::Ge, 0);
        r.objective = Some(Objective::minimize(f));
        let text = to_lp_format(&r).unwrap();
        assert!(text.contains("Minimize\n obj: F\n"));
        assert!(text.contains(" c0: 2000 c1 - 3000 c0 - F <= 0\n"));
        assert!(text.contains(" c1: 2000 c1 - 3000 c0 + F >= 0\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with(" c") && l.contains(": ")).count(), 2);
        assert!(text.contains("Generals\n c0 c1 F\n"));
    }

    #[test]
    fn clauses_become_covering_rows() {
        let mut r = SolverRequest::new();
        let a = r.bool_var("a");
        let b = r.bool_var("b");
        let x = r.int_var("x", 0, 1);
        r.clause(vec![Lit::neg(a), Lit::pos(b)]);
        r.objective = Some(Objective::minimize(x));
        let text = to_lp_format(&r).unwrap();
        assert!(text.contains(" c0: - a + b >= 0\n"), "{text}");
        assert!(text.contains("Binaries\n a b\n"));
    }

    #[test]
    fn missing_objective_is_an_error() {
        let r = SolverRequest::new();
        assert!(to_lp_format(&r).is_err());
    }
}
