use super::{Model, SolverError, SolverRequest, SolverResponse, Sort, Status};

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, SolverError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                tokens.push(c.to_string());
                chars.next();
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => s.push(c),
                        None => return Err(SolverError::Malformed("unterminated quoted symbol".into())),
                    }
                }
                tokens.push(s);
            }
            '"' => {
                chars.next();
                let mut s = String::from("\"");
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(SolverError::Malformed("unterminated string".into())),
                    }
                }
                tokens.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                tokens.push(s);
            }
        }
    }
    Ok(tokens)
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, SolverError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().unwrap();
                let parent = stack
                    .last_mut()
                    .ok_or_else(|| SolverError::Malformed("unbalanced `)`".into()))?;
                parent.push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err(SolverError::Malformed("unbalanced parentheses (truncated output?)".into()));
    }
    Ok(stack.pop().unwrap())
}

fn value(s: &Sexp) -> Result<i64, SolverError> {
    match s {
        Sexp::Atom(a) if a == "true" => Ok(1),
        Sexp::Atom(a) if a == "false" => Ok(0),
        Sexp::Atom(a) => a.parse().map_err(|_| SolverError::Malformed(format!("bad value `{a}`"))),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => Ok(-value(inner)?),
            _ => Err(SolverError::Malformed(format!("unsupported value {s:?}"))),
        },
    }
}

/// Parses a `check-sat` answer followed by an optional `get-model` reply.
/// Variables absent from the reply take the low end of their domain.
pub fn parse_model(text: &str, request: &SolverRequest) -> Result<SolverResponse, SolverError> {
    let items = parse_sexps(&tokenize(text)?)?;
    let mut iter = items.iter();
    let status = match iter.next() {
        Some(Sexp::Atom(s)) if s == "sat" => Status::Sat,
        Some(Sexp::Atom(s)) if s == "unsat" => Status::Unsat,
        Some(Sexp::Atom(s)) if s == "unknown" => Status::Unknown,
        Some(Sexp::List(l)) if matches!(l.first(), Some(Sexp::Atom(a)) if a == "error") => {
            return Err(SolverError::Backend(format!("{l:?}")));
        }
        other => return Err(SolverError::Malformed(format!("expected a status, found {other:?}"))),
    };
    if status != Status::Sat {
        return Ok(SolverResponse { status, model: None, objective_value: None });
    }
    let Some(Sexp::List(defs)) = iter.next() else {
        return Err(SolverError::Malformed("sat answer without a model".into()));
    };
    let mut values: Vec<i64> = request.vars.iter().map(|d| d.sort.bounds().0).collect();
    for def in defs {
        let Sexp::List(parts) = def else {
            // z3 prefixes older models with the atom `model`.
            continue;
        };
        match parts.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), val]
                if kw == "define-fun" && args.is_empty() =>
            {
                let var = request
                    .lookup(name)
                    .ok_or_else(|| SolverError::Malformed(format!("unknown variable `{name}`")))?;
                let expected = match request.sort(var) {
                    Sort::Bool => "Bool",
                    Sort::Int { .. } => "Int",
                };
                if sort != expected {
                    return Err(SolverError::Malformed(format!("`{name}` has sort {sort}")));
                }
                values[var.index()] = value(val)?;
            }
            _ => return Err(SolverError::Malformed(format!("unexpected model entry {def:?}"))),
        }
    }
    Ok(SolverResponse::sat(Model::new(values)))
}
