// Unroll a modulo schedule into overlapped copies and read off the regions.

use std::error::Error;

use weftsched::ir::parse_problem;
use weftsched::modsched::ModuloSchedule;
use weftsched::straightline::build_straightline;

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, _) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json"))?;
    let s = ModuloSchedule::new(&g, 2, vec![0, 2, 3]);
    let q = build_straightline(&s);
    let shape = q.shape;
    println!("copies={} T={}", shape.copies, shape.horizon);
    println!(
        "prologue [0,{})  steady [{},{})  epilogue [{},{})",
        shape.prologue_end(),
        shape.prologue_end(),
        shape.steady_end(),
        shape.steady_end(),
        shape.horizon
    );
    for t in 0..shape.horizon {
        let here: Vec<String> = g
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(v, n)| {
                q.placements[v].iter().enumerate().filter(move |(_, &p)| p == t).map(move |(i, _)| format!("{}#{i}", n.id))
            })
            .collect();
        println!("  {t}: {}", here.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
