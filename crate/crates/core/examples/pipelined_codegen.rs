// Generate the prologue, steady-state loop and epilogue for a solution.

use std::error::Error;

use weftsched::codegen::{emit_listing, synthesize};
use weftsched::ir::parse_problem;
use weftsched::joint::joint_search;

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json"))?;
    let (sol, _, _) = joint_search(&g, &m)?;
    let p = synthesize(&sol, &g);
    print!("{}", emit_listing(&p));
    println!("versions: {:?}", p.version_map);

    // Two warps: the value crossing between them goes through shared memory.
    let (g, m) = parse_problem(include_str!("../fixtures/blocking_two_warps.json"))?;
    let (sol, _, _) = joint_search(&g, &m)?;
    print!("{}", emit_listing(&synthesize(&sol, &g)));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
