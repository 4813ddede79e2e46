// Compare in-order execution with the pipelined program.

use std::error::Error;

use weftsched::codegen::synthesize;
use weftsched::ir::parse_problem;
use weftsched::joint::joint_search;
use weftsched::sim::{simulate_inorder, simulate_pipeline};

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json"))?;
    let base = simulate_inorder(&g, &m, 4);
    println!("in-order:  {} its/cycle", base.throughput);
    print!("{}", base.render(&g, &m));

    let (sol, _, _) = joint_search(&g, &m)?;
    let p = synthesize(&sol, &g);
    let piped = simulate_pipeline(&p, &g, &m, 4)?;
    println!("pipelined: {} its/cycle", piped.throughput);
    print!("{}", piped.render(&g, &m));
    assert!(piped.throughput > base.throughput);

    let (g, m) = parse_problem(include_str!("../fixtures/blocking_two_warps.json"))?;
    let (sol, _, _) = joint_search(&g, &m)?;
    let tr = simulate_pipeline(&synthesize(&sol, &g), &g, &m, 4)?;
    println!("blocking: both warps active in cycles {:?}", tr.concurrent_cycles());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
