// Variable-latency loads with no producers run ahead on their own warp.

use std::error::Error;

use weftsched::ir::parse_problem;
use weftsched::joint::{apply_streaming_opt, joint_search_with, SearchOptions};
use weftsched::sim::validate_program;
use weftsched::solver::InternalSolver;

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, m) = parse_problem(include_str!("../fixtures/attention.json"))?;
    let (streamed, ids) = apply_streaming_opt(&g);
    println!("streaming: {ids:?}");

    let opts = SearchOptions { stream_depth: 3, ..SearchOptions::default() };
    let (sol, ii, report) = joint_search_with(&InternalSolver::default(), &g, &m, &opts)?;
    println!("I*={ii} L={} after {} attempts", sol.length(), report.attempts.len());
    println!("depths: {:?}", sol.streaming_depths);
    for (v, node) in streamed.nodes.iter().enumerate() {
        println!("  {:<2} cycle {:<2} warp[{}]", node.id, sol.start[v], sol.ranges[v]);
    }
    // Solutions refer to the rewritten graph.
    assert!(validate_program(&sol, &streamed, &m).is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
