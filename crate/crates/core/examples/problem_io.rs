// Load a problem, check it, and write it back out.

use std::error::Error;

use weftsched::ir::{parse_problem, serialize_problem, validate_graph};

pub fn run() -> Result<(), Box<dyn Error>> {
    let text = include_str!("../fixtures/gemm_exp_gemm.json");
    let (g, m) = parse_problem(text)?;
    println!("{} units, {} compute warps, reg limit {}", m.units.len(), m.num_warps, m.reg_limit);
    for node in &g.nodes {
        println!("  {:<3} {:<5} {} cycle(s)", node.id, node.opcode(), node.cycles());
    }
    for e in &g.edges {
        println!("  {} -> {}  d={} delta={}", g.nodes[e.src].id, g.nodes[e.dst].id, e.d, e.delta);
    }

    let diags = validate_graph(&g, &m);
    println!("diagnostics: {}", diags.len());

    // Serialization is stable: parsing the output gives the same problem.
    let again = serialize_problem(&g, &m);
    let (g2, m2) = parse_problem(&again)?;
    assert_eq!((g2, m2), (g, m));
    println!("round trip ok ({} bytes)", again.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
