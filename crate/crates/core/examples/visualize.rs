// Write the warp-colored dependence graph and the schedule chart.

use std::error::Error;

use weftsched::ir::parse_problem;
use weftsched::joint::joint_search;
use weftsched::viz::{emit_dot, emit_gantt};

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, m) = parse_problem(include_str!("../fixtures/blocking_two_warps.json"))?;
    let (sol, _, _) = joint_search(&g, &m)?;
    let dir = std::env::temp_dir().join("weftsched-viz");
    std::fs::create_dir_all(&dir)?;
    let dot = emit_dot(&g, Some(&sol));
    std::fs::write(dir.join("blocking.dot"), &dot)?;
    std::fs::write(dir.join("blocking.svg"), emit_gantt(&sol, &g, &m))?;
    print!("{dot}");
    println!("wrote {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
