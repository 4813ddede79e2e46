// Shrink measured latencies to small integers before scheduling.

use std::error::Error;

use weftsched::costnorm::{apply_normalization, collect_costs, normalize_costs, CostVector};
use weftsched::ir::parse_problem;

pub fn run() -> Result<(), Box<dyn Error>> {
    // Raw cycle counts with awkward ratios.
    let raw = CostVector { values: vec![37, 110, 260], resolution_bound: None, distortion: None, sources: Vec::new() };
    for u in [6, 12, 25] {
        let norm = normalize_costs(&raw, u)?;
        println!("U={u:<3} {:?} -> {:?}  F={}", raw.values, norm.values, norm.distortion.unwrap());
    }

    // Equal costs always collapse to 1 with no distortion.
    let same = CostVector { values: vec![64, 64], ..raw.clone() };
    let norm = normalize_costs(&same, 10)?;
    println!("{:?} -> {:?}  F={}", same.values, norm.values, norm.distortion.unwrap());

    // On a problem: every duration is rewritten consistently.
    let (g, _) = parse_problem(include_str!("../fixtures/attention.json"))?;
    let costs = collect_costs(&g);
    let norm = normalize_costs(&costs, 300)?;
    let g2 = apply_normalization(&g, &costs, &norm);
    println!("attention durations {:?} -> {:?}", costs.values, norm.values);
    println!("S now takes {} cycle(s)", g2.nodes[g2.node_index("S").unwrap()].cycles());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
