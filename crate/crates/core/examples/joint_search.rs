// Search for the fastest schedule together with a warp assignment.
//
// With a single compute warp, the blocking `ADD` stalls the warp that
// would issue `EXP`, so the loop cannot reach its resource bound. A second
// warp lets `EXP` run while `ADD` waits.

use std::error::Error;

use weftsched::ir::parse_problem;
use weftsched::joint::joint_search;
use weftsched::modsched::res_mii;

pub fn run() -> Result<(), Box<dyn Error>> {
    for (name, text) in [
        ("gemm-exp-gemm", include_str!("../fixtures/gemm_exp_gemm.json")),
        ("blocking, one warp", include_str!("../fixtures/blocking_one_warp.json")),
        ("blocking, two warps", include_str!("../fixtures/blocking_two_warps.json")),
    ] {
        let (g, m) = parse_problem(text)?;
        let (sol, ii, report) = joint_search(&g, &m)?;
        println!("{name}: ResMII={} I*={ii} L={}", res_mii(&g, &m), sol.length());
        for (v, node) in g.nodes.iter().enumerate() {
            println!("  {:<4} cycle {:<2} warp[{}]", node.id, sol.start[v], sol.ranges[v]);
        }
        for a in &report.attempts {
            let l = a.length.map_or("-".to_string(), |l| l.to_string());
            println!("  tried I={} L={l}: {}", a.ii, a.outcome.as_str());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
