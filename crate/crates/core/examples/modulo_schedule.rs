// Optimal modulo schedule of the attention inner loop at I = 2.

use std::error::Error;

use weftsched::ir::parse_problem;
use weftsched::modsched::{critical_path, default_lmax, modular_rrt, modulo_schedule, rec_mii, res_mii};

pub fn run() -> Result<(), Box<dyn Error>> {
    let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json"))?;
    println!("ResMII={} RecMII={} critical path={:?}", res_mii(&g, &m), rec_mii(&g), critical_path(&g));

    for ii in [1, 2] {
        match modulo_schedule(&g, &m, ii, default_lmax(&g, ii))? {
            None => println!("I={ii}: infeasible"),
            Some(s) => {
                let starts: Vec<String> = g.nodes.iter().zip(&s.start).map(|(n, t)| format!("{}={t}", n.id)).collect();
                println!("I={ii}: L={} M: {}", s.length, starts.join(" "));
                let rrt = modular_rrt(&s, &g, &m);
                for (unit, row) in m.units.iter().zip(&rrt.rows) {
                    println!("  {:<4} {:?}", unit.name, row);
                }
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
