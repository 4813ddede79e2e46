// Drive the command line in-process, as the `weftsched` binary does.

use std::error::Error;

use weftsched::cli::run_with;

pub fn run() -> Result<(), Box<dyn Error>> {
    let problem = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/gemm_exp_gemm.json");
    let solution = std::env::temp_dir().join("weftsched-gemm-exp-gemm-solution.json");
    let solution = solution.to_str().ok_or("temp path is not utf-8")?;

    let steps: Vec<Vec<&str>> = vec![
        vec!["schedule", problem, "--ii", "2"],
        vec!["joint", problem, "--output", solution],
        vec!["validate", solution, problem],
        vec!["codegen", solution, problem],
        vec!["sim", problem, "--solution", solution, "--iters", "4"],
    ];
    for step in steps {
        let argv: Vec<String> = std::iter::once("weftsched").chain(step.iter().copied()).map(String::from).collect();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(&argv, &mut out, &mut err);
        println!("$ weftsched {}  (exit {code})", step.join(" "));
        print!("{}{}", String::from_utf8_lossy(&out), String::from_utf8_lossy(&err));
        if code != 0 {
            return Err(format!("`{}` failed", step[0]).into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
