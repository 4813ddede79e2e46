mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{enumerate_joint, random_ws};
use weftsched::ir::validate_graph;
use weftsched::joint::solve_joint_at;
use weftsched::sim::validate_program;

#[test]
fn solver_matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut checked, mut sat) = (0, 0);
    while checked < 150 {
        let (g, m) = random_ws(&mut rng, 3);
        if !validate_graph(&g, &m).is_empty() {
            continue;
        }
        let ii = rng.gen_range(1..=3);
        let length = rng.gen_range(1..=5);
        let mut solutions = Vec::new();
        enumerate_joint(&g, &m, ii, length, |s| {
            solutions.push(s.clone());
            true
        });
        let got = solve_joint_at(&g, &m, ii, length, None).unwrap();
        assert_eq!(got.is_some(), !solutions.is_empty(), "I={ii} L={length}\n{}", weftsched::ir::serialize_problem(&g, &m));
        if let Some(sol) = got {
            assert!(validate_program(&sol, &g, &m).is_empty());
            // The decoded solution is one of the enumerated ones.
            assert!(solutions.iter().any(|s| s.start == sol.start && s.ranges == sol.ranges));
            sat += 1;
        }
        checked += 1;
    }
    assert!(sat > 20 && sat < checked, "{sat} of {checked} feasible");
}
