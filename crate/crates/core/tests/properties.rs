mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{machine, random_plain, random_ws};
use weftsched::costnorm::{normalize_costs, CostVector};
use weftsched::ir::{parse_problem, serialize_problem, validate_graph, WarpRange};
use weftsched::joint::JointSolution;
use weftsched::modsched::{
    brute_force_modulo_schedule, modulo_schedule, rec_mii, rec_mii_by_bisection, rec_mii_by_cycles, res_mii,
};
use weftsched::sim::validate_schedule;
use weftsched::straightline::{build_straightline, Shape};

fn plain(seed: u64) -> Option<(weftsched::ir::DepGraph, weftsched::ir::MachineDesc)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_plain(&mut rng, 4, 2, 1, 2);
    let m = machine(&[1, 2], 1, 1 << 40);
    validate_graph(&g, &m).is_empty().then_some((g, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedules_are_valid_and_match_the_oracle(seed in any::<u64>(), ii in 1u32..=3, l_max in 2u32..=6) {
        let Some((g, m)) = plain(seed) else { return Ok(()) };
        let got = modulo_schedule(&g, &m, ii, l_max);
        let want = brute_force_modulo_schedule(&g, &m, ii, l_max);
        match (got, want) {
            (Ok(got), Ok(want)) => {
                if let Some(s) = &got {
                    prop_assert!(validate_schedule(s, &g, &m).is_empty());
                    prop_assert!(s.length <= l_max);
                    prop_assert!(ii >= res_mii(&g, &m));
                }
                prop_assert_eq!(got, want);
            }
            (Err(_), Err(_)) => {}
            (got, want) => prop_assert!(false, "scheduler {:?} vs oracle {:?}", got, want),
        }
    }

    #[test]
    fn recurrence_bounds_agree(seed in any::<u64>()) {
        let Some((g, _)) = plain(seed) else { return Ok(()) };
        let by_cycles = rec_mii_by_cycles(&g);
        prop_assert_eq!(by_cycles, rec_mii_by_bisection(&g));
        prop_assert_eq!(by_cycles, rec_mii(&g));
    }

    #[test]
    fn shape_regions_partition_the_horizon(ii in 1u32..=8, length in 1u32..=20) {
        let s = Shape::new(ii, length);
        prop_assert_eq!(s.copies, length.div_ceil(ii));
        prop_assert_eq!(s.horizon, (s.copies - 1) * ii + length);
        prop_assert_eq!(s.prologue_end(), (s.copies - 1) * ii);
        prop_assert_eq!(s.steady_end(), s.prologue_end() + ii);
        // A body shorter than the interval leaves the trip's tail idle.
        prop_assert_eq!(s.steady_end() <= s.horizon, length >= ii);
    }

    #[test]
    fn straight_line_places_copies_ii_apart(seed in any::<u64>()) {
        let Some((g, m)) = plain(seed) else { return Ok(()) };
        let lower = res_mii(&g, &m).max(rec_mii(&g));
        let Ok(Some(s)) = modulo_schedule(&g, &m, lower, weftsched::modsched::default_lmax(&g, lower)) else {
            return Ok(());
        };
        let q = build_straightline(&s);
        for v in 0..g.nodes.len() {
            for i in 0..s.copies() {
                prop_assert_eq!(q.placements[v][i as usize], s.start[v] + i * s.ii);
                prop_assert!(q.placements[v][i as usize] < q.shape.horizon);
            }
        }
    }

    #[test]
    fn problems_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, m) = random_ws(&mut rng, 4);
        let text = serialize_problem(&g, &m);
        let (g2, m2) = parse_problem(&text).unwrap();
        prop_assert_eq!(serialize_problem(&g2, &m2), text);
    }

    #[test]
    fn solutions_round_trip(seed in any::<u64>(), ii in 1u32..=3, extra in 0u32..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, m) = random_ws(&mut rng, 3);
        let length = g.nodes.iter().map(|v| v.span()).max().unwrap_or(1) + extra;
        let start: Vec<u32> = g.nodes.iter().map(|v| length - v.span()).collect();
        let ranges = g.nodes.iter().map(|v| m.legal_ranges(v).first().cloned().unwrap_or(WarpRange::single(0))).collect();
        let sol = JointSolution::from_assignment(&g, &m, Shape::new(ii, length), start, ranges, Default::default());
        let back = JointSolution::from_json(&sol.to_json(&g), &g, &m).unwrap();
        prop_assert_eq!(back, sol);
    }

    #[test]
    fn normalization_is_scale_invariant(values in prop::collection::vec(1u64..=20, 1..=3), k in 2u64..=5, u in 3u64..=12) {
        let cost = |values: Vec<u64>| CostVector { values, resolution_bound: None, distortion: None, sources: Vec::new() };
        let a = normalize_costs(&cost(values.clone()), u).unwrap();
        let b = normalize_costs(&cost(values.iter().map(|c| c * k).collect()), u).unwrap();
        prop_assert_eq!(&a.values, &b.values);
        prop_assert!(a.values.iter().all(|&c| c >= 1));
        prop_assert!(a.values.iter().sum::<u64>() <= u.max(values.len() as u64));
    }
}
