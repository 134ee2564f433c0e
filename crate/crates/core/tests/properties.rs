use proptest::prelude::*;

use vrptight_core::baselines::{oracle, two_opt_or_opt};
use vrptight_core::generator::{gen_cvrptw_base, gen_instance, AlphaMode, CapacityMode, GenSpec};
use vrptight_core::similarity::{similarity, TransferCosts};
use vrptight_core::{apply_tightness, distance, schedule, solution_cost, validate, Node, ProblemKind, Solution};

fn point() -> impl Strategy<Value = Node> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Node::plain(0, x, y, 0))
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in point(), b in point(), c in point()) {
        prop_assert_eq!(distance(&a, &b), distance(&b, &a));
        prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-12);
        prop_assert_eq!(distance(&a, &a), 0.0);
    }

    #[test]
    fn reversing_a_closed_subtour_keeps_the_cost(seed in 0u64..1000, which in 0usize..100) {
        let spec = GenSpec::new(ProblemKind::Cvrp, 15, CapacityMode::Range(9, 40), seed, 1);
        let inst = gen_instance(&spec, 0).unwrap();
        let sol = oracle(&inst).unwrap();
        let mut routes = sol.routes(ProblemKind::Cvrp).unwrap();
        let r = which % routes.len();
        routes[r].reverse();
        let flipped = Solution::from_routes(ProblemKind::Cvrp, &routes);
        let (a, b) = (solution_cost(&inst, &sol).unwrap(), solution_cost(&inst, &flipped).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tightening_scales_window_widths(seed in 0u64..1000, alpha in 0.05..4.0f64) {
        let base = gen_cvrptw_base(12, seed).unwrap();
        let same = apply_tightness(&base, 1.0).unwrap();
        prop_assert_eq!(&same.nodes, &base.nodes);
        let t = apply_tightness(&base, alpha).unwrap();
        for (b, n) in base.nodes.iter().zip(&t.nodes).skip(1) {
            let delta = (b.late - b.early) / 2.0 * (1.0 - alpha);
            if b.early + delta >= 0.0 {
                prop_assert!(((n.late - n.early) - alpha * (b.late - b.early)).abs() < 1e-12);
            }
            prop_assert!(n.service >= b.service);
        }
    }

    #[test]
    fn schedules_respect_windows_and_time_order(seed in 0u64..1000, alpha in 0.2..3.0f64) {
        let inst = apply_tightness(&gen_cvrptw_base(15, seed).unwrap(), alpha).unwrap();
        let sol = oracle(&inst).unwrap();
        let s = schedule(&inst, &sol).unwrap();
        prop_assert!(s.feasible);
        let mut last = 0.0;
        for stop in &s.stops {
            if stop.node == 0 {
                last = 0.0;
                continue;
            }
            prop_assert!(stop.service_start >= inst.nodes[stop.node].early);
            prop_assert!(stop.departure >= last);
            last = stop.departure;
        }
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(
        a in 0.1..50.0f64, b in 0.1..50.0f64, fab in 0.0..2.0f64, fba in 0.0..2.0f64,
    ) {
        // each transfer cost within twice the native cost keeps both factors
        // nonnegative, which is where the bound holds
        let (ab, ba) = (b * fab.max(1e-9), a * fba.max(1e-9));
        let tc = TransferCosts { obj_a: a, obj_b: b, obj_b_of_a: ab, obj_a_of_b: ba };
        let s = similarity(&tc).unwrap();
        prop_assert!((s - similarity(&tc.swapped()).unwrap()).abs() < 1e-12);
        prop_assert!(s <= 1.0);
    }

    #[test]
    fn local_search_never_increases_cost(seed in 0u64..500, k in 0usize..4) {
        let kind = ProblemKind::ALL[k];
        let mut spec = GenSpec::new(kind, 20, CapacityMode::Range(10, 100), seed, 1);
        spec.alpha = AlphaMode::Range(0.2, 3.0);
        let inst = gen_instance(&spec, 0).unwrap();
        let start = vrptight_core::baselines::nearest_neighbor(&inst).unwrap();
        let out = two_opt_or_opt(&inst, &start, 50).unwrap();
        prop_assert!(validate(&inst, &out).feasible());
        prop_assert!(solution_cost(&inst, &out).unwrap() <= solution_cost(&inst, &start).unwrap() + 1e-12);
    }
}

#[test]
fn oracle_outputs_are_feasible_on_ten_thousand_instances() {
    let mut checked = 0;
    for (k, kind) in ProblemKind::ALL.into_iter().enumerate() {
        let mut spec = GenSpec::new(kind, 8, CapacityMode::Range(9, 100), 9000 + k as u64, 1);
        spec.alpha = AlphaMode::Range(0.2, 3.0);
        for draw in 0..2500u64 {
            spec.n = 3 + (draw as usize % 10);
            let inst = gen_instance(&spec, draw).unwrap();
            let sol = oracle(&inst).unwrap();
            let rep = validate(&inst, &sol);
            assert!(rep.feasible(), "{kind} draw {draw}: {:?}", rep.violations);
            checked += 1;
        }
    }
    assert!(checked >= 10_000);
}

#[test]
fn oracle_is_deterministic() {
    let spec = GenSpec::new(ProblemKind::Cvrp, 40, CapacityMode::Fixed(50), 1, 1);
    let inst = gen_instance(&spec, 0).unwrap();
    assert_eq!(oracle(&inst).unwrap(), oracle(&inst).unwrap());
}
