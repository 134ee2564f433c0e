use vrptight_core::baselines::oracle;
use vrptight_core::generator::{gen_cvrptw_base, gen_dataset, CapacityMode, GenSpec};
use vrptight_core::similarity::{similarity, transfer_table, TransferCosts};
use vrptight_core::{apply_tightness, Exec, ProblemKind};

fn sim(a: f64, b: f64, b_of_a: f64, a_of_b: f64) -> f64 {
    100.0 * similarity(&TransferCosts { obj_a: a, obj_b: b, obj_b_of_a: b_of_a, obj_a_of_b: a_of_b }).unwrap()
}

#[test]
fn published_percentages_reproduce() {
    let cvrp = [59.77, 15.55, 8.04, 7.87];
    let ovrp = [30.88, 9.84, 7.49, 7.49];
    let ovrp_to_cvrp = [60.67, 17.25, 9.78, 9.74];
    let cvrp_to_ovrp = [31.18, 11.33, 7.76, 7.70];
    let tsp = 7.80;
    let tsp_to_cvrp = [70.47, 17.91, 8.78, 7.98];
    let cvrp_to_tsp = [13.17, 10.68, 7.96, 7.83];
    let want_ovrp = [97.54, 75.58, 75.53, 74.10];
    let want_tsp = [25.58, 53.50, 88.93, 98.22];
    for i in 0..4 {
        let s = sim(cvrp[i], ovrp[i], cvrp_to_ovrp[i], ovrp_to_cvrp[i]);
        assert!((s - want_ovrp[i]).abs() <= 0.1, "OVRP column {i}: {s}");
        let s = sim(cvrp[i], tsp, cvrp_to_tsp[i], tsp_to_cvrp[i]);
        assert!((s - want_tsp[i]).abs() <= 0.1, "TSP column {i}: {s}");
    }

    let cvrp_tw_base = 15.51;
    let cvrptw = [33.77, 24.42, 15.81, 15.55];
    let cvrp_to_cvrptw = [59.69, 38.89, 18.89, 16.08];
    let cvrptw_to_cvrp = [24.42, 21.24, 15.80, 15.55];
    let want_tw = [9.89, 25.69, 79.01, 96.34];
    for i in 0..4 {
        let s = sim(cvrp_tw_base, cvrptw[i], cvrp_to_cvrptw[i], cvrptw_to_cvrp[i]);
        assert!((s - want_tw[i]).abs() <= 0.1, "CVRPTW column {i}: {s}");
    }
}

#[test]
fn same_kind_is_fully_similar() {
    let spec = GenSpec::new(ProblemKind::Cvrp, 12, CapacityMode::Fixed(30), 4, 8);
    let data = gen_dataset(&spec).unwrap();
    let tc = transfer_table(&data, ProblemKind::Cvrp, ProblemKind::Cvrp, oracle, Exec::default()).unwrap();
    assert_eq!(similarity(&tc).unwrap(), 1.0);
}

#[test]
fn looser_windows_are_more_similar() {
    let at = |alpha: f64| {
        let data: Vec<_> = (0..16)
            .map(|s| apply_tightness(&gen_cvrptw_base(20, 500 + s).unwrap(), alpha).unwrap())
            .collect();
        let tc = transfer_table(&data, ProblemKind::Cvrp, ProblemKind::Cvrptw, oracle, Exec::default()).unwrap();
        similarity(&tc).unwrap()
    };
    let (tight, loose) = (at(0.2), at(5.0));
    assert!(loose > tight, "alpha 5: {loose}, alpha 0.2: {tight}");
}

#[test]
fn loose_capacity_favours_tsp_over_ovrp() {
    let spec = GenSpec::new(ProblemKind::Cvrp, 20, CapacityMode::Fixed(500), 9, 16);
    let data = gen_dataset(&spec).unwrap();
    let table = |b| similarity(&transfer_table(&data, ProblemKind::Cvrp, b, oracle, Exec::Seq).unwrap()).unwrap();
    let (tsp, ovrp) = (table(ProblemKind::Tsp), table(ProblemKind::Ovrp));
    assert!(tsp >= ovrp, "TSP {tsp} vs OVRP {ovrp}");
}

#[test]
fn seq_and_par_tables_agree() {
    let spec = GenSpec::new(ProblemKind::Cvrp, 15, CapacityMode::Fixed(40), 11, 12);
    let data = gen_dataset(&spec).unwrap();
    let seq = transfer_table(&data, ProblemKind::Cvrp, ProblemKind::Ovrp, oracle, Exec::Seq).unwrap();
    let par = transfer_table(&data, ProblemKind::Cvrp, ProblemKind::Ovrp, oracle, Exec::default()).unwrap();
    assert_eq!(seq, par);
}
