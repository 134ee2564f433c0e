//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the output; the target fails if any
//! asserted criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrptight_core::baselines::oracle;
use vrptight_core::generator::{gen_cvrptw_base, gen_dataset, gen_instance, AlphaMode, CapacityMode, GenSpec};
use vrptight_core::problem::route_cost_as;
use vrptight_core::similarity::{similarity, TransferCosts};
use vrptight_core::transforms::{
    cvrp_to_cvrptw, cvrp_to_ovrp, cvrp_to_tsp, cvrptw_to_cvrp, ovrp_to_cvrp, tsp_to_cvrp,
};
use vrptight_core::{apply_tightness, solution_cost, validate, Exec, Instance, Node, ProblemKind, Solution};
use vrptight_lab::experiments::{judge, run_ablation, AblationConfig, DEGRADATION_RATIO, MEM_MARGIN_PP};
use vrptight_nn::decode::{argmax, sample_index};
use vrptight_nn::gradcheck::{grad_check, GRAD_CHECK_EPS};
use vrptight_nn::model::{mem_forward, pomo_expert_forward};
use vrptight_nn::train::{supervised_step, Labeled};
use vrptight_nn::*;

const SIMILARITY_TOL_PP: f64 = 0.1;
const TRANSFORM_CASES: u64 = 1000;
const ORACLE_CVRP_TOL: f64 = 0.02;
const ORACLE_CVRP_SHARE: f64 = 0.95;
const ORACLE_TSP_TOL: f64 = 0.03;
const GRAD_TOL: f64 = 1e-4;
const ROW_SUM_TOL: f64 = 1e-12;
const TIGHTNESS_TOL: f64 = 1e-12;

fn report(id: u32, name: &str, pass: bool, detail: &str, start: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{name}]: {verdict} ({detail}; {:.1}s)", start.elapsed().as_secs_f64());
}

fn criterion_1_similarity_reproduction() -> bool {
    let start = Instant::now();
    let sim = |a: f64, b: f64, b_of_a: f64, a_of_b: f64| {
        100.0 * similarity(&TransferCosts { obj_a: a, obj_b: b, obj_b_of_a: b_of_a, obj_a_of_b: a_of_b }).unwrap()
    };
    // (obj_a, obj_b, obj_b_of_a, obj_a_of_b, published percentage)
    let cvrp = [59.77, 15.55, 8.04, 7.87];
    let mut cases = Vec::new();
    let ovrp = [30.88, 9.84, 7.49, 7.49];
    let ovrp_to_cvrp = [60.67, 17.25, 9.78, 9.74];
    let cvrp_to_ovrp = [31.18, 11.33, 7.76, 7.70];
    for (i, want) in [97.5, 75.6, 75.5, 74.1].into_iter().enumerate() {
        cases.push((cvrp[i], ovrp[i], cvrp_to_ovrp[i], ovrp_to_cvrp[i], want));
    }
    let tsp_to_cvrp = [70.47, 17.91, 8.78, 7.98];
    let cvrp_to_tsp = [13.17, 10.68, 7.96, 7.83];
    for (i, want) in [25.5, 53.5, 88.9, 98.2].into_iter().enumerate() {
        cases.push((cvrp[i], 7.80, cvrp_to_tsp[i], tsp_to_cvrp[i], want));
    }
    let cvrptw = [33.77, 24.42, 15.81, 15.55];
    let cvrp_to_cvrptw = [59.69, 38.89, 18.89, 16.08];
    let cvrptw_to_cvrp = [24.42, 21.24, 15.80, 15.55];
    for (i, want) in [9.9, 25.7, 79.0, 96.3].into_iter().enumerate() {
        cases.push((15.51, cvrptw[i], cvrp_to_cvrptw[i], cvrptw_to_cvrp[i], want));
    }
    let worst = cases
        .iter()
        .map(|&(a, b, ba, ab, want)| (sim(a, b, ba, ab) - want).abs())
        .fold(0.0, f64::max);
    let pass = worst <= SIMILARITY_TOL_PP && start.elapsed().as_secs_f64() < 1.0;
    report(1, "similarity reproduction", pass, &format!("{} values, worst deviation {worst:.3} pp", cases.len()), start);
    pass
}

fn random_cvrp_solution(inst: &Instance, rng: &mut ChaCha8Rng) -> Solution {
    let mut order: Vec<usize> = (1..=inst.n_customers()).collect();
    order.shuffle(rng);
    let mut routes: Vec<Vec<usize>> = vec![vec![]];
    let mut load = 0u64;
    for c in order {
        let d = inst.nodes[c].demand as u64;
        if !routes.last().unwrap().is_empty() && (load + d > inst.capacity as u64 || rng.gen_bool(0.15)) {
            routes.push(vec![]);
            load = 0;
        }
        routes.last_mut().unwrap().push(c);
        load += d;
    }
    Solution::from_routes(ProblemKind::Cvrp, &routes)
}

fn customers(sol: &Solution) -> Vec<usize> {
    let mut v: Vec<usize> = sol.visits.iter().copied().filter(|&c| c != 0).collect();
    v.sort_unstable();
    v
}

fn criterion_2_transform_soundness() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str, case: u64| {
        if !ok && failures.len() < 5 {
            failures.push(format!("{what} case {case}"));
        }
    };
    for case in 0..TRANSFORM_CASES {
        let n = rng.gen_range(1..30);
        let spec = GenSpec::new(ProblemKind::Cvrp, n, CapacityMode::Range(9, 100), 7_000 + case, 1);
        let cvrp = gen_instance(&spec, 0).unwrap();
        let sol = random_cvrp_solution(&cvrp, &mut rng);
        let cost = solution_cost(&cvrp, &sol).unwrap();

        let tsp = cvrp.with_kind(ProblemKind::Tsp);
        let ring = cvrp_to_tsp(&tsp, &sol).unwrap();
        check(validate(&tsp, &ring).feasible() && customers(&ring) == customers(&sol), "cvrp_to_tsp", case);
        let back = tsp_to_cvrp(&cvrp, &ring).unwrap();
        check(validate(&cvrp, &back).feasible() && customers(&back) == customers(&sol), "tsp_to_cvrp", case);

        let ovrp = cvrp.with_kind(ProblemKind::Ovrp);
        let open = cvrp_to_ovrp(&ovrp, &sol).unwrap();
        let open_ok = validate(&ovrp, &open).feasible()
            && customers(&open) == customers(&sol)
            && solution_cost(&ovrp, &open).unwrap() <= cost + 1e-12;
        check(open_ok, "cvrp_to_ovrp", case);
        let closed = ovrp_to_cvrp(&cvrp, &open).unwrap();
        check(validate(&cvrp, &closed).feasible() && customers(&closed) == customers(&sol), "ovrp_to_cvrp", case);

        let alpha = rng.gen_range(0.2..=3.0);
        let tw = apply_tightness(&gen_cvrptw_base(n, 9_000 + case).unwrap(), alpha).unwrap();
        let flat = tw.with_kind(ProblemKind::Cvrp);
        let sol = random_cvrp_solution(&flat, &mut rng);
        let split = cvrp_to_cvrptw(&tw, &sol).unwrap();
        check(validate(&tw, &split).feasible() && customers(&split) == customers(&sol), "cvrp_to_cvrptw", case);
        let merged = cvrptw_to_cvrp(&flat, &split).unwrap();
        let merged_ok = validate(&flat, &merged).feasible()
            && customers(&merged) == customers(&sol)
            && solution_cost(&flat, &merged).unwrap() <= solution_cost(&flat, &split).unwrap() + 1e-12;
        check(merged_ok, "cvrptw_to_cvrp", case);
    }
    let pass = failures.is_empty() && start.elapsed().as_secs_f64() < 120.0;
    let detail = format!("{TRANSFORM_CASES} fuzzed inputs per transform pair, failures: {failures:?}");
    report(2, "transform soundness", pass, &detail, start);
    pass
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Exact CVRP optimum: every customer order, best capacity-feasible split.
fn brute_force(inst: &Instance) -> f64 {
    let mut perm: Vec<usize> = (1..=inst.n_customers()).collect();
    let mut best = f64::INFINITY;
    permutations(&mut perm, 0, &mut |order| {
        let n = order.len();
        let mut f = vec![f64::INFINITY; n + 1];
        f[0] = 0.0;
        for i in 0..n {
            for j in i + 1..=n {
                let route = &order[i..j];
                if inst.route_demand(route) > inst.capacity as u64 {
                    break;
                }
                f[j] = f[j].min(f[i] + route_cost_as(inst, ProblemKind::Cvrp, route));
            }
        }
        best = best.min(f[n]);
    });
    best
}

fn held_karp(inst: &Instance) -> f64 {
    let m = inst.nodes.len() - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = inst.dist(0, j + 1);
    }
    for set in 1..full {
        for j in (0..m).filter(|&j| set & (1 << j) != 0) {
            let cur = dp[set * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in (0..m).filter(|&k| set & (1 << k) == 0) {
                let next = (set | (1 << k)) * m + k;
                dp[next] = dp[next].min(cur + inst.dist(j + 1, k + 1));
            }
        }
    }
    (0..m).map(|j| dp[(full - 1) * m + j] + inst.dist(j + 1, 0)).fold(f64::INFINITY, f64::min)
}

fn criterion_3_small_instance_oracle_equivalence() -> bool {
    let start = Instant::now();
    let mut cvrp = Vec::new();
    for (i, n) in (3..=8).enumerate() {
        // 200 instances in total, a third of them at the largest size
        let count = if n == 8 { 70 } else { 26 };
        let spec = GenSpec::new(ProblemKind::Cvrp, n, CapacityMode::Range(9, 40), 300 + i as u64, count);
        cvrp.extend(gen_dataset(&spec).unwrap());
    }
    let rows = Exec::Par.map(&cvrp, |inst| (brute_force(inst), solution_cost(inst, &oracle(inst).unwrap()).unwrap()));
    let below = rows.iter().filter(|(exact, ours)| *ours < exact - 1e-9).count();
    let close = rows.iter().filter(|(exact, ours)| *ours <= exact * (1.0 + ORACLE_CVRP_TOL)).count();
    let share = close as f64 / rows.len() as f64;

    let mut tsp_worst = 0.0f64;
    for n in 4..=11 {
        // n customers plus node 0: TSP rings of up to 12 cities
        for inst in gen_dataset(&GenSpec::new(ProblemKind::Tsp, n, CapacityMode::Fixed(1), 50 + n as u64, 10)).unwrap() {
            let exact = held_karp(&inst);
            let ours = solution_cost(&inst, &oracle(&inst).unwrap()).unwrap();
            tsp_worst = tsp_worst.max(ours / exact - 1.0);
        }
    }
    let pass = below == 0
        && share >= ORACLE_CVRP_SHARE
        && tsp_worst <= ORACLE_TSP_TOL
        && start.elapsed().as_secs_f64() < 300.0;
    let detail = format!(
        "CVRP {close}/{} within 2% of enumeration; TSP worst excess over Held-Karp {:.3}%",
        rows.len(),
        100.0 * tsp_worst
    );
    report(3, "oracle equivalence", pass, &detail, start);
    pass
}

fn toy(decoder: DecoderKind) -> ModelConfig {
    let base = match decoder {
        DecoderKind::Heavy => ModelConfig::desk(),
        DecoderKind::Pomo => ModelConfig::pomo_desk(),
    };
    ModelConfig { embed_dim: 8, ff_dim: 16, heads: 2, encoder_layers: 1, decoder_layers: 1, experts: 2, expert_depth: 1, ..base }
}

fn cvrp(n: usize, capacity: u32, seed: u64) -> Instance {
    gen_instance(&GenSpec::new(ProblemKind::Cvrp, n, CapacityMode::Fixed(capacity), seed, 1), 0).unwrap()
}

fn criterion_4_gradient_fidelity() -> bool {
    let start = Instant::now();
    let model = PolicyModel::new(toy(DecoderKind::Heavy), 5).unwrap();
    let ids: Vec<ParamId> = model.store.ids().collect();
    let mut worst = 0.0f64;
    // capacity 30 routes to the first expert, 450 to the second
    for cap in [30, 450] {
        let inst = cvrp(5, cap, 9);
        let mut st = DecoderState::new(&inst, 0);
        let (c, a) = st.candidates(&inst);
        let first = (0..c.len()).rev().find(|&i| a[i] && c[i] != 0).unwrap();
        st.apply(&inst, c[first]).unwrap();
        let err = grad_check(&model.store, &ids, GRAD_CHECK_EPS, |tape, s| {
            let mut m = model.clone();
            m.store = s.clone();
            let emb = m.encode(tape, &inst)?;
            let out = m.decode_step(tape, emb, &inst, &st)?;
            let target = (0..out.candidates.len()).rev().find(|&i| out.allowed[i]).unwrap();
            out.probs.cross_entropy(target)
        })
        .unwrap();
        worst = worst.max(err);
    }
    let pomo = PolicyModel::new(toy(DecoderKind::Pomo), 8).unwrap();
    let ex = pomo.pomo_experts()[1].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hc = Tensor::uniform(1, 2 * 8 + 3, 1.0, &mut rng);
    let ht = Tensor::uniform(6, 8, 1.0, &mut rng);
    let allowed = [true, false, true, true, false, true];
    let pomo_err = grad_check(&pomo.store, &pomo.expert_param_ids(1), GRAD_CHECK_EPS, |t, s| {
        let p = pomo_expert_forward(t, s, &ex, 2, t.constant(hc.clone()), t.leaf(ht.clone()), 10.0, &allowed)?;
        p.cross_entropy(3)
    })
    .unwrap();
    let pass = worst <= GRAD_TOL && pomo_err <= GRAD_TOL && start.elapsed().as_secs_f64() < 60.0;
    let detail = format!("decode step max rel. error {worst:.2e}, POMO expert {pomo_err:.2e}");
    report(4, "gradient fidelity", pass, &detail, start);
    pass
}

fn criterion_5_routing_isolation() -> bool {
    let start = Instant::now();
    let config = ModelConfig { experts: 3, ..toy(DecoderKind::Heavy) };
    let model = PolicyModel::new(config, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = Tensor::uniform(5, 8, 1.0, &mut rng);
    let allowed = [true, true, false, true];
    let run = |m: &PolicyModel, c_k: f64| {
        let tape = Tape::new();
        let p = mem_forward(&tape, &m.store, m.experts(), &m.config, tape.leaf(h.clone()), c_k, &allowed).unwrap();
        let g = tape.backward(p.cross_entropy(1).unwrap()).unwrap();
        let v = p.value().clone();
        (v, g.params)
    };
    let mut forward_ok = true;
    for (c_k, selected) in [(12.0, 0), (260.0, 1), (500.0, 2)] {
        let (p0, g0) = run(&model, c_k);
        let mut perturbed = model.clone();
        for other in (0..3).filter(|&i| i != selected) {
            for id in perturbed.expert_param_ids(other) {
                perturbed.store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = *v * 1.7 + 0.3);
            }
        }
        let (p1, g1) = run(&perturbed, c_k);
        forward_ok &= p0.data() == p1.data()
            && g0.len() == g1.len()
            && g0.iter().all(|(id, g)| g1.get(id).is_some_and(|x| x.data() == g.data()));
    }

    let mut model = PolicyModel::new(ModelConfig { embed_dim: 16, ff_dim: 32, experts: 3, ..toy(DecoderKind::Heavy) }, 2).unwrap();
    let mut adam = Adam::new(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let label = |caps: &[u32]| {
        let insts: Vec<Instance> = caps.iter().enumerate().map(|(i, &c)| cvrp(6, c, 60 + i as u64)).collect();
        train::label_all(insts, Exec::Par).unwrap()
    };
    let mixed = label(&[20, 250, 480]);
    supervised_step(&mut model, &mut adam, &mixed.iter().collect::<Vec<&Labeled>>(), None, Exec::Par, &mut rng).unwrap();
    let before = model.clone();
    let bucket0 = label(&[30, 40, 60, 90]);
    supervised_step(&mut model, &mut adam, &bucket0.iter().collect::<Vec<&Labeled>>(), None, Exec::Par, &mut rng).unwrap();
    let others_frozen = (1..3).all(|e| model.expert_param_ids(e).iter().all(|&id| model.store.get(id) == before.store.get(id)));
    let own_moved = model.expert_param_ids(0).iter().any(|&id| model.store.get(id) != before.store.get(id));

    let pass = forward_ok && others_frozen && own_moved;
    let detail = format!(
        "outputs and gradients bit-identical: {forward_ok}; other experts frozen by a single-bucket update: {others_frozen}"
    );
    report(5, "routing isolation", pass, &detail, start);
    pass
}

fn criterion_6_masking_and_feasibility() -> bool {
    let start = Instant::now();
    let heavy = PolicyModel::new(ModelConfig { embed_dim: 16, ff_dim: 32, ..ModelConfig::desk() }, 1).unwrap();
    let pomo = PolicyModel::new(ModelConfig { embed_dim: 16, ff_dim: 32, ..ModelConfig::pomo_desk() }, 2).unwrap();
    let mut cases: Vec<(Instance, &PolicyModel)> = Vec::new();
    for cap in [10, 50, 500] {
        let spec = GenSpec::new(ProblemKind::Cvrp, 10, CapacityMode::Fixed(cap), 17, 56);
        cases.extend(gen_dataset(&spec).unwrap().into_iter().map(|i| (i, &heavy)));
        for alpha in [0.2, 1.0, 3.0] {
            let spec = GenSpec {
                alpha: AlphaMode::Fixed(alpha),
                ..GenSpec::new(ProblemKind::Cvrptw, 10, CapacityMode::Fixed(cap), 23, 37)
            };
            cases.extend(gen_dataset(&spec).unwrap().into_iter().map(|i| (i, &pomo)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut rollouts, mut infeasible, mut leaked, mut worst_sum) = (0, 0, 0, 0.0f64);
    for (inst, model) in &cases {
        for sample in [false, true] {
            let emb = model.embed(inst).unwrap();
            let mut st = DecoderState::new(inst, 0);
            while !st.done() {
                let tape = Tape::inference();
                let out = model.decode_step(&tape, tape.constant(emb.clone()), inst, &st).unwrap();
                let p = out.probs.value().data().to_vec();
                worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
                leaked += out.allowed.iter().zip(&p).filter(|(ok, &x)| !**ok && x != 0.0).count();
                let i = if sample { sample_index(&p, &mut rng) } else { argmax(&p) };
                st.apply(inst, out.candidates[i]).unwrap();
            }
            if !validate(inst, &st.into_solution(inst)).feasible() {
                infeasible += 1;
            }
            rollouts += 1;
        }
    }
    let pass = rollouts >= 1000 && infeasible == 0 && leaked == 0 && worst_sum <= ROW_SUM_TOL;
    let detail = format!(
        "{rollouts} rollouts, {infeasible} infeasible, {leaked} masked entries with mass, worst row-sum error {worst_sum:.1e}"
    );
    report(6, "masking and feasibility", pass, &detail, start);
    pass
}

fn criterion_7_tightness_ablation() -> bool {
    let start = Instant::now();
    let cfg = AblationConfig::desk();
    let runs = run_ablation(&cfg, Exec::Par, |r| {
        let gaps: Vec<String> = r.gaps.iter().map(|g| format!("{}={:.2}", g.label, g.mean_gap_pct)).collect();
        println!("  ablation {} seed {}: {} ({} ms)", r.arm, r.seed, gaps.join(" "), r.wall_ms);
    })
    .unwrap();
    assert_eq!(runs.len(), 3 * cfg.seeds.len());
    assert!(runs.iter().all(|r| r.gaps.iter().all(|g| g.mean_gap_pct.is_finite())));
    let v = judge(&runs, &format!("C{}", cfg.fixed_capacity));
    let mark = |b: bool| if b { "pass" } else { "fail" };
    let detail = format!(
        "(a) {}: fixed-C gaps C10 {:.2}%, C50 {:.2}%, C500 {:.2}%, need >= {DEGRADATION_RATIO}x; \
         (b) {}: avg VCT {:.2}% vs fixed {:.2}%; (c) {}: VCT+MEM {:.2}% <= VCT + {MEM_MARGIN_PP} pp",
        mark(v.degrades),
        v.fixed_c10,
        v.fixed_c50,
        v.fixed_c500,
        mark(v.vct_beats_fixed),
        v.vct_avg,
        v.fixed_avg,
        mark(v.mem_within_margin),
        v.mem_avg,
    );
    let in_budget = start.elapsed().as_secs_f64() < 45.0 * 60.0;
    let pass = v.degrades && v.vct_beats_fixed && v.mem_within_margin && in_budget;
    report(7, "tightness ablation", pass, &detail, start);
    pass
}

fn tw_node(index: usize, early: f64, late: f64, service: f64) -> Node {
    Node { index, x: 0.5, y: 0.5 + 0.1 * index as f64, demand: index as u32, early, late, service }
}

fn criterion_8_time_window_tightening() -> bool {
    let start = Instant::now();
    let nodes = vec![tw_node(0, 0.0, 20.0, 0.0), tw_node(1, 2.0, 6.0, 0.2), tw_node(2, 0.5, 1.5, 1.0)];
    let base = Instance::new(ProblemKind::Cvrptw, nodes, 10).unwrap();
    // (alpha, node, early, late, service), evaluated by hand
    let expected = [
        (1.0, 1, 2.0, 6.0, 0.2),
        (0.5, 1, 3.0, 5.0, 0.4),
        (3.0, 1, 0.0, 10.0, 0.2),
        (1.0, 2, 0.5, 1.5, 1.0),
        (0.5, 2, 0.75, 1.25, 2.0),
        (3.0, 2, 0.0, 2.5, 1.0),
    ];
    let mut bad = Vec::new();
    for &(alpha, i, e, l, s) in &expected {
        let t = apply_tightness(&base, alpha).unwrap();
        let n = &t.nodes[i];
        let ok = (n.early - e).abs() <= TIGHTNESS_TOL && (n.late - l).abs() <= TIGHTNESS_TOL && (n.service - s).abs() <= TIGHTNESS_TOL;
        if !ok || t.nodes[0] != base.nodes[0] {
            bad.push(format!("alpha {alpha} node {i}: ({}, {}, {})", n.early, n.late, n.service));
        }
    }
    let rejects = apply_tightness(&base, 0.0).is_err() && apply_tightness(&base, -1.0).is_err();
    let pass = bad.is_empty() && rejects;
    report(8, "time-window tightening", pass, &format!("{} hand-computed windows, mismatches {bad:?}", expected.len()), start);
    pass
}

fn vrptight(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_vrptight")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Results CSV without the wall-clock column.
fn without_timing(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_9_determinism() -> bool {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let d = d.path();
        vrptight(&["gen", "--n", "10", "--count", "12", "--capacity-range", "10,500", "--seed", "4", "--out", "data.txt"], d);
        vrptight(
            &[
                "train", "--n", "8", "--train-size", "32", "--batch-size", "8", "--epochs", "2", "--eval-per-bucket", "4",
                "--steps-per-instance", "2", "--seed", "4", "--out", "run",
            ],
            d,
        );
        vrptight(&["eval", "--data", "data.txt", "--method", "model", "--checkpoint", "run/last.ckpt", "--out", "res.csv"], d);
    }
    let same = |name: &str| {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        a == b
    };
    let files = ["data.txt", "run/metrics.csv", "run/last.ckpt", "run/epoch0.ckpt"];
    let mut differing: Vec<&str> = files.iter().copied().filter(|f| !same(f)).collect();
    if without_timing(&dirs[0].path().join("res.csv")) != without_timing(&dirs[1].path().join("res.csv")) {
        differing.push("res.csv");
    }
    let pass = differing.is_empty();
    report(9, "determinism", pass, &format!("gen, train and eval run twice; differing outputs {differing:?}"), start);
    pass
}

fn main() {
    // optional criterion numbers select a subset; libtest flags are ignored
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    // criterion 7 is an empirical finding at desk scale: reported, not
    // asserted
    let criteria: [(u32, fn() -> bool, bool); 9] = [
        (1, criterion_1_similarity_reproduction, true),
        (2, criterion_2_transform_soundness, true),
        (3, criterion_3_small_instance_oracle_equivalence, true),
        (4, criterion_4_gradient_fidelity, true),
        (5, criterion_5_routing_isolation, true),
        (6, criterion_6_masking_and_feasibility, true),
        (7, criterion_7_tightness_ablation, false),
        (8, criterion_8_time_window_tightening, true),
        (9, criterion_9_determinism, true),
    ];
    let mut failed = Vec::new();
    for (id, run, asserted) in criteria {
        if !only.is_empty() && !only.iter().any(|o| *o == id.to_string()) {
            continue;
        }
        if !run() && asserted {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("asserted criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
