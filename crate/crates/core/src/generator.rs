//! Seeded instance generation with controllable constraint tightness.
//!
//! Randomness comes from ChaCha8 keyed by the dataset seed, with the draw
//! index selecting the stream. Any instance can therefore be addressed by
//! `(seed, draw_index)` alone, independently of every other draw, which
//! keeps parallel generation reproducible. Batch-level tightness draws use
//! a separate key derived from the seed and the batch index as stream.
//!
//! Generated floating-point values are rounded to nine significant digits
//! so that datasets survive the text format bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::io::round_sig9;
use crate::problem::{apply_tightness, Instance, Node, ProblemKind};

/// Depot window closes at this time for generated CVRPTW instances.
pub const TW_HORIZON: f64 = 3.0;
/// Base service time of every generated CVRPTW customer.
pub const TW_SERVICE: f64 = 0.05;
/// Half-width of a base (alpha = 1) customer window.
pub const TW_HALF_WIDTH: f64 = 0.25;
/// Smallest tightness coefficient for which generated CVRPTW instances are
/// guaranteed to admit every singleton route `[0, i, 0]`.
pub const TW_ALPHA_FLOOR: f64 = 0.2;
/// Capacity used by [`gen_cvrptw_base`].
pub const TW_DEFAULT_CAPACITY: u32 = 50;

const BATCH_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapacityMode {
    Fixed(u32),
    /// Integer capacity uniform over `min..=max`.
    Range(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    /// Real alpha uniform over `(min, max]`.
    Range(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    /// Every instance draws its own tightness.
    #[default]
    InstanceLevel,
    /// One tightness draw shared by a whole batch.
    BatchLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub capacity: CapacityMode,
    pub alpha: AlphaMode,
    pub assignment: Assignment,
    pub seed: u64,
    pub count: usize,
}

impl GenSpec {
    pub fn new(kind: ProblemKind, n: usize, capacity: CapacityMode, seed: u64, count: usize) -> Self {
        GenSpec {
            kind,
            n,
            capacity,
            alpha: AlphaMode::Fixed(1.0),
            assignment: Assignment::InstanceLevel,
            seed,
            count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("customer count must be positive"));
        }
        if self.count == 0 {
            return Err(domain("dataset count must be positive"));
        }
        match self.capacity {
            CapacityMode::Fixed(c) if c == 0 => return Err(domain("capacity must be positive")),
            CapacityMode::Range(lo, hi) if lo == 0 || lo > hi => {
                return Err(domain(format!("invalid capacity range [{lo}, {hi}]")))
            }
            _ => {}
        }
        if self.kind.has_depot() {
            let min_cap = match self.capacity {
                CapacityMode::Fixed(c) => c,
                CapacityMode::Range(lo, _) => lo,
            };
            if min_cap < 9 {
                return Err(domain("capacity below the maximum demand 9"));
            }
        }
        match self.alpha {
            AlphaMode::Fixed(a) if !(a > 0.0 && a.is_finite()) => {
                return Err(domain(format!("alpha must be positive, got {a}")))
            }
            AlphaMode::Range(lo, hi) if !(lo >= 0.0 && hi > 0.0 && lo <= hi && hi.is_finite()) => {
                return Err(domain(format!("invalid alpha range [{lo}, {hi}]")))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Tightness parameters of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tightness {
    pub capacity: u32,
    pub alpha: f64,
}

fn instance_rng(seed: u64, draw_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng
}

fn draw_tightness(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Tightness {
    let capacity = match spec.capacity {
        CapacityMode::Fixed(c) => c,
        CapacityMode::Range(lo, hi) => rng.gen_range(lo..=hi),
    };
    let alpha = match spec.alpha {
        AlphaMode::Fixed(a) => a,
        // hi - u (hi - lo) with u in [0, 1) lands in (lo, hi], never zero
        AlphaMode::Range(lo, hi) => round_sig9(hi - rng.gen::<f64>() * (hi - lo)),
    };
    Tightness { capacity, alpha }
}

fn coord(rng: &mut ChaCha8Rng) -> f64 {
    round_sig9(rng.gen::<f64>())
}

/// Draws instance `draw_index` of the dataset described by `spec`.
pub fn gen_instance(spec: &GenSpec, draw_index: u64) -> Result<Instance> {
    spec.validate()?;
    build(spec, draw_index, None)
}

/// Draws a training batch. Instance `j` of batch `b` is draw
/// `b * batch_size + j`; under batch-level assignment all instances share
/// one tightness draw.
pub fn gen_batch(spec: &GenSpec, batch_size: usize, batch_index: u64) -> Result<Vec<Instance>> {
    spec.validate()?;
    let shared = match spec.assignment {
        Assignment::InstanceLevel => None,
        Assignment::BatchLevel => {
            let mut rng = instance_rng(spec.seed ^ BATCH_KEY, batch_index);
            Some(draw_tightness(spec, &mut rng))
        }
    };
    let base = batch_index * batch_size as u64;
    (0..batch_size as u64).map(|j| build(spec, base + j, shared)).collect()
}

/// Generates the whole dataset (`spec.count` instances, draws `0..count`).
pub fn gen_dataset(spec: &GenSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    (0..spec.count as u64).map(|i| build(spec, i, None)).collect()
}

fn build(spec: &GenSpec, draw_index: u64, shared: Option<Tightness>) -> Result<Instance> {
    let mut rng = instance_rng(spec.seed, draw_index);
    let own = draw_tightness(spec, &mut rng);
    let t = shared.unwrap_or(own);
    let n = spec.n;
    match spec.kind {
        ProblemKind::Tsp => {
            let nodes = (0..=n)
                .map(|i| {
                    let x = coord(&mut rng);
                    let y = coord(&mut rng);
                    Node::plain(i, x, y, 0)
                })
                .collect();
            Instance::new(ProblemKind::Tsp, nodes, 0)
        }
        ProblemKind::Cvrp | ProblemKind::Ovrp => {
            let mut nodes = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let x = coord(&mut rng);
                let y = coord(&mut rng);
                nodes.push(Node::plain(i, x, y, 0));
            }
            for node in nodes.iter_mut().skip(1) {
                node.demand = rng.gen_range(1..=9);
            }
            Instance::new(spec.kind, nodes, t.capacity)
        }
        ProblemKind::Cvrptw => {
            let mut base = cvrptw_base_from(&mut rng, n)?;
            base.capacity = t.capacity;
            let mut inst = apply_tightness(&base, t.alpha)?;
            for node in inst.nodes.iter_mut() {
                node.early = round_sig9(node.early);
                node.late = round_sig9(node.late);
                node.service = round_sig9(node.service);
            }
            inst.check()?;
            Ok(inst)
        }
    }
}

/// Base (alpha = 1) CVRPTW instance with capacity
/// [`TW_DEFAULT_CAPACITY`].
///
/// The depot sits at the centre of the square with window
/// `[0, TW_HORIZON]`. Each customer gets service [`TW_SERVICE`] and a window
/// of half-width [`TW_HALF_WIDTH`] around a centre drawn uniformly from
/// `[t_0i, TW_HORIZON - TW_SERVICE / TW_ALPHA_FLOOR - t_i0]`, clipped to the
/// horizon. The singleton route `[0, i, 0]` stays feasible for every
/// alpha >= [`TW_ALPHA_FLOOR`].
pub fn gen_cvrptw_base(n: usize, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(domain("customer count must be positive"));
    }
    let mut rng = instance_rng(seed, 0);
    cvrptw_base_from(&mut rng, n)
}

fn cvrptw_base_from(rng: &mut ChaCha8Rng, n: usize) -> Result<Instance> {
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(Node { index: 0, x: 0.5, y: 0.5, demand: 0, early: 0.0, late: TW_HORIZON, service: 0.0 });
    for i in 1..=n {
        let x = coord(rng);
        let y = coord(rng);
        let demand = rng.gen_range(1..=9);
        let t = (x - 0.5).hypot(y - 0.5);
        let hi = TW_HORIZON - TW_SERVICE / TW_ALPHA_FLOOR - t;
        let centre = t + rng.gen::<f64>() * (hi - t);
        let early = round_sig9((centre - TW_HALF_WIDTH).max(0.0));
        let late = round_sig9((centre + TW_HALF_WIDTH).min(TW_HORIZON));
        nodes.push(Node { index: i, x, y, demand, early, late, service: TW_SERVICE });
    }
    Instance::new(ProblemKind::Cvrptw, nodes, TW_DEFAULT_CAPACITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{route_time_feasible, schedule, Solution};

    fn cvrp_spec(capacity: CapacityMode, count: usize) -> GenSpec {
        GenSpec::new(ProblemKind::Cvrp, 100, capacity, 7, count)
    }

    #[test]
    fn fixed_capacity_instances() {
        let spec = cvrp_spec(CapacityMode::Fixed(50), 20);
        for inst in gen_dataset(&spec).unwrap() {
            assert_eq!(inst.capacity, 50);
            assert_eq!(inst.n_customers(), 100);
            assert_eq!(inst.nodes[0].demand, 0);
            assert!(inst.nodes[1..].iter().all(|n| (1..=9).contains(&n.demand)));
            assert!(inst.nodes.iter().all(|n| (0.0..=1.0).contains(&n.x) && (0.0..=1.0).contains(&n.y)));
        }
    }

    #[test]
    fn same_draw_is_bit_identical() {
        let mut spec = cvrp_spec(CapacityMode::Range(10, 500), 1);
        spec.kind = ProblemKind::Cvrptw;
        spec.alpha = AlphaMode::Range(0.2, 3.0);
        let a = gen_instance(&spec, 42).unwrap();
        let b = gen_instance(&spec, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_instance(&spec, 43).unwrap());
    }

    #[test]
    fn capacity_range_mean() {
        let mut spec = cvrp_spec(CapacityMode::Range(10, 500), 10_000);
        spec.n = 2;
        let caps: Vec<f64> = (0..10_000).map(|i| gen_instance(&spec, i).unwrap().capacity as f64).collect();
        let mean = caps.iter().sum::<f64>() / caps.len() as f64;
        // discrete uniform mean 255, sd 141.7 -> standard error 1.42
        assert!((mean - 255.0).abs() < 5.0, "mean {mean}");
    }

    #[test]
    fn batch_level_shares_tightness() {
        let mut spec = cvrp_spec(CapacityMode::Range(10, 500), 1);
        spec.assignment = Assignment::BatchLevel;
        let batch = gen_batch(&spec, 8, 3).unwrap();
        assert!(batch.windows(2).all(|w| w[0].capacity == w[1].capacity));

        spec.assignment = Assignment::InstanceLevel;
        spec.n = 5;
        let batch = gen_batch(&spec, 512, 0).unwrap();
        let mut caps: Vec<u32> = batch.iter().map(|i| i.capacity).collect();
        caps.sort_unstable();
        caps.dedup();
        assert!(caps.len() >= 2);
    }

    #[test]
    fn fixed_capacity_modes_coincide() {
        let mut spec = cvrp_spec(CapacityMode::Fixed(50), 1);
        spec.n = 10;
        let a = gen_batch(&spec, 4, 1).unwrap();
        spec.assignment = Assignment::BatchLevel;
        let b = gen_batch(&spec, 4, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cvrptw_base_windows() {
        for seed in 0..50 {
            let inst = gen_cvrptw_base(30, seed).unwrap();
            let d = &inst.nodes[0];
            assert_eq!((d.early, d.late, d.service), (0.0, 3.0, 0.0));
            for c in 1..=30 {
                let node = &inst.nodes[c];
                assert!(node.late - node.early <= 0.5 + 1e-8);
                assert!(route_time_feasible(&inst, &[c]));
                let s = schedule(&inst, &Solution::new(vec![0, c, 0])).unwrap();
                assert!(s.feasible);
            }
        }
    }

    #[test]
    fn singletons_survive_tightening_down_to_the_floor() {
        let mut spec = GenSpec::new(ProblemKind::Cvrptw, 40, CapacityMode::Fixed(50), 11, 1);
        for alpha in [TW_ALPHA_FLOOR, 0.5, 1.0, 3.0, 5.0] {
            spec.alpha = AlphaMode::Fixed(alpha);
            for i in 0..20 {
                let inst = gen_instance(&spec, i).unwrap();
                assert_eq!(inst.alpha, alpha);
                for c in 1..=40 {
                    assert!(route_time_feasible(&inst, &[c]), "alpha {alpha} customer {c}");
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_instance(&cvrp_spec(CapacityMode::Range(50, 10), 1), 0).is_err());
        assert!(gen_instance(&cvrp_spec(CapacityMode::Fixed(0), 1), 0).is_err());
        let mut spec = cvrp_spec(CapacityMode::Fixed(50), 1);
        spec.alpha = AlphaMode::Fixed(0.0);
        assert!(spec.validate().is_err());
        spec.alpha = AlphaMode::Range(2.0, 1.0);
        assert!(spec.validate().is_err());
        spec.alpha = AlphaMode::Range(0.0, 3.0);
        assert!(spec.validate().is_ok());
    }
}
