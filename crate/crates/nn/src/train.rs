//! Training under varying constraint tightness: supervised imitation of
//! oracle labels and multistart policy gradient, plus held-out gap
//! evaluation and resumable trainer state.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vrptight_core::baselines::{gap, oracle};
use vrptight_core::generator::{gen_batch, gen_dataset, AlphaMode, Assignment, CapacityMode, GenSpec, TW_DEFAULT_CAPACITY};
use vrptight_core::{solution_cost, Exec, Instance, ProblemKind, Solution};

use crate::checkpoint::Checkpoint;
use crate::decode::{label_actions, multistart_openings};
use crate::error::{domain, NnError, Result};
use crate::model::{gate, DecoderKind, ModelConfig, PolicyModel};
use crate::optim::{Adam, Moments};
use crate::tape::{concat_cols, Tape};
use crate::tensor::{ParamId, Tensor};

/// Capacity buckets of the held-out evaluation.
pub const CAPACITY_BUCKETS: [u32; 5] = [10, 50, 100, 200, 500];
/// Time-window tightness buckets of the held-out evaluation.
pub const ALPHA_BUCKETS: [f64; 3] = [0.2, 1.0, 3.0];

const MODEL_KEY: u64 = 0x6d6f_6465_6c00_0001;
const ORDER_KEY: u64 = 0x6f72_6465_7200_0002;
const STEP_KEY: u64 = 0x7374_6570_0000_0003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supervised,
    PolicyGradient,
}

/// Ablation arm: what tightness the model sees in training and whether the
/// multi-expert head is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// One tightness value, single expert.
    FixedC,
    /// Tightness drawn from the range, single expert.
    Vct,
    /// Tightness drawn from the range, gated experts.
    VctMem,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::FixedC, Arm::Vct, Arm::VctMem];

    pub fn name(self) -> &'static str {
        match self {
            Arm::FixedC => "fixed-c",
            Arm::Vct => "vct",
            Arm::VctMem => "vct-mem",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-c" => Ok(Arm::FixedC),
            "vct" => Ok(Arm::Vct),
            "vct-mem" => Ok(Arm::VctMem),
            other => Err(domain(format!("unknown arm `{other}` (expected fixed-c, vct or vct-mem)"))),
        }
    }
}

impl FromStr for Regime {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Regime::Supervised),
            "policy-gradient" | "pg" => Ok(Regime::PolicyGradient),
            other => Err(domain(format!("unknown regime `{other}` (expected supervised or policy-gradient)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    Instance,
    Batch,
}

impl From<AssignmentMode> for Assignment {
    fn from(a: AssignmentMode) -> Self {
        match a {
            AssignmentMode::Instance => Assignment::InstanceLevel,
            AssignmentMode::Batch => Assignment::BatchLevel,
        }
    }
}

mod kind_serde {
    use serde::{Deserialize, Deserializer, Serializer};
    use vrptight_core::ProblemKind;

    pub fn serialize<S: Serializer>(k: &ProblemKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(k.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ProblemKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub regime: Regime,
    pub arm: Arm,
    #[serde(with = "kind_serde")]
    pub kind: ProblemKind,
    pub n: usize,
    /// Model preset name (`desk` or `paper`).
    pub preset: String,
    pub train_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    pub assignment: AssignmentMode,
    /// Capacity of the fixed-C arm (and of every time-window instance).
    pub fixed_capacity: u32,
    pub capacity_range: (u32, u32),
    /// Alpha of the fixed arm under time windows.
    pub fixed_alpha: f64,
    pub alpha_range: (f64, f64),
    /// Rollouts per instance in policy-gradient steps.
    pub pomo_starts: usize,
    /// Teacher-forced decision steps drawn per label (all when `None`).
    pub steps_per_instance: Option<usize>,
    /// Evaluate every this many epochs; 0 disables periodic evaluation.
    pub eval_every: usize,
    pub eval_per_bucket: usize,
    /// Greedy multistart width at evaluation.
    pub eval_starts: usize,
    pub eval_seed: u64,
    pub seed: u64,
}

impl TrainSpec {
    /// Desk-scale defaults: n = 20, 10^4 instances, batch 64, 10 epochs.
    pub fn desk(regime: Regime) -> Self {
        let base = TrainSpec {
            regime,
            arm: Arm::VctMem,
            kind: ProblemKind::Cvrp,
            n: 20,
            preset: "desk".into(),
            train_size: 10_000,
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-4,
            lr_decay: 0.9,
            assignment: AssignmentMode::Instance,
            fixed_capacity: 50,
            capacity_range: (10, 500),
            fixed_alpha: 1.0,
            alpha_range: (0.2, 3.0),
            pomo_starts: 20,
            steps_per_instance: None,
            eval_every: 1,
            eval_per_bucket: 100,
            eval_starts: 1,
            eval_seed: 0x5eed,
            seed: 0,
        };
        match regime {
            Regime::Supervised => base,
            Regime::PolicyGradient => TrainSpec {
                kind: ProblemKind::Cvrptw,
                fixed_capacity: TW_DEFAULT_CAPACITY,
                eval_starts: 20,
                ..base
            },
        }
    }

    /// Full-scale settings: n = 100, 10^6 instances, batch 512, 40 epochs.
    pub fn paper(regime: Regime) -> Self {
        TrainSpec {
            n: 100,
            preset: "paper".into(),
            train_size: 1_000_000,
            epochs: 40,
            batch_size: 512,
            pomo_starts: 100,
            eval_starts: if regime == Regime::PolicyGradient { 100 } else { 1 },
            ..Self::desk(regime)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(domain(format!("decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.train_size == 0 || self.n == 0 {
            return Err(domain("epochs, batch size, training size and n must be positive"));
        }
        if self.regime == Regime::PolicyGradient && self.pomo_starts < 2 {
            return Err(domain("policy gradient needs at least 2 rollouts per instance"));
        }
        if self.steps_per_instance == Some(0) {
            return Err(domain("steps_per_instance must be positive"));
        }
        if self.eval_starts == 0 {
            return Err(domain("eval_starts must be positive"));
        }
        self.gen_spec().validate()?;
        self.model_config()?.validate()
    }

    /// Architecture for this run: the preset for the regime's decoder, with
    /// a single expert unless the arm uses the multi-expert head.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let decoder = match self.regime {
            Regime::Supervised => DecoderKind::Heavy,
            Regime::PolicyGradient => DecoderKind::Pomo,
        };
        let mut c = ModelConfig::preset(&self.preset, decoder)?;
        if self.arm != Arm::VctMem {
            c.experts = 1;
        }
        match self.kind {
            ProblemKind::Cvrp | ProblemKind::Ovrp => {
                c.tightness_min = self.capacity_range.0 as f64;
                c.tightness_max = self.capacity_range.1 as f64;
            }
            ProblemKind::Cvrptw => {
                c.tightness_min = 0.0;
                c.tightness_max = self.alpha_range.1;
            }
            ProblemKind::Tsp => {}
        }
        Ok(c)
    }

    /// Generator for the training instances of this arm.
    pub fn gen_spec(&self) -> GenSpec {
        let tw = self.kind.has_time_windows();
        let capacity = match (self.arm, tw) {
            (Arm::FixedC, _) | (_, true) => CapacityMode::Fixed(self.fixed_capacity),
            _ => CapacityMode::Range(self.capacity_range.0, self.capacity_range.1),
        };
        let alpha = match (self.arm, tw) {
            (_, false) | (Arm::FixedC, true) => AlphaMode::Fixed(self.fixed_alpha),
            _ => AlphaMode::Range(self.alpha_range.0, self.alpha_range.1),
        };
        GenSpec {
            kind: self.kind,
            n: self.n,
            capacity,
            alpha,
            assignment: self.assignment.into(),
            seed: self.seed,
            count: self.train_size,
        }
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.train_size.div_ceil(self.batch_size)
    }
}

/// A training batch drawn under the spec's tightness assignment.
pub fn vct_sample(spec: &GenSpec, batch_size: usize, batch_index: u64) -> Result<Vec<Instance>> {
    Ok(gen_batch(spec, batch_size, batch_index)?)
}

/// An instance with its oracle label as a decision sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub instance: Instance,
    pub actions: Vec<usize>,
    /// Number of non-forced steps along the label.
    pub decisions: usize,
}

/// Rotates a TSP ring to start at city 0; other kinds are returned as is.
fn anchored(inst: &Instance, sol: Solution) -> Solution {
    if inst.kind != ProblemKind::Tsp {
        return sol;
    }
    let mut v = sol.visits;
    if let Some(p) = v.iter().position(|&c| c == 0) {
        v.rotate_left(p);
    }
    Solution::new(v)
}

pub fn label_with(inst: Instance, sol: &Solution) -> Result<Labeled> {
    let sol = anchored(&inst, sol.clone());
    let actions = label_actions(&inst, &sol);
    let decisions = PolicyModel::decision_steps(&inst, &actions)?;
    Ok(Labeled { instance: inst, actions, decisions })
}

/// Labels every instance with the oracle.
pub fn label_all(insts: Vec<Instance>, exec: Exec) -> Result<Vec<Labeled>> {
    let sols = exec.try_map(&insts, |i| oracle(i).map_err(NnError::from))?;
    insts.into_iter().zip(&sols).map(|(i, s)| label_with(i, s)).collect()
}

type GradMap = BTreeMap<ParamId, Tensor>;

fn accumulate(total: &mut GradMap, part: GradMap) {
    for (id, g) in part {
        match total.get_mut(&id) {
            Some(t) => t.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
            None => {
                total.insert(id, g);
            }
        }
    }
}

fn scale_grads(grads: &mut GradMap, s: f64) {
    for g in grads.values_mut() {
        g.data_mut().iter_mut().for_each(|v| *v *= s);
    }
}

fn check_finite(loss: f64, grads: &GradMap, what: &str) -> Result<()> {
    if !loss.is_finite() {
        return Err(NnError::NonFinite(format!("{what}: loss {loss}")));
    }
    if let Some((id, _)) = grads.iter().find(|(_, g)| !g.is_finite()) {
        return Err(NnError::NonFinite(format!("{what}: gradient of parameter {} (loss {loss})", id.0)));
    }
    Ok(())
}

/// Decision steps to teacher-force for each label: all of them, or `k`
/// distinct ones drawn from `rng`, in increasing order.
pub fn pick_steps<R: Rng>(batch: &[&Labeled], k: Option<usize>, rng: &mut R) -> Vec<Option<Vec<usize>>> {
    batch
        .iter()
        .map(|l| match k {
            Some(k) if k < l.decisions => {
                let mut idx = rand::seq::index::sample(rng, l.decisions, k).into_vec();
                idx.sort_unstable();
                Some(idx)
            }
            _ => None,
        })
        .collect()
}

/// Mean teacher-forced cross-entropy over the batch and its gradient.
/// Per-instance tapes run in parallel; gradients are summed in batch
/// order. Labels whose picked steps are all forced contribute nothing.
pub fn supervised_loss(
    model: &PolicyModel,
    batch: &[&Labeled],
    picks: &[Option<Vec<usize>>],
    exec: Exec,
) -> Result<(f64, GradMap)> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let parts = exec.try_map(&idx, |&i| -> Result<Option<(f64, GradMap)>> {
        let l = batch[i];
        let tape = Tape::new();
        let Some(loss) = model.teacher_forced_loss(&tape, &l.instance, &l.actions, picks[i].as_deref())? else {
            return Ok(None);
        };
        let grads = tape.backward(loss)?;
        Ok(Some((loss.item(), grads.params)))
    })?;
    let mut total = GradMap::new();
    let (mut sum, mut count) = (0.0, 0usize);
    for (loss, grads) in parts.into_iter().flatten() {
        sum += loss;
        count += 1;
        accumulate(&mut total, grads);
    }
    if count == 0 {
        return Ok((0.0, total));
    }
    scale_grads(&mut total, 1.0 / count as f64);
    Ok((sum / count as f64, total))
}

/// One supervised update; returns the batch loss.
pub fn supervised_step<R: Rng>(
    model: &mut PolicyModel,
    adam: &mut Adam,
    batch: &[&Labeled],
    steps_per_instance: Option<usize>,
    exec: Exec,
    rng: &mut R,
) -> Result<f64> {
    let picks = pick_steps(batch, steps_per_instance, rng);
    let (loss, grads) = supervised_loss(model, batch, &picks, exec)?;
    check_finite(loss, &grads, "supervised step")?;
    adam.step(&mut model.store, &grads);
    Ok(loss)
}

/// Shared-baseline advantages: each cost minus the mean cost.
pub fn advantages(costs: &[f64]) -> Vec<f64> {
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    costs.iter().map(|c| c - mean).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgStats {
    /// Mean over instances of `sum_r A_r log p_r / k`.
    pub loss: f64,
    pub mean_cost: f64,
}

/// Policy-gradient surrogate and gradient: `k` sampled multistart rollouts
/// per instance with advantage `A = cost - mean cost`; minimising
/// `mean(A * log p)` lowers the expected cost.
pub fn policy_gradient_loss(
    model: &PolicyModel,
    batch: &[Instance],
    k: usize,
    seeds: &[u64],
    exec: Exec,
) -> Result<(PgStats, GradMap)> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let parts = exec.try_map(&idx, |&i| -> Result<(f64, f64, Option<GradMap>)> {
        let inst = &batch[i];
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
        let tape = Tape::new();
        let emb = model.encode(&tape, inst)?;
        let mut costs = Vec::new();
        let mut logps = Vec::new();
        for o in multistart_openings(inst, k) {
            let (sol, logp) = model.sample_on_tape(&tape, emb, inst, Some(o), &mut rng)?;
            costs.push(solution_cost(inst, &sol)?);
            logps.push(logp);
        }
        let adv = advantages(&costs);
        let terms: Vec<_> = logps.iter().zip(&adv).filter_map(|(lp, &a)| lp.map(|lp| lp.scale(a))).collect();
        let mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;
        if terms.is_empty() {
            return Ok((0.0, mean_cost, None));
        }
        let loss = concat_cols(&terms)?.sum().scale(1.0 / costs.len() as f64);
        let grads = tape.backward(loss)?;
        Ok((loss.item(), mean_cost, Some(grads.params)))
    })?;
    let mut total = GradMap::new();
    let (mut loss, mut cost) = (0.0, 0.0);
    for (l, c, g) in parts {
        loss += l;
        cost += c;
        if let Some(g) = g {
            accumulate(&mut total, g);
        }
    }
    let b = batch.len() as f64;
    scale_grads(&mut total, 1.0 / b);
    Ok((PgStats { loss: loss / b, mean_cost: cost / b }, total))
}

pub fn policy_gradient_step<R: Rng>(
    model: &mut PolicyModel,
    adam: &mut Adam,
    batch: &[Instance],
    k: usize,
    exec: Exec,
    rng: &mut R,
) -> Result<PgStats> {
    if k < 2 {
        return Err(domain("policy gradient needs at least 2 rollouts per instance"));
    }
    let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
    let (stats, grads) = policy_gradient_loss(model, batch, k, &seeds, exec)?;
    check_finite(stats.loss, &grads, "policy-gradient step")?;
    adam.step(&mut model.store, &grads);
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalBucket {
    pub label: String,
    pub instances: Vec<Instance>,
    /// Oracle cost per instance.
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketGap {
    pub label: String,
    pub mean_cost: f64,
    pub mean_gap_pct: f64,
    pub instances: usize,
}

/// Held-out instances per tightness bucket with cached oracle costs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub buckets: Vec<EvalBucket>,
}

impl EvalSet {
    /// Capacity buckets for CVRP/OVRP, alpha buckets for CVRPTW, a single
    /// bucket for TSP. Every bucket reuses the same seed, so buckets share
    /// coordinates and demands and differ only in tightness.
    pub fn standard(kind: ProblemKind, n: usize, per_bucket: usize, seed: u64, exec: Exec) -> Result<Self> {
        let mut specs = Vec::new();
        let base = GenSpec::new(kind, n, CapacityMode::Fixed(TW_DEFAULT_CAPACITY), seed, per_bucket);
        match kind {
            ProblemKind::Cvrp | ProblemKind::Ovrp => {
                for c in CAPACITY_BUCKETS {
                    specs.push((format!("C{c}"), GenSpec { capacity: CapacityMode::Fixed(c), ..base.clone() }));
                }
            }
            ProblemKind::Cvrptw => {
                for a in ALPHA_BUCKETS {
                    specs.push((format!("a{a}"), GenSpec { alpha: AlphaMode::Fixed(a), ..base.clone() }));
                }
            }
            ProblemKind::Tsp => specs.push(("all".to_string(), base)),
        }
        let buckets = specs
            .into_iter()
            .map(|(label, spec)| {
                let instances = gen_dataset(&spec)?;
                Self::bucket(label, instances, exec)
            })
            .collect::<Result<_>>()?;
        Ok(EvalSet { buckets })
    }

    pub fn bucket(label: String, instances: Vec<Instance>, exec: Exec) -> Result<EvalBucket> {
        let reference = exec.try_map(&instances, |i| -> Result<f64> { Ok(solution_cost(i, &oracle(i)?)?) })?;
        Ok(EvalBucket { label, instances, reference })
    }

    /// Greedy (or best-of-`starts` multistart) gaps of `model` per bucket.
    pub fn evaluate(&self, model: &PolicyModel, starts: usize, exec: Exec) -> Result<Vec<BucketGap>> {
        self.evaluate_with(exec, |inst| Ok(model.solve(inst, starts)?.cost))
    }

    /// Per-bucket gaps of an arbitrary solver returning a cost per instance.
    pub fn evaluate_with<F>(&self, exec: Exec, solve: F) -> Result<Vec<BucketGap>>
    where
        F: Fn(&Instance) -> Result<f64> + Sync + Send,
    {
        self.evaluate_indexed(exec, |_, _, inst| solve(inst))
    }

    /// Like [`EvalSet::evaluate_with`], but the solver also sees the bucket
    /// and instance indices, e.g. to look up precomputed solutions.
    pub fn evaluate_indexed<F>(&self, exec: Exec, solve: F) -> Result<Vec<BucketGap>>
    where
        F: Fn(usize, usize, &Instance) -> Result<f64> + Sync + Send,
    {
        self.buckets
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let idx: Vec<usize> = (0..b.instances.len()).collect();
                let rows = exec.try_map(&idx, |&i| -> Result<(f64, f64)> {
                    let cost = solve(bi, i, &b.instances[i])?;
                    Ok((cost, gap(cost, b.reference[i])?))
                })?;
                let m = rows.len() as f64;
                Ok(BucketGap {
                    label: b.label.clone(),
                    mean_cost: rows.iter().map(|r| r.0).sum::<f64>() / m,
                    mean_gap_pct: rows.iter().map(|r| r.1).sum::<f64>() / m,
                    instances: rows.len(),
                })
            })
            .collect()
    }
}

/// Arithmetic mean of the bucket gaps.
pub fn average_gap(gaps: &[BucketGap]) -> f64 {
    gaps.iter().map(|g| g.mean_gap_pct).sum::<f64>() / gaps.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Step { epoch: usize, step: usize, loss: f64 },
    EpochEnd { epoch: usize, gaps: Option<Vec<BucketGap>> },
}

/// Header of the metrics log.
pub const METRICS_HEADER: &str = "epoch,step,loss,bucket,gap_pct";

impl Event {
    /// Metrics-log rows: one per step, one per bucket at evaluation.
    pub fn metric_rows(&self) -> Vec<String> {
        match self {
            Event::Step { epoch, step, loss } => vec![format!("{epoch},{step},{loss},,")],
            Event::EpochEnd { epoch, gaps: Some(gaps) } => {
                gaps.iter().map(|g| format!("{epoch},,,{},{}", g.label, g.mean_gap_pct)).collect()
            }
            Event::EpochEnd { gaps: None, .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Progress {
    spec: TrainSpec,
    epoch: usize,
    step_in_epoch: usize,
    global_step: u64,
    routed: Vec<u64>,
}

/// Resumable training state. Batch order depends only on the seed and
/// epoch, and each step's randomness only on the seed and global step, so
/// a trainer restored from a checkpoint continues bit-identically.
pub struct Trainer {
    pub spec: TrainSpec,
    pub model: PolicyModel,
    pub adam: Adam,
    /// Current epoch, 0-based.
    pub epoch: usize,
    /// Next step within the epoch.
    pub step_in_epoch: usize,
    pub global_step: u64,
    /// Instances routed to each expert so far.
    pub routed: Vec<u64>,
    pub exec: Exec,
    data: Vec<Labeled>,
    order: Vec<usize>,
    eval: Option<EvalSet>,
}

impl Trainer {
    pub fn new(spec: TrainSpec, exec: Exec) -> Result<Self> {
        spec.validate()?;
        let model = PolicyModel::new(spec.model_config()?, spec.seed ^ MODEL_KEY)?;
        let routed = vec![0; model.config.experts];
        let adam = Adam::new(spec.learning_rate);
        let mut t = Trainer {
            spec,
            model,
            adam,
            epoch: 0,
            step_in_epoch: 0,
            global_step: 0,
            routed,
            exec,
            data: Vec::new(),
            order: Vec::new(),
            eval: None,
        };
        t.prepare()?;
        Ok(t)
    }

    /// Labels the fixed supervised corpus and sets the epoch's batch order.
    fn prepare(&mut self) -> Result<()> {
        if self.spec.regime == Regime::Supervised {
            let gs = self.spec.gen_spec();
            let bs = self.spec.batch_size;
            let mut insts = Vec::with_capacity(self.spec.train_size);
            for b in 0..self.spec.steps_per_epoch() {
                insts.extend(vct_sample(&gs, bs, b as u64)?);
            }
            insts.truncate(self.spec.train_size);
            self.data = label_all(insts, self.exec)?;
        }
        self.order = self.epoch_order(self.epoch);
        Ok(())
    }

    /// Corpus order for `epoch`. Batch-level assignment keeps the generated
    /// batches intact and shuffles their order.
    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ ORDER_KEY);
        rng.set_stream(epoch as u64);
        let n = self.data.len();
        match self.spec.assignment {
            AssignmentMode::Instance => {
                let mut o: Vec<usize> = (0..n).collect();
                o.shuffle(&mut rng);
                o
            }
            AssignmentMode::Batch => {
                let bs = self.spec.batch_size;
                let mut batches: Vec<usize> = (0..n.div_ceil(bs)).collect();
                batches.shuffle(&mut rng);
                batches.into_iter().flat_map(|b| b * bs..((b + 1) * bs).min(n)).collect()
            }
        }
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.spec.epochs
    }

    pub fn current_lr(&self) -> f64 {
        self.spec.learning_rate * self.spec.lr_decay.powi(self.epoch as i32)
    }

    fn step_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ STEP_KEY);
        rng.set_stream(self.global_step);
        rng
    }

    fn count_routes<'a>(&mut self, insts: impl Iterator<Item = &'a Instance>) -> Result<()> {
        for inst in insts {
            let (i, _) = gate(self.model.tightness(inst), &self.model.config)?;
            self.routed[i] += 1;
        }
        Ok(())
    }

    /// Loss and gradient of the next step without applying it.
    pub fn peek_loss(&self) -> Result<f64> {
        let mut rng = self.step_rng();
        match self.spec.regime {
            Regime::Supervised => {
                let batch = self.supervised_batch();
                let picks = pick_steps(&batch, self.spec.steps_per_instance, &mut rng);
                Ok(supervised_loss(&self.model, &batch, &picks, self.exec)?.0)
            }
            Regime::PolicyGradient => {
                let batch = self.pg_batch()?;
                let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
                Ok(policy_gradient_loss(&self.model, &batch, self.spec.pomo_starts, &seeds, self.exec)?.0.loss)
            }
        }
    }

    fn supervised_batch(&self) -> Vec<&Labeled> {
        let bs = self.spec.batch_size;
        let lo = self.step_in_epoch * bs;
        let hi = (lo + bs).min(self.order.len());
        self.order[lo..hi].iter().map(|&i| &self.data[i]).collect()
    }

    fn pg_batch(&self) -> Result<Vec<Instance>> {
        let mut gs = self.spec.gen_spec();
        gs.count = usize::MAX;
        vct_sample(&gs, self.spec.batch_size, self.global_step)
    }

    /// Runs the next step and advances the counters.
    pub fn step(&mut self) -> Result<Event> {
        if self.finished() {
            return Err(domain("training already finished"));
        }
        self.adam.lr = self.current_lr();
        let mut rng = self.step_rng();
        let where_ = format!("epoch {} step {} (global {})", self.epoch, self.step_in_epoch, self.global_step);
        let loss = match self.spec.regime {
            Regime::Supervised => {
                let batch: Vec<Labeled> = self.supervised_batch().into_iter().cloned().collect();
                let refs: Vec<&Labeled> = batch.iter().collect();
                self.count_routes(batch.iter().map(|l| &l.instance))?;
                let steps = self.spec.steps_per_instance;
                supervised_step(&mut self.model, &mut self.adam, &refs, steps, self.exec, &mut rng)
            }
            Regime::PolicyGradient => {
                let batch = self.pg_batch()?;
                self.count_routes(batch.iter())?;
                let k = self.spec.pomo_starts;
                policy_gradient_step(&mut self.model, &mut self.adam, &batch, k, self.exec, &mut rng).map(|s| s.loss)
            }
        }
        .map_err(|e| match e {
            NnError::NonFinite(msg) => NnError::NonFinite(format!("{msg} at {where_}, lr {}", self.adam.lr)),
            other => other,
        })?;
        let ev = Event::Step { epoch: self.epoch, step: self.step_in_epoch, loss };
        self.global_step += 1;
        self.step_in_epoch += 1;
        if self.step_in_epoch == self.spec.steps_per_epoch() {
            self.step_in_epoch = 0;
            self.epoch += 1;
            self.order = self.epoch_order(self.epoch);
        }
        Ok(ev)
    }

    /// The held-out evaluation set, built on first use.
    pub fn eval_set(&mut self) -> Result<&EvalSet> {
        if self.eval.is_none() {
            let s = &self.spec;
            self.eval = Some(EvalSet::standard(s.kind, s.n, s.eval_per_bucket, s.eval_seed, self.exec)?);
        }
        Ok(self.eval.as_ref().expect("built"))
    }

    pub fn evaluate(&mut self) -> Result<Vec<BucketGap>> {
        let (starts, exec) = (self.spec.eval_starts, self.exec);
        self.eval_set()?;
        let set = self.eval.as_ref().expect("built");
        set.evaluate(&self.model, starts, exec)
    }

    /// Trains to the end, reporting every step and every epoch end (with
    /// gaps when evaluation is due) to `observe`.
    pub fn run<F>(&mut self, mut observe: F) -> Result<()>
    where
        F: FnMut(&Trainer, &Event) -> Result<()>,
    {
        while !self.finished() {
            let ev = self.step()?;
            observe(self, &ev)?;
            if self.step_in_epoch == 0 {
                let epoch = self.epoch - 1;
                let due = self.spec.eval_every > 0 && (self.epoch % self.spec.eval_every == 0 || self.finished());
                let gaps = if due { Some(self.evaluate()?) } else { None };
                observe(self, &Event::EpochEnd { epoch, gaps })?;
            }
        }
        Ok(())
    }

    /// Model weights, optimiser moments and progress counters.
    pub fn checkpoint(&self) -> Checkpoint {
        let progress = Progress {
            spec: self.spec.clone(),
            epoch: self.epoch,
            step_in_epoch: self.step_in_epoch,
            global_step: self.global_step,
            routed: self.routed.clone(),
        };
        let mut steps = serde_json::Map::new();
        let mut extra = Vec::new();
        for (id, m) in self.adam.tracked() {
            let name = self.model.store.name(id);
            steps.insert(name.to_string(), m.t.into());
            extra.push((format!("adam.m/{name}"), Tensor::row_vector(m.m.clone())));
            extra.push((format!("adam.v/{name}"), Tensor::row_vector(m.v.clone())));
        }
        let meta = serde_json::json!({ "trainer": progress, "adam_steps": steps });
        self.model.to_checkpoint(meta, extra)
    }

    pub fn resume(ck: &Checkpoint, exec: Exec) -> Result<Self> {
        let (model, meta) = PolicyModel::from_checkpoint(ck)?;
        let bad = |what: &str| NnError::Checkpoint(format!("trainer state: {what}"));
        let progress: Progress =
            serde_json::from_value(meta["trainer"].clone()).map_err(|e| bad(&e.to_string()))?;
        if progress.spec.model_config()? != model.config {
            return Err(bad("model config does not match the training spec"));
        }
        let mut adam = Adam::new(progress.spec.learning_rate);
        let steps = meta["adam_steps"].as_object().ok_or_else(|| bad("missing optimiser steps"))?;
        for (name, t) in steps {
            let id = model.store.id(name).ok_or_else(|| bad(&format!("unknown parameter {name}")))?;
            let get = |prefix: &str| {
                ck.get(&format!("{prefix}/{name}"))
                    .map(|t| t.data().to_vec())
                    .ok_or_else(|| bad(&format!("missing {prefix} for {name}")))
            };
            let t = t.as_u64().ok_or_else(|| bad("optimiser step is not an integer"))?;
            adam.set_moments(id, Moments { m: get("adam.m")?, v: get("adam.v")?, t });
        }
        let mut tr = Trainer {
            spec: progress.spec,
            model,
            adam,
            epoch: progress.epoch,
            step_in_epoch: progress.step_in_epoch,
            global_step: progress.global_step,
            routed: progress.routed,
            exec,
            data: Vec::new(),
            order: Vec::new(),
            eval: None,
        };
        tr.prepare()?;
        Ok(tr)
    }
}
