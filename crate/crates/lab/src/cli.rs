//! Subcommands of the `vrptight` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vrptight_core::baselines::{oracle, Method};
use vrptight_core::generator::{gen_batch, gen_dataset, AlphaMode, Assignment, CapacityMode, GenSpec, TW_DEFAULT_CAPACITY};
use vrptight_core::io::{dataset_to_string, parse_dataset, parse_solutions, solutions_to_string};
use vrptight_core::similarity::{similarity, transfer_table};
use vrptight_core::transforms::transfer;
use vrptight_core::{solution_cost, validate, Exec, Instance, ProblemKind, Solution};
use vrptight_nn::checkpoint::Checkpoint;
use vrptight_nn::train::{
    AssignmentMode, EvalBucket, EvalSet, Event, Regime, TrainSpec, Trainer, METRICS_HEADER,
};
use vrptight_nn::{Arm, PolicyModel};

use crate::error::{LabError, Result};
use crate::experiments::{judge, run_ablation, AblationConfig};
use crate::results::{gap_table, read_rows, write_rows, ResultRow};

#[derive(Debug, Parser)]
#[command(name = "vrptight", version, about = "Routing under varying constraint tightness")]
pub struct Cli {
    /// Run every per-instance loop on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset file.
    Gen(GenArgs),
    /// Solve a dataset with a baseline or a checkpointed model.
    Solve(SolveArgs),
    /// Convert a solution file between problem kinds.
    Transform(TransformArgs),
    /// Cross-transfer similarity table.
    Similarity(SimilarityArgs),
    /// Train a policy.
    Train(TrainArgs),
    /// Per-bucket optimality gaps against the oracle.
    Eval(EvalArgs),
    /// Aggregate results CSVs into a method-by-bucket gap table.
    Gapstats(GapstatsArgs),
    /// Fixed-capacity vs varying-tightness ablation.
    Ablation(AblationArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Tsp,
    Cvrp,
    Ovrp,
    Cvrptw,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Tsp => ProblemKind::Tsp,
            KindArg::Cvrp => ProblemKind::Cvrp,
            KindArg::Ovrp => ProblemKind::Ovrp,
            KindArg::Cvrptw => ProblemKind::Cvrptw,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AssignmentArg {
    Instance,
    Batch,
}

impl From<AssignmentArg> for AssignmentMode {
    fn from(a: AssignmentArg) -> Self {
        match a {
            AssignmentArg::Instance => AssignmentMode::Instance,
            AssignmentArg::Batch => AssignmentMode::Batch,
        }
    }
}

/// `lo,hi` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair<T>(pub T, pub T);

impl<T: FromStr> FromStr for Pair<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
        let p = |x: &str| x.trim().parse::<T>().map_err(|_| format!("bad number `{x}`"));
        Ok(Pair(p(a)?, p(b)?))
    }
}

#[derive(Debug, Args)]
pub struct TightnessArgs {
    #[arg(long, conflicts_with = "capacity_range")]
    pub capacity: Option<u32>,
    /// Uniform integer capacity range `lo,hi`.
    #[arg(long)]
    pub capacity_range: Option<Pair<u32>>,
    #[arg(long, conflicts_with = "alpha_range")]
    pub alpha: Option<f64>,
    /// Uniform time-window tightness range `lo,hi`.
    #[arg(long)]
    pub alpha_range: Option<Pair<f64>>,
    #[arg(long, value_enum, default_value = "instance")]
    pub assignment: AssignmentArg,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "cvrp")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[command(flatten)]
    pub tightness: TightnessArgs,
    /// Instances per tightness draw under batch assignment.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// nn, cw, oracle or model.
    #[arg(long, default_value = "oracle")]
    pub method: String,
    /// Model weights for `--method model`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Multistart width for model decoding.
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub solutions: PathBuf,
    /// cvrp-to-tsp, tsp-to-cvrp, cvrp-to-ovrp, ovrp-to-cvrp, cvrp-to-cvrptw
    /// or cvrptw-to-cvrp.
    #[arg(long)]
    pub transform: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairArg {
    CvrpTsp,
    CvrpOvrp,
    CvrpCvrptw,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long, value_enum, default_value = "cvrp-tsp")]
    pub pair: PairArg,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    /// Capacities to tabulate (the pair's tightness axis unless it has
    /// time windows).
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,200,500")]
    pub capacities: Vec<u32>,
    /// Tightness coefficients for the time-window pair.
    #[arg(long, value_delimiter = ',', default_value = "0.2,1,3,5")]
    pub alphas: Vec<f64>,
    /// Capacity of the time-window pair.
    #[arg(long, default_value_t = TW_DEFAULT_CAPACITY)]
    pub capacity: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "supervised")]
    pub regime: String,
    /// fixed-c, vct or vct-mem.
    #[arg(long, default_value = "vct-mem")]
    pub arm: String,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[command(flatten)]
    pub tightness: TightnessArgs,
    /// Rollouts per instance in policy-gradient training.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Teacher-forced decision steps per label.
    #[arg(long)]
    pub steps_per_instance: Option<usize>,
    #[arg(long)]
    pub eval_per_bucket: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from a trainer checkpoint; all other spec flags are ignored.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Output directory for metrics.csv and checkpoints.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset to evaluate; buckets are formed by tightness. Without it a
    /// standard held-out set is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Costs come from this solution file instead of a solver.
    #[arg(long, requires = "data")]
    pub solutions: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value = "cvrp")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Instances per bucket of the generated set.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset column of the results CSV.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GapstatsArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub results: Vec<PathBuf>,
    /// Bucket the methods were trained on; adds the expansion column.
    #[arg(long)]
    pub in_domain: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub eval_per_bucket: Option<usize>,
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::Other(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| LabError::Other(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<PolicyModel> {
    Ok(PolicyModel::from_checkpoint(&Checkpoint::load(path)?)?.0)
}

/// A per-instance solver built from the command-line choice.
enum Solver {
    Classic(Method),
    Model(Box<PolicyModel>, usize),
}

impl Solver {
    fn from_args(a: &SolverArgs) -> Result<Self> {
        if a.method == "model" {
            let path = a.checkpoint.as_ref().ok_or_else(|| LabError::Usage("--method model needs --checkpoint".into()))?;
            if a.starts == 0 {
                return Err(LabError::Usage("--starts must be positive".into()));
            }
            return Ok(Solver::Model(Box::new(load_model(path)?), a.starts));
        }
        Ok(Solver::Classic(a.method.parse()?))
    }

    fn name(&self) -> String {
        match self {
            Solver::Classic(m) => m.name().to_string(),
            Solver::Model(_, 1) => "model".to_string(),
            Solver::Model(_, k) => format!("model-x{k}"),
        }
    }

    fn solve(&self, inst: &Instance) -> Result<Solution> {
        match self {
            Solver::Classic(m) => Ok(m.solve(inst)?),
            Solver::Model(m, k) => Ok(m.solve(inst, *k)?.solution),
        }
    }
}

fn capacity_mode(t: &TightnessArgs, kind: ProblemKind) -> CapacityMode {
    match (t.capacity, t.capacity_range) {
        (Some(c), _) => CapacityMode::Fixed(c),
        (None, Some(Pair(lo, hi))) => CapacityMode::Range(lo, hi),
        (None, None) if kind.has_time_windows() => CapacityMode::Fixed(TW_DEFAULT_CAPACITY),
        (None, None) => CapacityMode::Fixed(50),
    }
}

fn alpha_mode(t: &TightnessArgs) -> AlphaMode {
    match (t.alpha, t.alpha_range) {
        (Some(a), _) => AlphaMode::Fixed(a),
        (None, Some(Pair(lo, hi))) => AlphaMode::Range(lo, hi),
        (None, None) => AlphaMode::Fixed(1.0),
    }
}

pub fn gen_spec(a: &GenArgs) -> GenSpec {
    let kind = a.kind.into();
    GenSpec {
        kind,
        n: a.n,
        capacity: capacity_mode(&a.tightness, kind),
        alpha: alpha_mode(&a.tightness),
        assignment: match a.tightness.assignment {
            AssignmentArg::Instance => Assignment::InstanceLevel,
            AssignmentArg::Batch => Assignment::BatchLevel,
        },
        seed: a.seed,
        count: a.count,
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = gen_spec(a);
    let insts = match spec.assignment {
        Assignment::InstanceLevel => gen_dataset(&spec)?,
        Assignment::BatchLevel => {
            if a.batch_size == 0 {
                return Err(LabError::Usage("--batch-size must be positive".into()));
            }
            let mut v = Vec::with_capacity(a.count);
            for b in 0..a.count.div_ceil(a.batch_size) {
                v.extend(gen_batch(&spec, a.batch_size, b as u64)?);
            }
            v.truncate(a.count);
            v
        }
    };
    write(&a.out, &dataset_to_string(&insts))
}

fn ensure_feasible(insts: &[Instance], sols: &[Solution], what: &str) -> Result<()> {
    if insts.len() != sols.len() {
        return Err(LabError::Format(format!("{} solutions for {} instances", sols.len(), insts.len())));
    }
    for (i, (inst, sol)) in insts.iter().zip(sols).enumerate() {
        let report = validate(inst, sol);
        if !report.feasible() {
            return Err(LabError::Infeasible(format!("{what} {i}: {:?}", report)));
        }
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs, exec: Exec) -> Result<()> {
    let insts = parse_dataset(&read(&a.data)?)?;
    let solver = Solver::from_args(&a.solver)?;
    let sols = exec.try_map(&insts, |i| solver.solve(i))?;
    ensure_feasible(&insts, &sols, "solution")?;
    let total: f64 = insts.iter().zip(&sols).map(|(i, s)| solution_cost(i, s)).sum::<std::result::Result<f64, _>>()?;
    println!("{} instances, mean cost {:.6}", insts.len(), total / insts.len() as f64);
    write(&a.out, &solutions_to_string(&sols))
}

pub fn parse_transform(name: &str) -> Result<(ProblemKind, ProblemKind)> {
    let (from, to) = name
        .split_once("-to-")
        .ok_or_else(|| LabError::Usage(format!("transform `{name}` is not of the form <from>-to-<to>")))?;
    let from: ProblemKind = from.parse()?;
    let to: ProblemKind = to.parse()?;
    use ProblemKind::*;
    match (from, to) {
        (Cvrp, Tsp) | (Tsp, Cvrp) | (Cvrp, Ovrp) | (Ovrp, Cvrp) | (Cvrp, Cvrptw) | (Cvrptw, Cvrp) => Ok((from, to)),
        _ => Err(LabError::Usage(format!("no transform `{name}`"))),
    }
}

fn view(inst: &Instance, kind: ProblemKind) -> Result<Instance> {
    if kind.has_time_windows() && !inst.kind.has_time_windows() {
        return Err(LabError::Usage("time-window transforms need a CVRPTW dataset".into()));
    }
    Ok(inst.with_kind(kind))
}

fn cmd_transform(a: &TransformArgs) -> Result<()> {
    let (from, to) = parse_transform(&a.transform)?;
    let insts = parse_dataset(&read(&a.data)?)?;
    let sols = parse_solutions(&read(&a.solutions)?)?;
    let src: Vec<Instance> = insts.iter().map(|i| view(i, from)).collect::<Result<_>>()?;
    ensure_feasible(&src, &sols, "input solution")?;
    let mut out = Vec::with_capacity(sols.len());
    for (inst, sol) in insts.iter().zip(&sols) {
        out.push(transfer(&view(inst, to)?, from, sol)?);
    }
    let dst: Vec<Instance> = insts.iter().map(|i| view(i, to)).collect::<Result<_>>()?;
    ensure_feasible(&dst, &out, "transformed solution")?;
    write(&a.out, &solutions_to_string(&out))
}

fn cmd_similarity(a: &SimilarityArgs, exec: Exec) -> Result<()> {
    let (kind_b, axis): (ProblemKind, Vec<f64>) = match a.pair {
        PairArg::CvrpTsp => (ProblemKind::Tsp, a.capacities.iter().map(|&c| c as f64).collect()),
        PairArg::CvrpOvrp => (ProblemKind::Ovrp, a.capacities.iter().map(|&c| c as f64).collect()),
        PairArg::CvrpCvrptw => (ProblemKind::Cvrptw, a.alphas.clone()),
    };
    let mut out = String::from("pair,tightness,obj_a,obj_b,obj_b_of_a,obj_a_of_b,similarity_pct\n");
    for t in axis {
        let spec = match a.pair {
            PairArg::CvrpCvrptw => GenSpec {
                alpha: AlphaMode::Fixed(t),
                ..GenSpec::new(ProblemKind::Cvrptw, a.n, CapacityMode::Fixed(a.capacity), a.seed, a.count)
            },
            _ => GenSpec::new(ProblemKind::Cvrp, a.n, CapacityMode::Fixed(t as u32), a.seed, a.count),
        };
        let data = gen_dataset(&spec)?;
        let tc = transfer_table(&data, ProblemKind::Cvrp, kind_b, oracle, exec)?;
        let s = similarity(&tc)?;
        out.push_str(&format!(
            "CVRP-{kind_b},{t},{},{},{},{},{:.4}\n",
            tc.obj_a,
            tc.obj_b,
            tc.obj_b_of_a,
            tc.obj_a_of_b,
            100.0 * s
        ));
    }
    write(&a.out, &out)
}

pub fn train_spec(a: &TrainArgs) -> Result<TrainSpec> {
    let regime: Regime = a.regime.parse()?;
    let arm: Arm = a.arm.parse()?;
    let mut s = match a.preset.as_str() {
        "desk" => TrainSpec::desk(regime),
        "paper" => TrainSpec::paper(regime),
        other => return Err(LabError::Usage(format!("unknown preset `{other}`"))),
    };
    s.arm = arm;
    if let Some(k) = a.kind {
        s.kind = k.into();
    }
    macro_rules! set {
        ($($field:ident <- $flag:expr),* $(,)?) => { $( if let Some(v) = $flag { s.$field = v; } )* };
    }
    set!(n <- a.n, train_size <- a.train_size, epochs <- a.epochs, batch_size <- a.batch_size,
         learning_rate <- a.lr, lr_decay <- a.decay, pomo_starts <- a.starts,
         eval_per_bucket <- a.eval_per_bucket, eval_every <- a.eval_every,
         fixed_capacity <- a.tightness.capacity, fixed_alpha <- a.tightness.alpha);
    if let Some(Pair(lo, hi)) = a.tightness.capacity_range {
        s.capacity_range = (lo, hi);
    }
    if let Some(Pair(lo, hi)) = a.tightness.alpha_range {
        s.alpha_range = (lo, hi);
    }
    if a.steps_per_instance.is_some() {
        s.steps_per_instance = a.steps_per_instance;
    }
    s.assignment = a.tightness.assignment.into();
    s.seed = a.seed;
    s.validate()?;
    Ok(s)
}

fn cmd_train(a: &TrainArgs, exec: Exec) -> Result<()> {
    let mut trainer = match &a.resume {
        Some(p) => Trainer::resume(&Checkpoint::load(p)?, exec)?,
        None => Trainer::new(train_spec(a)?, exec)?,
    };
    fs::create_dir_all(&a.out)?;
    let metrics_path = a.out.join("metrics.csv");
    let mut log = if a.resume.is_some() && metrics_path.exists() { read(&metrics_path)? } else { format!("{METRICS_HEADER}\n") };
    let out = a.out.clone();
    trainer.run(|t, ev| {
        for row in ev.metric_rows() {
            log.push_str(&row);
            log.push('\n');
        }
        if let Event::EpochEnd { epoch, gaps } = ev {
            let ck = t.checkpoint();
            ck.save(&out.join(format!("epoch{epoch}.ckpt")))?;
            ck.save(&out.join("last.ckpt"))?;
            write(&metrics_path, &log).map_err(|e| vrptight_nn::NnError::Domain(e.to_string()))?;
            let summary: Vec<String> =
                gaps.iter().flatten().map(|g| format!("{} {:.2}%", g.label, g.mean_gap_pct)).collect();
            eprintln!("epoch {epoch} done; {}", summary.join(", "));
        }
        Ok(())
    })?;
    write(&metrics_path, &log)
}

/// Label of the tightness bucket an instance belongs to.
pub fn bucket_label(inst: &Instance) -> String {
    match inst.kind {
        ProblemKind::Cvrp | ProblemKind::Ovrp => format!("C{}", inst.capacity),
        ProblemKind::Cvrptw => format!("a{}", inst.alpha),
        ProblemKind::Tsp => "all".to_string(),
    }
}

fn dataset_buckets(insts: Vec<Instance>, exec: Exec) -> Result<(Vec<EvalBucket>, Vec<Vec<usize>>)> {
    let mut labels: Vec<String> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, inst) in insts.iter().enumerate() {
        let l = bucket_label(inst);
        match labels.iter().position(|x| *x == l) {
            Some(p) => members[p].push(i),
            None => {
                labels.push(l);
                members.push(vec![i]);
            }
        }
    }
    let buckets = labels
        .into_iter()
        .zip(&members)
        .map(|(l, m)| EvalSet::bucket(l, m.iter().map(|&i| insts[i].clone()).collect(), exec))
        .collect::<std::result::Result<_, _>>()?;
    Ok((buckets, members))
}

fn cmd_eval(a: &EvalArgs, exec: Exec) -> Result<()> {
    let start = Instant::now();
    let (set, members, name) = match &a.data {
        Some(p) => {
            let insts = parse_dataset(&read(p)?)?;
            let (buckets, members) = dataset_buckets(insts, exec)?;
            let stem = p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
            (EvalSet { buckets }, Some(members), stem)
        }
        None => {
            let kind: ProblemKind = a.kind.into();
            let set = EvalSet::standard(kind, a.n, a.count, a.seed, exec)?;
            (set, None, format!("{}{}", kind.name().to_lowercase(), a.n))
        }
    };
    let name = a.name.clone().unwrap_or(name);
    let (method, gaps) = match (&a.solutions, &members) {
        (Some(sp), Some(members)) => {
            let sols = parse_solutions(&read(sp)?)?;
            let total: usize = members.iter().map(Vec::len).sum();
            if sols.len() != total {
                return Err(LabError::Format(format!("{} solutions for {total} instances", sols.len())));
            }
            for (b, m) in set.buckets.iter().zip(members) {
                let mine: Vec<Solution> = m.iter().map(|&i| sols[i].clone()).collect();
                ensure_feasible(&b.instances, &mine, "solution")?;
            }
            let gaps = set.evaluate_indexed(exec, |bi, i, inst| Ok(solution_cost(inst, &sols[members[bi][i]])?))?;
            let label = sp.file_stem().map_or("solutions".into(), |s| s.to_string_lossy().into_owned());
            (label, gaps)
        }
        _ => {
            let solver = Solver::from_args(&a.solver)?;
            let gaps = set.evaluate_with(exec, |inst| {
                let sol = solver.solve(inst).map_err(|e| vrptight_nn::NnError::Domain(e.to_string()))?;
                Ok(solution_cost(inst, &sol)?)
            })?;
            (solver.name(), gaps)
        }
    };
    let wall = start.elapsed().as_millis() as u64;
    let rows: Vec<ResultRow> = gaps.iter().map(|g| ResultRow::from_gap(&name, &method, g, wall)).collect();
    for r in &rows {
        println!("{} {}: {:.4}%", r.method, r.bucket, r.mean_gap_pct);
    }
    write_rows(&a.out, &rows)
}

fn cmd_gapstats(a: &GapstatsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.results {
        rows.extend(read_rows(p)?);
    }
    let table = gap_table(&rows, a.in_domain.as_deref())?;
    let text = table.to_csv();
    match &a.out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_ablation(a: &AblationArgs, exec: Exec) -> Result<()> {
    let mut cfg = AblationConfig { seeds: a.seeds.clone(), preset: a.preset.clone(), ..AblationConfig::desk() };
    if let Some(v) = a.train_size {
        cfg.train_size = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.eval_per_bucket {
        cfg.eval_per_bucket = v;
    }
    let dataset = format!("cvrp{}", cfg.n);
    let runs = run_ablation(&cfg, exec, |r| eprintln!("{} seed {}: {} ms", r.arm, r.seed, r.wall_ms))?;
    let rows: Vec<ResultRow> = runs.iter().flat_map(|r| r.rows(&dataset)).collect();
    write_rows(&a.out, &rows)?;
    let v = judge(&runs, &format!("C{}", cfg.fixed_capacity));
    println!("{v:#?}");
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Seq } else { Exec::default() };
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a, exec),
        Command::Transform(a) => cmd_transform(a),
        Command::Similarity(a) => cmd_similarity(a, exec),
        Command::Train(a) => cmd_train(a, exec),
        Command::Eval(a) => cmd_eval(a, exec),
        Command::Gapstats(a) => cmd_gapstats(a),
        Command::Ablation(a) => cmd_ablation(a, exec),
    }
}
