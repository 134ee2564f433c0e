//! The tightness ablation: fixed-capacity training against varying
//! tightness training, with and without the multi-expert head.

use std::time::Instant;

use vrptight_core::{Exec, ProblemKind};
use vrptight_nn::train::{average_gap, Arm, BucketGap, EvalSet, Regime, TrainSpec, Trainer};

use crate::error::Result;
use crate::results::ResultRow;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub n: usize,
    pub train_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub steps_per_instance: Option<usize>,
    pub fixed_capacity: u32,
    pub eval_per_bucket: usize,
    pub eval_seed: u64,
    pub seeds: Vec<u64>,
    pub preset: String,
}

impl AblationConfig {
    /// Single-core budget: nine runs of about two minutes each.
    pub fn desk() -> Self {
        AblationConfig {
            n: 20,
            train_size: 4000,
            epochs: 4,
            batch_size: 16,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            steps_per_instance: Some(2),
            fixed_capacity: 50,
            eval_per_bucket: 50,
            eval_seed: 0x5eed,
            seeds: vec![0, 1, 2],
            preset: "desk".into(),
        }
    }

    pub fn spec(&self, arm: Arm, seed: u64) -> TrainSpec {
        TrainSpec {
            arm,
            kind: ProblemKind::Cvrp,
            n: self.n,
            preset: self.preset.clone(),
            train_size: self.train_size,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            fixed_capacity: self.fixed_capacity,
            steps_per_instance: self.steps_per_instance,
            eval_every: 0,
            eval_per_bucket: self.eval_per_bucket,
            eval_seed: self.eval_seed,
            seed,
            ..TrainSpec::desk(Regime::Supervised)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmRun {
    pub arm: Arm,
    pub seed: u64,
    pub gaps: Vec<BucketGap>,
    pub wall_ms: u64,
}

impl ArmRun {
    pub fn gap(&self, bucket: &str) -> Option<f64> {
        self.gaps.iter().find(|g| g.label == bucket).map(|g| g.mean_gap_pct)
    }

    pub fn rows(&self, dataset: &str) -> Vec<ResultRow> {
        let method = format!("{}/seed{}", self.arm, self.seed);
        self.gaps.iter().map(|g| ResultRow::from_gap(dataset, &method, g, self.wall_ms)).collect()
    }
}

/// Trains every arm for every seed and evaluates each on one shared
/// held-out set. `observe` sees each run as it finishes.
pub fn run_ablation<F>(cfg: &AblationConfig, exec: Exec, mut observe: F) -> Result<Vec<ArmRun>>
where
    F: FnMut(&ArmRun),
{
    let eval = EvalSet::standard(ProblemKind::Cvrp, cfg.n, cfg.eval_per_bucket, cfg.eval_seed, exec)?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        for arm in Arm::ALL {
            let start = Instant::now();
            let mut t = Trainer::new(cfg.spec(arm, seed), exec)?;
            t.run(|_, _| Ok(()))?;
            let gaps = eval.evaluate(&t.model, 1, exec)?;
            let run = ArmRun { arm, seed, gaps, wall_ms: start.elapsed().as_millis() as u64 };
            observe(&run);
            runs.push(run);
        }
    }
    Ok(runs)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Median over seeds of an arm's statistic.
pub fn arm_median(runs: &[ArmRun], arm: Arm, stat: impl Fn(&ArmRun) -> f64) -> f64 {
    let xs: Vec<f64> = runs.iter().filter(|r| r.arm == arm).map(stat).collect();
    median(&xs)
}

/// The three qualitative claims of the ablation, over seed medians.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationVerdict {
    pub fixed_c10: f64,
    pub fixed_c50: f64,
    pub fixed_c500: f64,
    pub fixed_avg: f64,
    pub vct_avg: f64,
    pub mem_avg: f64,
    /// Out-of-domain gaps at least twice the in-domain gap.
    pub degrades: bool,
    pub vct_beats_fixed: bool,
    pub mem_within_margin: bool,
}

/// Margin granted to the multi-expert arm, in percentage points.
pub const MEM_MARGIN_PP: f64 = 0.5;
/// Required out-of-domain to in-domain gap ratio of the fixed arm.
pub const DEGRADATION_RATIO: f64 = 2.0;

pub fn judge(runs: &[ArmRun], in_domain: &str) -> AblationVerdict {
    let at = |arm, b: &'static str| arm_median(runs, arm, |r| r.gap(b).unwrap_or(f64::NAN));
    let avg = |arm| arm_median(runs, arm, |r| average_gap(&r.gaps));
    let (c10, c500) = (at(Arm::FixedC, "C10"), at(Arm::FixedC, "C500"));
    let c_in = arm_median(runs, Arm::FixedC, |r| r.gap(in_domain).unwrap_or(f64::NAN));
    let (fixed_avg, vct_avg, mem_avg) = (avg(Arm::FixedC), avg(Arm::Vct), avg(Arm::VctMem));
    AblationVerdict {
        fixed_c10: c10,
        fixed_c50: c_in,
        fixed_c500: c500,
        fixed_avg,
        vct_avg,
        mem_avg,
        degrades: c10 >= DEGRADATION_RATIO * c_in && c500 >= DEGRADATION_RATIO * c_in,
        vct_beats_fixed: vct_avg < fixed_avg,
        mem_within_margin: mem_avg <= vct_avg + MEM_MARGIN_PP,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(arm: Arm, seed: u64, gaps: &[f64]) -> ArmRun {
        let labels = ["C10", "C50", "C100", "C200", "C500"];
        let gaps = labels
            .iter()
            .zip(gaps)
            .map(|(l, &g)| BucketGap { label: l.to_string(), mean_cost: 1.0, mean_gap_pct: g, instances: 1 })
            .collect();
        ArmRun { arm, seed, gaps, wall_ms: 0 }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn verdict_from_seed_medians() {
        let runs = vec![
            run(Arm::FixedC, 0, &[10.0, 2.0, 3.0, 4.0, 9.0]),
            run(Arm::FixedC, 1, &[12.0, 3.0, 3.0, 4.0, 8.0]),
            run(Arm::FixedC, 2, &[2.0, 2.5, 3.0, 4.0, 1.0]),
            run(Arm::Vct, 0, &[3.0; 5]),
            run(Arm::VctMem, 0, &[3.4; 5]),
        ];
        let v = judge(&runs, "C50");
        assert_eq!((v.fixed_c10, v.fixed_c50, v.fixed_c500), (10.0, 2.5, 8.0));
        assert!(v.degrades && v.vct_beats_fixed && v.mem_within_margin);
    }
}
