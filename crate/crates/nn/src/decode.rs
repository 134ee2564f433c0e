//! Step-by-step solution construction: decoder state, feasibility masks
//! and rollouts.

use rand::Rng;
use vrptight_core::problem::TIME_EPS;
use vrptight_core::{solution_cost, Instance, ProblemKind, Solution};

use crate::error::{NnError, Result};
use crate::model::{PolicyModel, CONTEXT_SCALARS};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    /// True exactly on visited customers (all cities for TSP).
    pub visited: Vec<bool>,
    pub current: usize,
    /// First customer of the current sub-tour (start city for TSP).
    pub route_first: Option<usize>,
    pub remaining: u32,
    pub time: f64,
    pub left: usize,
    pub visits: Vec<usize>,
}

impl DecoderState {
    /// Empty state: at the depot, or at `start` for TSP.
    pub fn new(inst: &Instance, tsp_start: usize) -> Self {
        let n = inst.nodes.len();
        let mut st = DecoderState {
            visited: vec![false; n],
            current: 0,
            route_first: None,
            remaining: inst.capacity,
            time: inst.nodes[0].early,
            left: inst.n_customers(),
            visits: vec![0],
        };
        if inst.kind == ProblemKind::Tsp {
            st.visited[tsp_start] = true;
            st.current = tsp_start;
            st.route_first = Some(tsp_start);
            st.visits = vec![tsp_start];
            st.left = n - 1;
        }
        st
    }

    pub fn done(&self) -> bool {
        self.left == 0
    }

    /// Candidate nodes (the depot first for depot problems, then unvisited
    /// nodes in index order) and which of them are currently feasible.
    pub fn candidates(&self, inst: &Instance) -> (Vec<usize>, Vec<bool>) {
        let mut cands = Vec::with_capacity(self.left + 1);
        let mut allowed = Vec::with_capacity(self.left + 1);
        let depot_kind = inst.kind.has_depot();
        if depot_kind {
            cands.push(0);
            allowed.push(self.current != 0);
        }
        let first = usize::from(depot_kind);
        for j in first..inst.nodes.len() {
            if !self.visited[j] {
                cands.push(j);
                allowed.push(self.feasible(inst, j));
            }
        }
        (cands, allowed)
    }

    fn feasible(&self, inst: &Instance, j: usize) -> bool {
        if !inst.kind.has_depot() {
            return true;
        }
        let node = &inst.nodes[j];
        if node.demand > self.remaining {
            return false;
        }
        if inst.kind.has_time_windows() {
            let arrival = self.time + inst.dist(self.current, j);
            if arrival > node.late + TIME_EPS {
                return false;
            }
            let back = arrival.max(node.early) + node.service + inst.dist(j, 0);
            if back > inst.nodes[0].late + TIME_EPS {
                return false;
            }
        }
        true
    }

    /// Moves to `j`; errors if `j` is not a feasible candidate.
    pub fn apply(&mut self, inst: &Instance, j: usize) -> Result<()> {
        let ok = if j == 0 && inst.kind.has_depot() {
            self.current != 0
        } else {
            j < self.visited.len() && !self.visited[j] && self.feasible(inst, j)
        };
        if !ok {
            return Err(NnError::Mask(format!("move to node {j} is masked")));
        }
        if j == 0 && inst.kind.has_depot() {
            self.current = 0;
            self.route_first = None;
            self.remaining = inst.capacity;
            self.time = inst.nodes[0].early;
        } else {
            let node = &inst.nodes[j];
            self.time = (self.time + inst.dist(self.current, j)).max(node.early) + node.service;
            self.visited[j] = true;
            self.remaining = self.remaining.saturating_sub(node.demand);
            self.current = j;
            self.route_first.get_or_insert(j);
            self.left -= 1;
        }
        self.visits.push(j);
        Ok(())
    }

    /// Remaining load / C, the tightness feature and elapsed time / l0.
    pub fn context_scalars(&self, inst: &Instance, tightness: f64) -> [f64; CONTEXT_SCALARS] {
        let load = if inst.kind.has_depot() && inst.capacity > 0 {
            self.remaining as f64 / inst.capacity as f64
        } else {
            0.0
        };
        let time = if inst.kind.has_time_windows() { self.time / inst.nodes[0].late } else { 0.0 };
        [load, tightness, time]
    }

    /// The finished solution; TSP rings are rotated to start at node 0.
    pub fn into_solution(self, inst: &Instance) -> Solution {
        let mut v = self.visits;
        match inst.kind {
            ProblemKind::Tsp => {
                let p = v.iter().position(|&c| c == 0).unwrap_or(0);
                v.rotate_left(p);
            }
            k if k.closed_routes() => v.push(0),
            _ => {}
        }
        Solution::new(v)
    }
}

/// The decision sequence that reproduces `sol` from [`DecoderState::new`]:
/// every visit after the start, minus the final depot return of closed
/// problems. TSP rings must start at city 0.
pub fn label_actions(inst: &Instance, sol: &Solution) -> Vec<usize> {
    let v = &sol.visits;
    let end = if inst.kind.closed_routes() && v.last() == Some(&0) { v.len() - 1 } else { v.len() };
    v[1..end].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Greedy,
    Sample,
    /// `k` greedy rollouts, each forced to open with a different customer
    /// (or to start at a different city for TSP).
    PomoMultistart(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutput {
    pub solution: Solution,
    pub cost: f64,
    /// Sum of the log-probabilities of the chosen moves.
    pub log_prob: f64,
    pub step_log_probs: Vec<f64>,
}

/// Index of the largest probability; ties go to the first.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw; never returns a zero-probability entry.
pub fn sample_index<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Forced opening moves of a multistart rollout.
pub fn multistart_openings(inst: &Instance, k: usize) -> Vec<usize> {
    match inst.kind {
        ProblemKind::Tsp => (0..k.min(inst.nodes.len())).collect(),
        _ => (1..=k.min(inst.n_customers())).collect(),
    }
}

impl PolicyModel {
    /// Runs one construction with a fresh inference tape per step, so
    /// memory stays bounded by a single step. Steps with a single feasible
    /// move skip the network.
    fn construct<R: Rng>(&self, inst: &Instance, emb: &Tensor, opening: Option<usize>, sample: bool, rng: &mut R) -> Result<RolloutOutput> {
        let tsp_start = if inst.kind == ProblemKind::Tsp { opening.unwrap_or(0) } else { 0 };
        let mut st = DecoderState::new(inst, tsp_start);
        if let Some(c) = opening.filter(|_| inst.kind.has_depot()) {
            st.apply(inst, c)?;
        }
        let mut step_log_probs = Vec::new();
        while !st.done() {
            let (cands, allowed) = st.candidates(inst);
            let open: Vec<usize> = (0..cands.len()).filter(|&i| allowed[i]).collect();
            let choice = match open.as_slice() {
                [] => return Err(NnError::DeadEnd(format!("no feasible move from node {}", st.current))),
                [only] => {
                    step_log_probs.push(0.0);
                    cands[*only]
                }
                _ => {
                    let tape = Tape::inference();
                    let e = tape.constant(emb.clone());
                    let out = self.decode_step(&tape, e, inst, &st)?;
                    let p = out.probs.value();
                    let i = if sample { sample_index(p.data(), rng) } else { argmax(p.data()) };
                    step_log_probs.push(p.data()[i].ln());
                    out.candidates[i]
                }
            };
            st.apply(inst, choice)?;
        }
        let solution = st.into_solution(inst);
        let cost = solution_cost(inst, &solution)?;
        let log_prob = step_log_probs.iter().sum();
        Ok(RolloutOutput { solution, cost, log_prob, step_log_probs })
    }

    /// Node embeddings as a plain tensor.
    pub fn embed(&self, inst: &Instance) -> Result<Tensor> {
        let tape = Tape::inference();
        let e = self.encode(&tape, inst)?;
        let out = e.value().clone();
        Ok(out)
    }

    pub fn rollout<R: Rng>(&self, inst: &Instance, mode: RolloutMode, rng: &mut R) -> Result<Vec<RolloutOutput>> {
        let emb = self.embed(inst)?;
        match mode {
            RolloutMode::Greedy => Ok(vec![self.construct(inst, &emb, None, false, rng)?]),
            RolloutMode::Sample => Ok(vec![self.construct(inst, &emb, None, true, rng)?]),
            RolloutMode::PomoMultistart(k) => multistart_openings(inst, k)
                .into_iter()
                .map(|o| self.construct(inst, &emb, Some(o), false, rng))
                .collect(),
        }
    }

    /// Greedy solution (best of the multistart rollouts when `starts > 1`).
    pub fn solve(&self, inst: &Instance, starts: usize) -> Result<RolloutOutput> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mode = if starts > 1 { RolloutMode::PomoMultistart(starts) } else { RolloutMode::Greedy };
        let outs = self.rollout(inst, mode, &mut rng)?;
        Ok(outs
            .into_iter()
            .reduce(|a, b| if b.cost < a.cost { b } else { a })
            .expect("at least one rollout"))
    }

    /// Sampled construction recorded on `tape`: the chosen moves and the
    /// differentiable total log-probability (`None` when every step was
    /// forced).
    pub fn sample_on_tape<'t, R: Rng>(
        &self,
        tape: &'t Tape,
        emb: Var<'t>,
        inst: &Instance,
        opening: Option<usize>,
        rng: &mut R,
    ) -> Result<(Solution, Option<Var<'t>>)> {
        let tsp_start = if inst.kind == ProblemKind::Tsp { opening.unwrap_or(0) } else { 0 };
        let mut st = DecoderState::new(inst, tsp_start);
        if let Some(c) = opening.filter(|_| inst.kind.has_depot()) {
            st.apply(inst, c)?;
        }
        let mut terms = Vec::new();
        while !st.done() {
            let (cands, allowed) = st.candidates(inst);
            let n_open = allowed.iter().filter(|&&a| a).count();
            let choice = if n_open == 1 {
                cands[allowed.iter().position(|&a| a).expect("one open")]
            } else {
                let out = self.decode_step(tape, emb, inst, &st)?;
                let i = sample_index(out.probs.value().data(), rng);
                terms.push(out.probs.pick(0, i)?.ln());
                out.candidates[i]
            };
            st.apply(inst, choice)?;
        }
        let logp = match terms.len() {
            0 => None,
            1 => Some(terms[0]),
            _ => Some(crate::tape::concat_cols(&terms)?.sum()),
        };
        Ok((st.into_solution(inst), logp))
    }

    /// Mean cross-entropy of the label's moves, teacher-forced, over the
    /// decision steps listed in `only` (all decision steps when `None`).
    /// Steps with a single feasible move carry no information and are
    /// skipped. Returns `None` when no step is evaluated.
    pub fn teacher_forced_loss<'t>(
        &self,
        tape: &'t Tape,
        inst: &Instance,
        actions: &[usize],
        only: Option<&[usize]>,
    ) -> Result<Option<Var<'t>>> {
        let emb = self.encode(tape, inst)?;
        let mut st = DecoderState::new(inst, 0);
        let mut terms = Vec::new();
        let mut decision = 0;
        for &a in actions {
            let (cands, allowed) = st.candidates(inst);
            let pos = cands.iter().position(|&c| c == a).filter(|&i| allowed[i]);
            let Some(pos) = pos else {
                return Err(NnError::Mask(format!("label move to node {a} is masked")));
            };
            if allowed.iter().filter(|&&x| x).count() > 1 {
                if only.map_or(true, |o| o.contains(&decision)) {
                    let out = self.decode_step(tape, emb, inst, &st)?;
                    terms.push(out.probs.cross_entropy(pos)?);
                }
                decision += 1;
            }
            st.apply(inst, a)?;
        }
        if !st.done() {
            return Err(NnError::Domain("label does not visit every customer".into()));
        }
        Ok(match terms.len() {
            0 => None,
            n => Some(crate::tape::concat_cols(&terms)?.sum().scale(1.0 / n as f64)),
        })
    }

    /// Number of non-forced steps along a label.
    pub fn decision_steps(inst: &Instance, actions: &[usize]) -> Result<usize> {
        let mut st = DecoderState::new(inst, 0);
        let mut count = 0;
        for &a in actions {
            let (_, allowed) = st.candidates(inst);
            if allowed.iter().filter(|&&x| x).count() > 1 {
                count += 1;
            }
            st.apply(inst, a)?;
        }
        Ok(count)
    }
}
