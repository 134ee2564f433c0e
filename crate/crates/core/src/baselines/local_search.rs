//! First-improvement local search: intra-route 2-opt and intra/inter-route
//! Or-opt (segments of 1 to 3 customers, either orientation).
//!
//! Routes are held as full node sequences: `[0, c.., 0]` for closed routes,
//! `[0, c..]` for open routes and `[c0, .., c0]` for a TSP ring. Moves are
//! scanned in a fixed order and applied as soon as they strictly improve
//! the cost and keep the solution feasible, so the search is deterministic.

use crate::error::Result;
use crate::problem::{route_time_feasible, Instance, ProblemKind, Solution};

const IMPROVEMENT_EPS: f64 = 1e-10;
const MAX_SEGMENT: usize = 3;

/// Polishes a feasible solution; never increases its cost.
pub fn two_opt_or_opt(inst: &Instance, sol: &Solution, max_passes: usize) -> Result<Solution> {
    let routes = sol.routes(inst.kind)?;
    let mut ls = LocalSearch::new(inst, routes);
    for _ in 0..max_passes {
        if !ls.pass() {
            break;
        }
    }
    Ok(ls.into_solution())
}

struct LocalSearch<'a> {
    inst: &'a Instance,
    kind: ProblemKind,
    n: usize,
    dist: Vec<f64>,
    seqs: Vec<Vec<usize>>,
    loads: Vec<u64>,
}

impl<'a> LocalSearch<'a> {
    fn new(inst: &'a Instance, routes: Vec<Vec<usize>>) -> Self {
        let n = inst.nodes.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = inst.dist(i, j);
            }
        }
        let kind = inst.kind;
        let seqs: Vec<Vec<usize>> = routes
            .into_iter()
            .map(|r| match kind {
                ProblemKind::Tsp => {
                    let mut s = r.clone();
                    s.push(r[0]);
                    s
                }
                ProblemKind::Ovrp => std::iter::once(0).chain(r).collect(),
                ProblemKind::Cvrp | ProblemKind::Cvrptw => {
                    std::iter::once(0).chain(r).chain(std::iter::once(0)).collect()
                }
            })
            .collect();
        let loads = seqs.iter().map(|s| inst.route_demand(s)).collect();
        LocalSearch { inst, kind, n, dist, seqs, loads }
    }

    #[inline]
    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    /// Exclusive end of the movable positions of a sequence.
    fn movable_end(&self, len: usize) -> usize {
        if self.kind == ProblemKind::Ovrp {
            len
        } else {
            len.saturating_sub(1)
        }
    }

    fn customers(&self, seq: &[usize]) -> Vec<usize> {
        let end = self.movable_end(seq.len());
        seq[1..end].to_vec()
    }

    fn time_ok(&self, seq: &[usize]) -> bool {
        !self.kind.has_time_windows() || route_time_feasible(self.inst, &self.customers(seq))
    }

    fn pass(&mut self) -> bool {
        let mut improved = false;
        for r in 0..self.seqs.len() {
            improved |= self.two_opt(r);
        }
        improved |= self.or_opt();
        improved
    }

    fn two_opt(&mut self, r: usize) -> bool {
        let mut improved = false;
        let mut i = 1;
        while i < self.movable_end(self.seqs[r].len()) {
            let mut j = i + 1;
            while j < self.movable_end(self.seqs[r].len()) {
                let s = &self.seqs[r];
                let mut delta = self.d(s[i - 1], s[j]) - self.d(s[i - 1], s[i]);
                if j + 1 < s.len() {
                    delta += self.d(s[i], s[j + 1]) - self.d(s[j], s[j + 1]);
                }
                if delta < -IMPROVEMENT_EPS {
                    let mut cand = s.clone();
                    cand[i..=j].reverse();
                    if self.time_ok(&cand) {
                        self.seqs[r] = cand;
                        improved = true;
                    }
                }
                j += 1;
            }
            i += 1;
        }
        improved
    }

    fn or_opt(&mut self) -> bool {
        let mut improved = false;
        let mut r = 0;
        while r < self.seqs.len() {
            let mut i = 1;
            while i < self.movable_end(self.seqs[r].len()) {
                if self.try_relocate(r, i) {
                    improved = true;
                } else {
                    i += 1;
                }
            }
            r += 1;
        }
        improved
    }

    /// Tries every segment starting at position `i` of route `r`; applies
    /// the first improving feasible relocation.
    fn try_relocate(&mut self, r: usize, i: usize) -> bool {
        let src = &self.seqs[r];
        let end = self.movable_end(src.len());
        for len in 1..=MAX_SEGMENT {
            if i + len > end {
                break;
            }
            let seg: Vec<usize> = src[i..i + len].to_vec();
            let prev = src[i - 1];
            let next = src.get(i + len).copied();
            let mut removal = -self.d(prev, seg[0]);
            if let Some(nx) = next {
                removal += self.d(prev, nx) - self.d(seg[len - 1], nx);
            }
            let seg_load: u64 = self.inst.route_demand(&seg);
            let mut reduced = src.clone();
            reduced.drain(i..i + len);

            for t in 0..self.seqs.len() {
                if t != r
                    && self.kind.has_depot()
                    && self.loads[t] + seg_load > self.inst.capacity as u64
                {
                    continue;
                }
                if self.kind == ProblemKind::Tsp && t != r {
                    continue;
                }
                let target: &[usize] = if t == r { &reduced } else { &self.seqs[t] };
                let gaps = if self.kind == ProblemKind::Ovrp { target.len() } else { target.len() - 1 };
                for q in 0..gaps {
                    for reversed in [false, true] {
                        if reversed && len == 1 {
                            continue;
                        }
                        let (first, last) =
                            if reversed { (seg[len - 1], seg[0]) } else { (seg[0], seg[len - 1]) };
                        let a = target[q];
                        let mut insertion = self.d(a, first);
                        if let Some(&b) = target.get(q + 1) {
                            insertion += self.d(last, b) - self.d(a, b);
                        }
                        if removal + insertion >= -IMPROVEMENT_EPS {
                            continue;
                        }
                        let mut placed = target.to_vec();
                        let mut piece = seg.clone();
                        if reversed {
                            piece.reverse();
                        }
                        placed.splice(q + 1..q + 1, piece);
                        if t == r {
                            if !self.time_ok(&placed) {
                                continue;
                            }
                            self.seqs[r] = placed;
                        } else {
                            if !self.time_ok(&placed) || !self.time_ok(&reduced) {
                                continue;
                            }
                            self.seqs[t] = placed;
                            self.loads[t] += seg_load;
                            self.loads[r] -= seg_load;
                            self.seqs[r] = reduced;
                        }
                        return true;
                    }
                }
            }
        }
        false
    }

    fn into_solution(self) -> Solution {
        let kind = self.kind;
        let routes: Vec<Vec<usize>> = self
            .seqs
            .iter()
            .map(|s| match kind {
                ProblemKind::Tsp => s[..s.len() - 1].to_vec(),
                _ => self.customers(s),
            })
            .filter(|r| !r.is_empty())
            .collect();
        if kind == ProblemKind::Tsp {
            let mut ring = routes.into_iter().next().unwrap_or_default();
            if let Some(p) = ring.iter().position(|&c| c == 0) {
                ring.rotate_left(p);
            }
            return Solution::new(ring);
        }
        Solution::from_routes(kind, &routes)
    }
}
