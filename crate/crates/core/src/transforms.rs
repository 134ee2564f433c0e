//! Handcrafted conversions of a solution of one routing problem into a
//! solution of another on the same node set.
//!
//! | from   | to     | procedure                                            |
//! |--------|--------|------------------------------------------------------|
//! | CVRP   | TSP    | cut depot edges, greedily re-join path segments      |
//! | TSP    | CVRP   | split the ring whenever the next demand overflows    |
//! | CVRP   | OVRP   | drop the longer depot edge of every sub-tour         |
//! | OVRP   | CVRP   | close every open sub-tour at the depot               |
//! | CVRP   | CVRPTW | split sub-tours at window violations, both directions|
//! | CVRPTW | CVRP   | merge sub-tours by descending savings                |

use crate::error::{domain, infeasible, structure, Result};
use crate::problem::{route_cost_as, route_time_feasible, Instance, ProblemKind, Solution};

/// A path with two endpoints. A lone node is the degenerate segment whose
/// head and tail coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegment {
    pub nodes: Vec<usize>,
}

impl PathSegment {
    pub fn head(&self) -> usize {
        self.nodes[0]
    }

    pub fn tail(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Joint {
    TailHead,
    TailTail,
    HeadTail,
    HeadHead,
}

/// CVRP solution to a TSP ring over all nodes (depot included).
///
/// Depot edges are cut, leaving one segment per sub-tour plus the depot on
/// its own. Starting from the segment holding the lowest node index (the
/// depot), the path repeatedly absorbs the remaining segment whose nearest
/// endpoint pairing is shortest; ties go to the lower segment id, then to
/// the joint order tail-head, tail-tail, head-tail, head-head, so a
/// single sub-tour keeps its orientation. The ring is
/// returned rotated to start at node 0.
pub fn cvrp_to_tsp(inst: &Instance, sol: &Solution) -> Result<Solution> {
    let routes = sol.routes(ProblemKind::Cvrp)?;
    check_cover(inst, &routes)?;
    let mut segments: Vec<Option<PathSegment>> = Vec::with_capacity(routes.len() + 1);
    segments.push(Some(PathSegment { nodes: vec![0] }));
    segments.extend(routes.into_iter().map(|r| Some(PathSegment { nodes: r })));

    let start = (0..segments.len())
        .min_by_key(|&i| segments[i].as_ref().unwrap().nodes.iter().min().copied())
        .unwrap();
    let mut path = segments[start].take().unwrap().nodes;

    loop {
        let (ph, pt) = (path[0], path[path.len() - 1]);
        let mut best: Option<(f64, usize, Joint)> = None;
        for (id, seg) in segments.iter().enumerate() {
            let Some(seg) = seg else { continue };
            for (joint, a, b) in [
                (Joint::TailHead, pt, seg.head()),
                (Joint::TailTail, pt, seg.tail()),
                (Joint::HeadTail, ph, seg.tail()),
                (Joint::HeadHead, ph, seg.head()),
            ] {
                let d = inst.dist(a, b);
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, id, joint));
                }
            }
        }
        let Some((_, id, joint)) = best else { break };
        let mut seg = segments[id].take().unwrap().nodes;
        match joint {
            // seg reversed, then path: new head is seg's tail
            Joint::HeadHead => {
                seg.reverse();
                seg.extend_from_slice(&path);
                path = seg;
            }
            Joint::HeadTail => {
                seg.extend_from_slice(&path);
                path = seg;
            }
            Joint::TailHead => path.extend(seg),
            Joint::TailTail => {
                seg.reverse();
                path.extend(seg);
            }
        }
    }
    let p = path.iter().position(|&v| v == 0).expect("depot is on the ring");
    path.rotate_left(p);
    Ok(Solution::new(path))
}

/// TSP ring to CVRP: walk the ring from the depot, inserting a depot
/// return whenever the next customer would overflow the capacity.
pub fn tsp_to_cvrp(inst: &Instance, sol: &Solution) -> Result<Solution> {
    if let Some(node) = inst.nodes.iter().find(|n| n.demand > inst.capacity) {
        return Err(domain(format!(
            "demand {} of node {} exceeds capacity {}",
            node.demand, node.index, inst.capacity
        )));
    }
    let ring = &sol.visits;
    let mut seen = vec![false; inst.nodes.len()];
    for &v in ring {
        if v >= seen.len() || std::mem::replace(&mut seen[v], true) {
            return Err(structure(format!("ring is not a permutation (node {v})")));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(structure("ring does not visit every node"));
    }
    let p = ring.iter().position(|&v| v == 0).unwrap();
    let mut routes = vec![Vec::new()];
    let mut load = 0u64;
    for k in 1..ring.len() {
        let c = ring[(p + k) % ring.len()];
        let d = inst.nodes[c].demand as u64;
        if load + d > inst.capacity as u64 {
            routes.push(Vec::new());
            load = 0;
        }
        load += d;
        routes.last_mut().unwrap().push(c);
    }
    Ok(Solution::from_routes(ProblemKind::Cvrp, &routes))
}

/// CVRP to OVRP: each sub-tour loses the longer of its two depot edges and
/// is oriented to leave the depot. On a tie the return edge goes.
pub fn cvrp_to_ovrp(inst: &Instance, sol: &Solution) -> Result<Solution> {
    let routes = sol.routes(ProblemKind::Cvrp)?;
    let open: Vec<Vec<usize>> = routes
        .into_iter()
        .map(|mut r| {
            let out = inst.dist(0, r[0]);
            let back = inst.dist(r[r.len() - 1], 0);
            if out > back {
                r.reverse();
            }
            r
        })
        .collect();
    Ok(Solution::from_routes(ProblemKind::Ovrp, &open))
}

/// OVRP to CVRP: every open sub-tour returns to the depot.
pub fn ovrp_to_cvrp(_inst: &Instance, sol: &Solution) -> Result<Solution> {
    let routes = sol.routes(ProblemKind::Ovrp)?;
    Ok(Solution::from_routes(ProblemKind::Cvrp, &routes))
}

/// Splits a closed route before every node whose window (or the depot
/// deadline after serving it) would be violated.
fn split_by_windows(inst: &Instance, route: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for &c in route {
        current.push(c);
        if !route_time_feasible(inst, &current) {
            current.pop();
            if current.is_empty() {
                return Err(infeasible(format!("customer {c} cannot be served by any route")));
            }
            out.push(std::mem::take(&mut current));
            current.push(c);
            if !route_time_feasible(inst, &current) {
                return Err(infeasible(format!("customer {c} cannot be served by any route")));
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

/// CVRP to CVRPTW: every sub-tour is split at window violations, once in
/// each traversal direction; the direction with the shorter total length
/// wins (forward on ties).
pub fn cvrp_to_cvrptw(inst_tw: &Instance, sol: &Solution) -> Result<Solution> {
    if !inst_tw.kind.has_time_windows() {
        return Err(domain("target instance carries no time windows"));
    }
    let routes = sol.routes(ProblemKind::Cvrp)?;
    let mut out = Vec::new();
    for r in routes {
        let forward = split_by_windows(inst_tw, &r)?;
        let rev: Vec<usize> = r.iter().rev().copied().collect();
        let backward = split_by_windows(inst_tw, &rev)?;
        let len = |parts: &[Vec<usize>]| -> f64 {
            parts.iter().map(|p| route_cost_as(inst_tw, ProblemKind::Cvrptw, p)).sum()
        };
        if len(&backward) < len(&forward) {
            out.extend(backward);
        } else {
            out.extend(forward);
        }
    }
    Ok(Solution::from_routes(ProblemKind::Cvrptw, &out))
}

/// CVRPTW to CVRP: repeatedly merge the pair of sub-tours with the largest
/// positive savings whose joint demand fits the capacity. Candidate joins
/// are A+B, A+rev(B), rev(A)+B and B+A; savings are recomputed after every
/// merge. Ties go to the lexicographically first (A, B, join).
pub fn cvrptw_to_cvrp(inst: &Instance, sol: &Solution) -> Result<Solution> {
    let mut routes = sol.routes(ProblemKind::Cvrptw)?;
    let cost = |r: &[usize]| route_cost_as(inst, ProblemKind::Cvrp, r);
    loop {
        let mut best: Option<(f64, usize, usize, Vec<usize>)> = None;
        for a in 0..routes.len() {
            for b in a + 1..routes.len() {
                if inst.route_demand(&routes[a]) + inst.route_demand(&routes[b]) > inst.capacity as u64 {
                    continue;
                }
                let separate = cost(&routes[a]) + cost(&routes[b]);
                let ra: Vec<usize> = routes[a].iter().rev().copied().collect();
                let rb: Vec<usize> = routes[b].iter().rev().copied().collect();
                for merged in [
                    [routes[a].as_slice(), routes[b].as_slice()].concat(),
                    [routes[a].as_slice(), rb.as_slice()].concat(),
                    [ra.as_slice(), routes[b].as_slice()].concat(),
                    [routes[b].as_slice(), routes[a].as_slice()].concat(),
                ] {
                    let saving = separate - cost(&merged);
                    if saving > 1e-12 && best.as_ref().map_or(true, |(s, ..)| saving > *s) {
                        best = Some((saving, a, b, merged));
                    }
                }
            }
        }
        let Some((_, a, b, merged)) = best else { break };
        routes[a] = merged;
        routes.remove(b);
    }
    Ok(Solution::from_routes(ProblemKind::Cvrp, &routes))
}

/// Converts `sol`, a solution of `from`, into a solution of `to`. Both
/// instances describe the same nodes; `to_inst` supplies the target
/// constraints.
pub fn transfer(to_inst: &Instance, from: ProblemKind, sol: &Solution) -> Result<Solution> {
    use ProblemKind::*;
    match (from, to_inst.kind) {
        (a, b) if a == b => Ok(sol.clone()),
        (Cvrp, Tsp) => cvrp_to_tsp(to_inst, sol),
        (Tsp, Cvrp) => tsp_to_cvrp(to_inst, sol),
        (Cvrp, Ovrp) => cvrp_to_ovrp(to_inst, sol),
        (Ovrp, Cvrp) => ovrp_to_cvrp(to_inst, sol),
        (Cvrp, Cvrptw) => cvrp_to_cvrptw(to_inst, sol),
        (Cvrptw, Cvrp) => cvrptw_to_cvrp(to_inst, sol),
        (a, b) => Err(domain(format!("no transform from {a} to {b}"))),
    }
}

fn check_cover(inst: &Instance, routes: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; inst.nodes.len()];
    for &c in routes.iter().flatten() {
        if c >= seen.len() || std::mem::replace(&mut seen[c], true) {
            return Err(structure(format!("node {c} repeated or out of range")));
        }
    }
    if seen.iter().skip(1).any(|s| !s) {
        return Err(structure("solution does not cover every customer"));
    }
    Ok(())
}
