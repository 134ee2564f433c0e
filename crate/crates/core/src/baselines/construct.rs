use crate::error::{infeasible, Result};
use crate::problem::{route_time_feasible, Instance, ProblemKind, Solution, TIME_EPS};

/// Greedy nearest feasible neighbour. Depot kinds return to the depot when
/// no unvisited customer fits the remaining capacity (and, for CVRPTW, can
/// be reached in its window with time to get back to the depot).
pub fn nearest_neighbor(inst: &Instance) -> Result<Solution> {
    let n = inst.nodes.len();
    let mut visited = vec![false; n];
    if inst.kind == ProblemKind::Tsp {
        let mut ring = vec![0];
        visited[0] = true;
        let mut cur = 0;
        for _ in 1..n {
            let next = (0..n)
                .filter(|&j| !visited[j])
                .min_by(|&a, &b| inst.dist(cur, a).total_cmp(&inst.dist(cur, b)))
                .expect("unvisited city remains");
            visited[next] = true;
            ring.push(next);
            cur = next;
        }
        return Ok(Solution::new(ring));
    }

    let depot = &inst.nodes[0];
    let tw = inst.kind.has_time_windows();
    let mut routes: Vec<Vec<usize>> = Vec::new();
    let mut remaining = n - 1;
    while remaining > 0 {
        let mut route = Vec::new();
        let (mut cur, mut load, mut time) = (0usize, 0u64, depot.early);
        loop {
            let mut best: Option<(usize, f64)> = None;
            for j in 1..n {
                if visited[j] || load + inst.nodes[j].demand as u64 > inst.capacity as u64 {
                    continue;
                }
                let d = inst.dist(cur, j);
                if tw {
                    let node = &inst.nodes[j];
                    let arrival = time + d;
                    let back = arrival.max(node.early) + node.service + inst.dist(j, 0);
                    if arrival > node.late + TIME_EPS || back > depot.late + TIME_EPS {
                        continue;
                    }
                }
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            let Some((j, d)) = best else { break };
            let node = &inst.nodes[j];
            visited[j] = true;
            remaining -= 1;
            load += node.demand as u64;
            time = (time + d).max(node.early) + node.service;
            cur = j;
            route.push(j);
        }
        if route.is_empty() {
            let stuck = (1..n).find(|&j| !visited[j]).unwrap_or(0);
            return Err(infeasible(format!("customer {stuck} cannot be served by any route")));
        }
        routes.push(route);
    }
    Ok(Solution::from_routes(inst.kind, &routes))
}

/// Clarke-Wright savings construction. Starts from one route per customer
/// and merges route ends by descending savings while capacity (and, for
/// CVRPTW, the schedule) stays feasible. OVRP uses the open-route savings
/// `d(0, j) - d(i, j)` for appending the route headed by `j` after the one
/// ending in `i`. For TSP node 0 acts as the hub and capacity is unbounded.
pub fn clarke_wright(inst: &Instance) -> Result<Solution> {
    let n = inst.nodes.len();
    let kind = inst.kind;
    let capacity = if kind == ProblemKind::Tsp { u64::MAX } else { inst.capacity as u64 };
    if kind.has_time_windows() {
        if let Some(c) = (1..n).find(|&c| !route_time_feasible(inst, &[c])) {
            return Err(infeasible(format!("customer {c} cannot be served by any route")));
        }
    }

    let mut savings: Vec<(f64, usize, usize)> = Vec::new();
    for i in 1..n {
        for j in 1..n {
            if i == j || (kind != ProblemKind::Ovrp && j < i) {
                continue;
            }
            let s = match kind {
                ProblemKind::Ovrp => inst.dist(0, j) - inst.dist(i, j),
                _ => inst.dist(0, i) + inst.dist(0, j) - inst.dist(i, j),
            };
            if s > 0.0 || kind == ProblemKind::Tsp {
                savings.push((s, i, j));
            }
        }
    }
    savings.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut routes: Vec<Option<Vec<usize>>> = (0..n).map(|c| (c > 0).then(|| vec![c])).collect();
    let mut route_of: Vec<usize> = (0..n).collect();
    let mut loads: Vec<u64> = inst.nodes.iter().map(|nd| nd.demand as u64).collect();

    for &(_, i, j) in &savings {
        let (ri, rj) = (route_of[i], route_of[j]);
        if ri == rj || loads[ri] + loads[rj] > capacity {
            continue;
        }
        let a = routes[ri].as_ref().unwrap();
        let b = routes[rj].as_ref().unwrap();
        let merged = if kind == ProblemKind::Ovrp {
            if *a.last().unwrap() != i || b[0] != j {
                continue;
            }
            let mut m = a.clone();
            m.extend_from_slice(b);
            m
        } else {
            let i_end = a[0] == i || *a.last().unwrap() == i;
            let j_end = b[0] == j || *b.last().unwrap() == j;
            if !i_end || !j_end {
                continue;
            }
            let mut m = a.clone();
            if *m.last().unwrap() != i {
                m.reverse();
            }
            let mut tail = b.clone();
            if tail[0] != j {
                tail.reverse();
            }
            m.extend(tail);
            if kind.has_time_windows() && !route_time_feasible(inst, &m) {
                m.reverse();
                if !route_time_feasible(inst, &m) {
                    continue;
                }
            }
            m
        };
        for &c in &merged {
            route_of[c] = ri;
        }
        loads[ri] += loads[rj];
        routes[ri] = Some(merged);
        routes[rj] = None;
    }

    let routes: Vec<Vec<usize>> = routes.into_iter().flatten().collect();
    if kind == ProblemKind::Tsp {
        let mut ring = vec![0];
        for r in routes {
            ring.extend(r);
        }
        return Ok(Solution::new(ring));
    }
    Ok(Solution::from_routes(kind, &routes))
}
