//! Problem definitions shared by every other module: instances, solutions,
//! tour cost, feasibility checking and time-window arithmetic.
//!
//! Node 0 is the depot for every kind except [`ProblemKind::Tsp`], where it
//! is an ordinary city. Travel time equals Euclidean distance.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, structure, Result, VrpError};

/// Slack used when comparing times against window bounds.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Tsp,
    Cvrp,
    Ovrp,
    Cvrptw,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [Self::Tsp, Self::Cvrp, Self::Ovrp, Self::Cvrptw];

    pub fn has_depot(self) -> bool {
        !matches!(self, ProblemKind::Tsp)
    }

    /// Sub-tours return to the depot (CVRP, CVRPTW).
    pub fn closed_routes(self) -> bool {
        matches!(self, ProblemKind::Cvrp | ProblemKind::Cvrptw)
    }

    pub fn has_time_windows(self) -> bool {
        matches!(self, ProblemKind::Cvrptw)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Tsp => "TSP",
            ProblemKind::Cvrp => "CVRP",
            ProblemKind::Ovrp => "OVRP",
            ProblemKind::Cvrptw => "CVRPTW",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = VrpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TSP" => Ok(ProblemKind::Tsp),
            "CVRP" => Ok(ProblemKind::Cvrp),
            "OVRP" => Ok(ProblemKind::Ovrp),
            "CVRPTW" => Ok(ProblemKind::Cvrptw),
            other => Err(domain(format!("unknown problem kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub demand: u32,
    pub early: f64,
    pub late: f64,
    pub service: f64,
}

impl Node {
    /// A node without time-window semantics (window `[0, +inf)`, no service).
    pub fn plain(index: usize, x: f64, y: f64, demand: u32) -> Self {
        Node { index, x, y, demand, early: 0.0, late: f64::INFINITY, service: 0.0 }
    }
}

/// Euclidean distance between two nodes.
#[inline]
pub fn distance(a: &Node, b: &Node) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: ProblemKind,
    pub nodes: Vec<Node>,
    /// Vehicle capacity. Ignored for TSP.
    pub capacity: u32,
    /// Time-window tightness coefficient; `1.0` means the base windows.
    pub alpha: f64,
}

impl Instance {
    pub fn new(kind: ProblemKind, nodes: Vec<Node>, capacity: u32) -> Result<Self> {
        let inst = Instance { kind, nodes, capacity, alpha: 1.0 };
        inst.check()?;
        Ok(inst)
    }

    /// Checks the structural invariants of an instance.
    pub fn check(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(domain("instance has no nodes"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.index != i {
                return Err(domain(format!("node at position {i} has index {}", node.index)));
            }
            if !(0.0..=1.0).contains(&node.x) || !(0.0..=1.0).contains(&node.y) {
                return Err(domain(format!("node {i} lies outside the unit square")));
            }
            if node.early > node.late || node.early < 0.0 || node.service < 0.0 {
                return Err(domain(format!("node {i} has an invalid time window")));
            }
        }
        if self.kind.has_depot() {
            if self.nodes[0].demand != 0 {
                return Err(domain("depot demand must be zero"));
            }
            if self.capacity == 0 {
                return Err(domain("capacity must be positive"));
            }
            if let Some(big) = self.nodes.iter().find(|n| n.demand > self.capacity) {
                return Err(domain(format!(
                    "demand {} of node {} exceeds capacity {}",
                    big.demand, big.index, self.capacity
                )));
            }
        }
        if !(self.alpha > 0.0) {
            return Err(domain("alpha must be positive"));
        }
        Ok(())
    }

    /// Number of customers: every node but the depot. For TSP node 0 is
    /// a city too, so a TSP instance has `n_customers() + 1` cities.
    pub fn n_customers(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(&self.nodes[i], &self.nodes[j])
    }

    pub fn total_demand(&self) -> u64 {
        self.nodes.iter().map(|n| n.demand as u64).sum()
    }

    pub fn route_demand(&self, route: &[usize]) -> u64 {
        route.iter().map(|&c| self.nodes[c].demand as u64).sum()
    }

    /// Same instance viewed as another problem kind.
    pub fn with_kind(&self, kind: ProblemKind) -> Instance {
        Instance { kind, ..self.clone() }
    }

    /// Cost of a single route given as its customer sequence (no depot
    /// entries). For TSP the slice is the whole ring.
    pub fn route_cost(&self, route: &[usize]) -> f64 {
        route_cost_as(self, self.kind, route)
    }
}

/// Route cost under an explicit kind (lets one instance be priced as
/// several problems).
pub fn route_cost_as(inst: &Instance, kind: ProblemKind, route: &[usize]) -> f64 {
    if route.is_empty() {
        return 0.0;
    }
    let inner: f64 = route.windows(2).map(|w| inst.dist(w[0], w[1])).sum();
    match kind {
        ProblemKind::Tsp => inner + inst.dist(route[route.len() - 1], route[0]),
        ProblemKind::Ovrp => inner + inst.dist(0, route[0]),
        ProblemKind::Cvrp | ProblemKind::Cvrptw => {
            inner + inst.dist(0, route[0]) + inst.dist(route[route.len() - 1], 0)
        }
    }
}

/// An ordered visit sequence. For depot kinds, index-0 entries delimit
/// sub-tours; for TSP the sequence is a ring with an implied closing edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Solution {
    pub visits: Vec<usize>,
}

impl Solution {
    pub fn new(visits: Vec<usize>) -> Self {
        Solution { visits }
    }

    /// Builds the delimited visit list from customer-only routes. Empty
    /// routes are dropped.
    pub fn from_routes<R: AsRef<[usize]>>(kind: ProblemKind, routes: &[R]) -> Solution {
        let mut visits = Vec::new();
        match kind {
            ProblemKind::Tsp => {
                for r in routes {
                    visits.extend_from_slice(r.as_ref());
                }
            }
            ProblemKind::Ovrp => {
                for r in routes.iter().map(AsRef::as_ref).filter(|r| !r.is_empty()) {
                    visits.push(0);
                    visits.extend_from_slice(r);
                }
            }
            ProblemKind::Cvrp | ProblemKind::Cvrptw => {
                visits.push(0);
                for r in routes.iter().map(AsRef::as_ref).filter(|r| !r.is_empty()) {
                    visits.extend_from_slice(r);
                    visits.push(0);
                }
            }
        }
        Solution { visits }
    }

    /// Splits the visit list into customer-only sub-tours, enforcing the
    /// delimiter rules of `kind`. TSP yields a single ring.
    pub fn routes(&self, kind: ProblemKind) -> Result<Vec<Vec<usize>>> {
        let v = &self.visits;
        if v.is_empty() {
            return Err(structure("empty visit sequence"));
        }
        if kind == ProblemKind::Tsp {
            return Ok(vec![v.clone()]);
        }
        if v[0] != 0 {
            return Err(structure("solution must start at the depot"));
        }
        match kind {
            ProblemKind::Cvrp | ProblemKind::Cvrptw => {
                if v.len() < 3 || *v.last().unwrap() != 0 {
                    return Err(structure("closed solution must end at the depot"));
                }
            }
            ProblemKind::Ovrp => {
                if *v.last().unwrap() == 0 {
                    return Err(structure("open sub-tours must end at a customer"));
                }
            }
            ProblemKind::Tsp => unreachable!(),
        }
        let mut routes = Vec::new();
        let mut current = Vec::new();
        for (pos, &node) in v.iter().enumerate().skip(1) {
            if node == 0 {
                if current.is_empty() {
                    return Err(structure(format!("empty sub-tour at position {pos}")));
                }
                routes.push(std::mem::take(&mut current));
            } else {
                current.push(node);
            }
        }
        if !current.is_empty() {
            routes.push(current);
        }
        Ok(routes)
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.visits {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

fn check_indices(inst: &Instance, sol: &Solution) -> Result<()> {
    match sol.visits.iter().find(|&&v| v >= inst.nodes.len()) {
        Some(bad) => Err(structure(format!("node index {bad} out of range"))),
        None => Ok(()),
    }
}

/// Total tour length. TSP includes the closing edge; OVRP omits the
/// return edge of every sub-tour.
pub fn solution_cost(inst: &Instance, sol: &Solution) -> Result<f64> {
    check_indices(inst, sol)?;
    let routes = sol.routes(inst.kind)?;
    Ok(routes.iter().map(|r| inst.route_cost(r)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Structure(String),
    Missing { node: usize },
    Duplicate { node: usize },
    Capacity { route: usize, node: usize, load: u64 },
    TimeWindow { node: usize, arrival: f64, late: f64 },
    DepotDeadline { route: usize, arrival: f64, deadline: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Full feasibility check. Violations are reported as data.
pub fn validate(inst: &Instance, sol: &Solution) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    if let Err(e) = check_indices(inst, sol) {
        report.violations.push(Violation::Structure(e.to_string()));
        return report;
    }
    let routes = match sol.routes(inst.kind) {
        Ok(r) => r,
        Err(e) => {
            report.violations.push(Violation::Structure(e.to_string()));
            return report;
        }
    };

    let first_city = if inst.kind.has_depot() { 1 } else { 0 };
    let mut seen = vec![0usize; inst.nodes.len()];
    for r in &routes {
        for &c in r {
            seen[c] += 1;
        }
    }
    for (node, &count) in seen.iter().enumerate().skip(first_city) {
        match count {
            0 => report.violations.push(Violation::Missing { node }),
            1 => {}
            _ => report.violations.push(Violation::Duplicate { node }),
        }
    }
    if inst.kind.has_depot() && seen[0] > 0 {
        report.violations.push(Violation::Duplicate { node: 0 });
    }

    if inst.kind.has_depot() {
        for (ri, r) in routes.iter().enumerate() {
            let mut load = 0u64;
            for &c in r {
                load += inst.nodes[c].demand as u64;
                if load > inst.capacity as u64 {
                    report.violations.push(Violation::Capacity { route: ri, node: c, load });
                    break;
                }
            }
        }
    }

    if inst.kind.has_time_windows() {
        for (ri, r) in routes.iter().enumerate() {
            let sim = simulate_route(inst, r);
            if let Some((node, v)) = sim.violation {
                report.violations.push(match v {
                    TimeViolation::LateArrival { arrival, late } => {
                        Violation::TimeWindow { node, arrival, late }
                    }
                    TimeViolation::DepotDeadline { arrival, deadline } => {
                        Violation::DepotDeadline { route: ri, arrival, deadline }
                    }
                });
            }
        }
    }
    report
}

/// One visit in a simulated schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub node: usize,
    pub arrival: f64,
    pub service_start: f64,
    pub departure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeViolation {
    LateArrival { arrival: f64, late: f64 },
    DepotDeadline { arrival: f64, deadline: f64 },
}

/// Simulated timing of a CVRPTW solution. `stops` lists every visit in
/// order, including each return to the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub stops: Vec<Stop>,
    pub feasible: bool,
    /// First violation encountered: (node index, reason).
    pub violation: Option<(usize, TimeViolation)>,
}

impl Schedule {
    /// The customer visit of `node`, if it is served.
    pub fn stop_of(&self, node: usize) -> Option<&Stop> {
        self.stops.iter().find(|s| s.node == node && node != 0)
    }
}

pub(crate) struct RouteSim {
    pub stops: Vec<Stop>,
    pub violation: Option<(usize, TimeViolation)>,
}

/// Forward simulation of one closed route from the depot at `e_0`.
pub(crate) fn simulate_route(inst: &Instance, route: &[usize]) -> RouteSim {
    let depot = &inst.nodes[0];
    let mut stops = Vec::with_capacity(route.len() + 1);
    let mut violation = None;
    let mut t = depot.early;
    let mut prev = 0;
    for &c in route {
        let node = &inst.nodes[c];
        let arrival = t + inst.dist(prev, c);
        let service_start = arrival.max(node.early);
        let departure = service_start + node.service;
        if violation.is_none() && arrival > node.late + TIME_EPS {
            violation = Some((c, TimeViolation::LateArrival { arrival, late: node.late }));
        }
        stops.push(Stop { node: c, arrival, service_start, departure });
        t = departure;
        prev = c;
    }
    let back = t + inst.dist(prev, 0);
    if violation.is_none() && back > depot.late + TIME_EPS {
        violation = Some((0, TimeViolation::DepotDeadline { arrival: back, deadline: depot.late }));
    }
    stops.push(Stop { node: 0, arrival: back, service_start: back, departure: back });
    RouteSim { stops, violation }
}

/// True when a closed route meets every window and the depot deadline.
pub fn route_time_feasible(inst: &Instance, route: &[usize]) -> bool {
    let depot = &inst.nodes[0];
    let mut t = depot.early;
    let mut prev = 0;
    for &c in route {
        let node = &inst.nodes[c];
        let arrival = t + inst.dist(prev, c);
        if arrival > node.late + TIME_EPS {
            return false;
        }
        t = arrival.max(node.early) + node.service;
        prev = c;
    }
    t + inst.dist(prev, 0) <= depot.late + TIME_EPS
}

/// Time-window schedule of a CVRPTW solution. Every vehicle leaves the
/// depot at `e_0`; service at node `j` starts at `max(e_j, arrival)`.
pub fn schedule(inst: &Instance, sol: &Solution) -> Result<Schedule> {
    if inst.kind != ProblemKind::Cvrptw {
        return Err(domain(format!("schedule requires a CVRPTW instance, got {}", inst.kind)));
    }
    check_indices(inst, sol)?;
    let routes = sol.routes(inst.kind)?;
    let depot = &inst.nodes[0];
    let mut stops = vec![Stop {
        node: 0,
        arrival: depot.early,
        service_start: depot.early,
        departure: depot.early,
    }];
    let mut violation = None;
    for r in &routes {
        let sim = simulate_route(inst, r);
        if violation.is_none() {
            violation = sim.violation;
        }
        stops.extend(sim.stops);
    }
    Ok(Schedule { stops, feasible: violation.is_none(), violation })
}

/// Relaxes (`alpha > 1`) or tightens (`alpha < 1`) every customer window
/// around its midpoint and rescales service times. The input must carry
/// the base (`alpha = 1`) windows.
pub fn apply_tightness(inst: &Instance, alpha: f64) -> Result<Instance> {
    if inst.kind != ProblemKind::Cvrptw {
        return Err(domain("time-window tightness applies to CVRPTW only"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(domain(format!("tightness coefficient must be positive, got {alpha}")));
    }
    if inst.alpha != 1.0 {
        return Err(domain("instance windows are already tightened"));
    }
    let mut out = inst.clone();
    for node in out.nodes.iter_mut().skip(1) {
        let delta = (node.late - node.early) / 2.0 * (1.0 - alpha);
        node.early = (node.early + delta).max(0.0);
        node.late -= delta;
        node.service = (node.service / alpha).max(node.service);
    }
    out.alpha = alpha;
    Ok(out)
}
