//! Classical solvers used as the label oracle and gap reference, and the
//! optimality-gap metric.

mod construct;
mod local_search;

use std::fmt;
use std::str::FromStr;

pub use construct::{clarke_wright, nearest_neighbor};
pub use local_search::two_opt_or_opt;

use crate::error::{domain, Result, VrpError};
use crate::par::Exec;
use crate::problem::{solution_cost, Instance, Solution};

/// Pass cap used by [`oracle`]; in practice the search reaches a local
/// optimum long before.
pub const ORACLE_MAX_PASSES: usize = 10_000;

/// Best of nearest-neighbour and Clarke-Wright, each polished by
/// [`two_opt_or_opt`]. Deterministic; ties keep nearest-neighbour.
pub fn oracle(inst: &Instance) -> Result<Solution> {
    let mut best: Option<(f64, Solution)> = None;
    for start in [nearest_neighbor(inst)?, clarke_wright(inst)?] {
        let polished = two_opt_or_opt(inst, &start, ORACLE_MAX_PASSES)?;
        let cost = solution_cost(inst, &polished)?;
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, polished));
        }
    }
    Ok(best.expect("two candidates").1)
}

/// Optimality gap in percent: `100 (cost - reference) / reference`.
pub fn gap(cost: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(domain(format!("reference cost must be positive, got {reference}")));
    }
    Ok(100.0 * (cost - reference) / reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NearestNeighbor,
    ClarkeWright,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NearestNeighbor => "nn",
            Method::ClarkeWright => "cw",
            Method::Oracle => "oracle",
        }
    }

    pub fn solve(self, inst: &Instance) -> Result<Solution> {
        match self {
            Method::NearestNeighbor => nearest_neighbor(inst),
            Method::ClarkeWright => clarke_wright(inst),
            Method::Oracle => oracle(inst),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = VrpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Method::NearestNeighbor),
            "cw" => Ok(Method::ClarkeWright),
            "oracle" => Ok(Method::Oracle),
            other => Err(domain(format!("unknown method `{other}` (expected nn, cw or oracle)"))),
        }
    }
}

/// Solves every instance; results keep dataset order.
pub fn solve_dataset(insts: &[Instance], method: Method, exec: Exec) -> Result<Vec<Solution>> {
    exec.try_map(insts, |inst| method.solve(inst))
}
