//! Problem similarity from cross-transfer costs.
//!
//! Two problems are similar when each one's (near-)optimal solution stays
//! cheap after being adapted to the other's constraints:
//!
//! ```text
//! sim(A, B) = (1 - |obj_B(A) - obj_B| / obj_B) * (1 - |obj_A(B) - obj_A| / obj_A)
//! ```

use crate::error::{domain, Result};
use crate::par::Exec;
use crate::problem::{solution_cost, Instance, ProblemKind, Solution};
use crate::transforms::transfer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCosts {
    /// Native cost of problem A.
    pub obj_a: f64,
    /// Native cost of problem B.
    pub obj_b: f64,
    /// A's solution adapted to B's constraints.
    pub obj_b_of_a: f64,
    /// B's solution adapted to A's constraints.
    pub obj_a_of_b: f64,
}

impl TransferCosts {
    pub fn swapped(self) -> Self {
        TransferCosts {
            obj_a: self.obj_b,
            obj_b: self.obj_a,
            obj_b_of_a: self.obj_a_of_b,
            obj_a_of_b: self.obj_b_of_a,
        }
    }
}

/// Similarity; at most 1 while each transfer cost stays within twice the
/// native cost. Values outside that regime are returned unclamped.
pub fn similarity(tc: &TransferCosts) -> Result<f64> {
    for (name, v) in [
        ("obj_a", tc.obj_a),
        ("obj_b", tc.obj_b),
        ("obj_b_of_a", tc.obj_b_of_a),
        ("obj_a_of_b", tc.obj_a_of_b),
    ] {
        if !(v > 0.0) {
            return Err(domain(format!("{name} must be positive, got {v}")));
        }
    }
    let a_to_b = 1.0 - (tc.obj_b_of_a - tc.obj_b).abs() / tc.obj_b;
    let b_to_a = 1.0 - (tc.obj_a_of_b - tc.obj_a).abs() / tc.obj_a;
    Ok(a_to_b * b_to_a)
}

/// Per-instance transfer costs between `kind_a` and `kind_b` on one node set.
pub fn transfer_costs<F>(inst: &Instance, kind_a: ProblemKind, kind_b: ProblemKind, solver: &F) -> Result<TransferCosts>
where
    F: Fn(&Instance) -> Result<Solution>,
{
    let ia = view(inst, kind_a)?;
    let ib = view(inst, kind_b)?;
    let sa = solver(&ia)?;
    let sb = solver(&ib)?;
    let a_in_b = transfer(&ib, kind_a, &sa)?;
    let b_in_a = transfer(&ia, kind_b, &sb)?;
    Ok(TransferCosts {
        obj_a: solution_cost(&ia, &sa)?,
        obj_b: solution_cost(&ib, &sb)?,
        obj_b_of_a: solution_cost(&ib, &a_in_b)?,
        obj_a_of_b: solution_cost(&ia, &b_in_a)?,
    })
}

fn view(inst: &Instance, kind: ProblemKind) -> Result<Instance> {
    if kind.has_time_windows() && !inst.kind.has_time_windows() {
        return Err(domain("a CVRPTW view needs an instance with time windows"));
    }
    Ok(inst.with_kind(kind))
}

/// Dataset means of the four transfer costs.
pub fn transfer_table<F>(
    dataset: &[Instance],
    kind_a: ProblemKind,
    kind_b: ProblemKind,
    solver: F,
    exec: Exec,
) -> Result<TransferCosts>
where
    F: Fn(&Instance) -> Result<Solution> + Sync + Send,
{
    if dataset.is_empty() {
        return Err(domain("empty dataset"));
    }
    let per = exec.try_map(dataset, |inst| transfer_costs(inst, kind_a, kind_b, &solver))?;
    let k = per.len() as f64;
    let mean = |f: fn(&TransferCosts) -> f64| per.iter().map(f).sum::<f64>() / k;
    Ok(TransferCosts {
        obj_a: mean(|t| t.obj_a),
        obj_b: mean(|t| t.obj_b),
        obj_b_of_a: mean(|t| t.obj_b_of_a),
        obj_a_of_b: mean(|t| t.obj_a_of_b),
    })
}
