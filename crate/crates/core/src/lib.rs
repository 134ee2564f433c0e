//! Vehicle-routing problems under varying constraint tightness: problem
//! definitions, seeded generation, solution transforms, the problem
//! similarity metric and classical baseline solvers.

pub mod baselines;
pub mod error;
pub mod generator;
pub mod io;
pub mod par;
pub mod problem;
pub mod similarity;
pub mod transforms;

pub use error::{Result, VrpError};
pub use par::Exec;
pub use problem::{
    apply_tightness, distance, schedule, solution_cost, validate, FeasibilityReport, Instance, Node,
    ProblemKind, Schedule, Solution, Violation,
};
