//! A fixpoint engine for side-effecting constraint systems.
//!
//! Locals (program points in calling contexts) are solved flow-sensitively;
//! globals (shared variables, procedure entries, escaped locals) accumulate
//! contributions flow-insensitively through a pluggable update rule. Two
//! hosting solvers are provided, together with a mini-C frontend, a concrete
//! collecting-semantics oracle, and a precision-comparison harness.

pub mod compare;
pub mod constraints;
pub mod driver;
pub mod frontend;
pub mod lattice;
pub mod oracle;
pub mod report;
pub mod rules;
pub mod solver;
