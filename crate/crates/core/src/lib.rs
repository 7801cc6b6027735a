//! Max-atom constraint systems: exact model, simplification rules, graph
//! machinery, the decision procedure, reference oracles and a
//! differential-testing harness.

pub mod campaign;
pub mod format;
pub mod generate;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rules;
pub mod solver;

pub use model::{Assignment, AtomSet, AtomSystem, ExtValue, MaxAtom, Offset, Rational, VarId};
pub use oracle::{exhaustive_search, kleene_descent, oracles_agree, OracleVerdict, Verdict};
pub use solver::{algorithm_a, SolveOutcome, SolveReport, StepCounters};
