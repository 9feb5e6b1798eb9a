//! Best-effort fair classification: proportional-fairness mixtures, the greedy
//! and reweighted heuristics, fictitious-play training against a linear-group
//! adversary, audit metrics, and a brute-force verifier for small instances.

pub mod audit;
pub mod befair;
pub mod data;
pub mod error;
pub mod greedy;
pub mod hpf;
pub mod model;
pub mod oracle;
pub mod pf_exact;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
pub use model::{group_error, group_utility, Dataset, Group, Hypothesis, RandomizedClassifier};
pub use oracle::{ExhaustiveOracle, LogisticOracle, Oracle, OracleConfig};
pub use pf_exact::{PfSolution, PfSolverConfig, UtilityMatrix};
