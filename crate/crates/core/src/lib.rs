//! Minimal-change parameter tuning for discrete Bayesian networks.
//!
//! A network with some CPT entries replaced by parameters is compiled into a
//! parametric Markov chain; parameter lifting then certifies boxes of
//! parameter values as satisfying or violating a probabilistic constraint,
//! and the tuning loop searches for the closest satisfying instantiation.

pub mod bn;
pub mod error;
pub mod format;
pub mod oracle;
pub mod pla;
pub mod pmc;
pub mod poly;
pub mod refine;
pub mod synth;
pub mod tune;

pub use bn::{BayesNet, Constraint, Dag, Direction, EntryCoord, Literal, ParamAssignment, ParamBN, Variable};
pub use error::{Error, Result};
pub use pla::{RegionVerifier, Verdict};
pub use pmc::{Pmc, ReachSpec};
pub use poly::{Instantiation, Interval, Polynomial, RatFunc, Region};
pub use refine::{partition, PartitionResult};
pub use tune::{tune, Hyper, Measure, Status, TuneResult};
