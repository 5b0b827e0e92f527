//! Dynamic per-level loss weighting for multi-objective training loops.
//!
//! Training several loss streams at once — e.g. one per resolution level
//! of a multi-scale model — rarely treats every stream fairly: magnitudes
//! differ by orders of magnitude and the noisiest stream dominates the
//! gradient. This crate implements a framework-independent controller
//! that watches the raw per-level loss values and periodically re-weights
//! them:
//!
//! * [`ledger`] accumulates the loss stream and computes per-interval
//!   sums, variances, and variance reduction rates;
//! * [`weighting`] turns those statistics into per-level weight vectors
//!   via four update actions (`a0`..`a3`);
//! * [`policy`] houses the probabilistic action selector and the
//!   [`policy::Controller`] that runs once per interval boundary;
//! * [`testbed`] provides synthetic multi-level optimization problems and
//!   a plain gradient-descent trainer for end-to-end experiments;
//! * [`trace_io`] parses recorded loss logs and replays the controller
//!   over them offline;
//! * [`audit`] is a seeded self-check suite over the crate's numerical
//!   invariants;
//! * [`cli`] exposes everything as the `scale-balancer` binary.
//!
//! Two controller modes matter most: `avw` always boosts the levels whose
//! loss variance is collapsing fastest, and `rlo` treats the four update
//! actions as bandit arms whose selection probabilities are awarded or
//! punished by the sign of the change in total interval loss.

pub mod audit;
pub mod cli;
pub mod ledger;
pub mod policy;
pub mod rng;
pub mod testbed;
pub mod trace_io;
pub mod weighting;

pub use ledger::{IntervalStats, LossTrace, WeightVector};
pub use policy::{Controller, ControllerMode, Policy, PolicyParams, StepReport};
pub use testbed::{make_problem, run_ablation, train, ProblemSpec, RunTrace, TrainConfig};
pub use weighting::{Action, SelectionConfig};
