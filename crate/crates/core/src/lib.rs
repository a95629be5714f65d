//! Bicausal optimal transport between discrete-time stochastic processes.
//!
//! Three solvers share one data model:
//!
//! * [`bicausal::backward_lp_value`]: exact backward induction on
//!   non-recombining scenario trees built by [`tree::build_tree`];
//! * [`bicausal::nested_sinkhorn_value`]: the same recursion with an entropic
//!   one-step problem;
//! * [`fvi::fit_value_functions`]: fitted value iteration with a separable
//!   neural cost-to-go and empirical one-step transport targets.
//!
//! [`oracle::exact_value`] gives the closed-form value for Gaussian random
//! walks under the quadratic cost, which all three are checked against.

pub mod bicausal;
pub mod fvi;
pub mod linalg;
pub mod oracle;
pub mod ot;
pub mod process;
pub mod rng;
pub mod tree;
