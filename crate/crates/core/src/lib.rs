//! Self-adaptation runtime: runtime quantitative verification of parametric
//! Markov models, a deadline-bounded MAPE loop, explicit-state checking of
//! the controller automata, and dynamically instantiated GSN arguments.

pub mod automata;
pub mod deadline;
pub mod digest;
pub mod expr;
pub mod fx;
pub mod gsn;
pub mod harness;
pub mod mape;
pub mod model;
pub mod uuv;
pub mod verifier;
