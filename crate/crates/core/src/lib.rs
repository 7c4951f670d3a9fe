//! Optimizers built from interchangeable momentum, adaptive-rate and update rules.
//!
//! The [`optim`] module composes SGD, Adagrad, Adam and RMSProp with additive,
//! multiplicative (sign-preserving, magnitude-proportional) or hybrid updates. Around it
//! sit the 2-D benchmark [`objectives`], a learning-rate [`tuner`], the experiment
//! [`harness`] and a small MLP trainer in [`nn`].

pub mod error;
pub mod harness;
pub mod nn;
pub mod objectives;
pub mod optim;
pub mod tuner;

pub use error::{Error, Result};
pub use objectives::{FunctionId, Objective, TaskConfig};
pub use optim::{Family, Optimizer, OptimizerSpec, OptimizerState, RuleKind, UpdateRule};
