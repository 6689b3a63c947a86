//! Fluid scheduling analysis for dual-criticality sporadic task systems on
//! identical multiprocessors.
//!
//! The crate provides:
//!
//! - an exact task model over arbitrary-precision rationals ([`model`],
//!   [`rat`]);
//! - the exact dual-rate schedulability test and an optimal dual-rate
//!   assigner ([`dualrate`]);
//! - the multi-rate transition-window model with its sufficient test
//!   ([`multirate`]) and a rate/window assignment search ([`soma`]);
//! - a seeded task-set generator ([`taskgen`]);
//! - a deadline-partitioned runtime simulator that acts as an oracle for
//!   accepted assignments ([`simulator`]);
//! - an experiment harness producing acceptance-ratio tables and plots
//!   ([`experiment`]).

pub mod dualrate;
pub mod experiment;
pub mod fixtures;
pub mod model;
pub mod multirate;
pub mod rat;
pub mod simulator;
pub mod soma;
pub mod taskgen;

pub use dualrate::{dual_rate_assign, dual_rate_test, DualRateAssignment, DualRateVerdict};
pub use model::{Criticality, MCTask, SystemUtilization, TaskSet};
pub use multirate::{embed_dual_rate, multi_rate_test, MultiRateAssignment, MultiRateVerdict};
pub use rat::{Rat, Round};
pub use soma::{soma, SomaOutcome, SomaParams};
pub use taskgen::{generate, GeneratorConfig};
