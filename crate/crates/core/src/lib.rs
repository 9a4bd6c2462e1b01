//! Post-hoc refinement of open-vocabulary 3D detections with common-sense
//! constraints and a Łukasiewicz soft-logic solver.

pub mod balancers;
pub mod cli;
pub mod commonsense;
pub mod config;
pub mod geometry;
pub mod pipeline;
pub mod psl;
