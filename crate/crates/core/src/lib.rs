//! Anytime online planning for POMDPs.
//!
//! The crate bundles everything needed to reproduce classic online POMDP
//! planning experiments at desk scale: sparse POMDP models with a
//! Cassandra-style text format, offline α-vector bounds (Blind, PBVI, MDP,
//! QMDP, FIB), an AND-OR search tree with pluggable node-selection
//! heuristics (Satia-Lave, BI-POMDP, AEMS1, AEMS2, HSVI-BFS), depth-limited
//! and Monte-Carlo planners (RTBSS, sparse observation sampling, rollout,
//! RTDP over discretized beliefs), the Tag / RockSample /
//! FieldVisionRockSample benchmark generators with factored belief
//! realizations, and an experiment harness that writes CSV metrics.

pub mod belief;
pub mod bounds;
pub mod domains;
pub mod error;
pub mod harness;
pub mod heuristics;
pub mod model;
pub mod parser;
pub mod planners;
pub mod tree;

pub use belief::{BeliefDynamics, BeliefState, FlatDynamics};
pub use bounds::{AlphaVector, AlphaVectorSet, BoundFunction, BoundKind, StateValueBound};
pub use error::{PomdpError, Result};
pub use model::{EnvironmentState, PomdpModel};
pub use tree::SearchTree;
