// Guards of the form `!(x > 0.0)` are deliberate: they reject NaN, which the
// suggested `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Attitude synchronization of networked rigid bodies on SO(3).
//!
//! Rigid-body attitudes are represented as axis-angle vectors and driven by
//! discontinuous consensus protocols over an undirected communication graph.
//! The crate provides the kinematics (`so3`), graph machinery (`graph`), the
//! protocol controllers (`control`), a Filippov-aware simulator (`sim`),
//! convergence diagnostics (`analysis`), and scenario handling plus artifact
//! output for the `attsync` command line tool (`scenario`).

pub mod analysis;
pub mod control;
pub mod graph;
pub mod scenario;
pub mod sim;
pub mod so3;
