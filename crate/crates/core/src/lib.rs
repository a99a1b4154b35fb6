//! Adaptive guaranteed-performance consensus for high-order linear multiagent
//! systems.
//!
//! The crate covers the whole pipeline:
//!
//! * [`synthesis`] computes the protocol gains `K_u = BᵀP`, `K_w = PBBᵀP` from a
//!   translated Riccati equation, for the leaderless and leader-follower cases,
//!   and regulates the gain magnitude through the translation factor.
//! * [`sim`] integrates the agent states together with the adaptive edge
//!   weights and the realised/guaranteed cost integrals.
//! * [`verify`] turns a finished run into a [`verify::CostReport`].
//! * [`graph`] and [`matops`] provide the Laplacian machinery and the dense
//!   linear-algebra kernel underneath.
//!
//! [`config`], [`trace_io`] and [`demos`] carry the file formats and the two
//! embedded example systems used by the command-line tool.

pub mod config;
pub mod demos;
pub mod error;
pub mod graph;
pub mod matops;
pub mod sim;
pub mod synthesis;
pub mod tolerances;
pub mod trace_io;
pub mod verify;

pub use error::{Error, Result};
pub use matops::Matrix;
