//! Synthesis and cost analysis of ReLU-budgeted CNN architectures for
//! private inference.
//!
//! The crate models stem/stages/head residual networks as immutable value
//! types, counts their ReLUs, FLOPs, and parameters exactly, solves the
//! ReLU-equalization inequalities that generate HybReNet configurations,
//! applies the coarse-grained ReLU-optimization rewrites (cull, thin,
//! channel scaling, ReLU-reuse), and estimates private-inference latency
//! and storage from a calibratable garbled-circuit + homomorphic cost
//! model. Everything is a pure function over immutable specs and safe to
//! use concurrently.

pub mod accounting;
pub mod cli;
pub mod cost;
pub mod criticality;
pub mod equalization;
pub mod error;
pub mod network;
pub mod pareto;
pub mod report;
pub mod transforms;

pub use error::{Error, Result};
pub use network::{build_family, Family, InputDims, NetworkSpec, ScalingMethod, StageSpec};
