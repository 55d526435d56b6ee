//! Simulation laboratory for local fast-failover routing on cliques.
//!
//! A network is a clique of `n` nodes; a [`FailureScenario`] removes links.
//! Schemes come in two shapes: per-flow [`FailoverMatrix`] rows (RFS, DFS)
//! and destination-based [`HopRule`]s (Bal, Rob). [`evaluate`] routes a
//! traffic pattern and reports per-link loads; the [`adversary`] module
//! builds random and worst-case failure sets; [`experiments`] sweeps them.

pub mod adversary;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod routing;
pub mod schemes;
pub mod topology;

pub use error::{Error, Result};
pub use routing::{evaluate, FailoverScheme, LoadReport, PathStatus, PathVerdict, TrafficPattern};
pub use schemes::{DestMode, FailoverMatrix, FlowId, HopRule, SchemeTag};
pub use topology::{FailureScenario, Link, NodeId, ScenarioSource, Topology};
