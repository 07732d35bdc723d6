//! Planning and simulation of one-round multiway joins on heterogeneous
//! machine fleets.
//!
//! The pipeline is `bounds -> partition -> packing -> engine`:
//!
//! * [`query`] and [`lp`] model full conjunctive queries as hypergraphs and
//!   solve the fractional vertex cover / edge packing LPs exactly.
//! * [`cost`] holds per-machine cost functions and their pseudo-inverses.
//! * [`bounds`] computes load lower bounds (linear, general cost, unequal
//!   cardinalities) and the matching upper-bound predictions.
//! * [`partition`] sizes one hyperrectangle of the output space per machine.
//! * [`packing`] rounds, merges and scales the hyperrectangles into a
//!   disjoint cover of the grid `[n]^k`.
//! * [`datagen`] produces matching and dense databases.
//! * [`engine`] routes tuples, runs the local joins and accounts loads.

pub mod bounds;
pub mod cost;
pub mod datagen;
pub mod engine;
mod error;
pub mod lp;
pub mod packing;
pub mod partition;
pub mod plan;
pub mod query;

pub use error::{Error, Result};

pub use bounds::{BoundReport, InstanceSchema, SizeUnit};
pub use cost::{CostFunction, Machine, MachineFleet};
pub use datagen::{DatabaseInstance, DenseSpec, Distribution, MatchingSpec, Relation};
pub use engine::{HashFamily, HashMode, LoadReport, RoundResult};
pub use lp::{EdgePacking, VertexCover};
pub use packing::Placement;
pub use partition::{Hyperrectangle, Partition, TriangleLabel, TriangleProfile};
pub use plan::{Plan, PlanKind};
pub use query::{Atom, Query, QueryShape};
