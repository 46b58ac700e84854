//! Joint service-function placement and flow routing.
//!
//! Instances describe a directed network with link and node capacities,
//! the nodes able to host each service function, and flows that must visit
//! a chain of functions in order. The crate builds the mixed-binary LP of
//! that problem, solves its relaxation, and drives it to binary placements
//! with a penalty continuation (PSUM, PSUM-R) or with cheaper heuristics.

pub mod bench;
pub mod formulation;
pub mod generate;
pub mod heuristics;
pub mod io;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod psum;
pub mod rng;
pub mod verify;

pub use model::{
    FractionalPlacement, InstanceBuilder, ModelError, Placement, PlacementKind, ProblemInstance, RoutingPlan,
    ServiceRequest, Solution, SolutionStatus,
};
