//! Optimal-transport meshfree (OTM) particle solver for advection-diffusion.
//!
//! Density is carried by material points (Dirac masses of constant mass).
//! Diffusion moves a set of nodes ballistically with velocities `M⁻¹f`, and the
//! nodal map is interpolated onto the material points with local max-entropy
//! shape functions; advection is applied as an exact pushforward of the flow.
//!
//! Module map:
//! - [`domain`]: closed-form signed-distance containers and boundary projection.
//! - [`discretization`]: Delaunay seeding and particle→node neighbor lists.
//! - [`maxent`]: local max-entropy shape functions.
//! - [`solver`]: the fractional-step time integrator.
//! - [`oracle`]: exact discrete Wasserstein distance, entropy and JKO functional.
//! - [`config`] and [`io`]: configuration, snapshots and run histories.

// `!(x > 0.0)` is used on purpose so NaN fails the positivity guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod discretization;
pub mod domain;
pub mod error;
pub mod io;
pub mod maxent;
pub mod oracle;
pub mod solver;

/// Points and vectors in physical space.
pub type Point = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

pub use config::SimConfig;
pub use discretization::{MaterialPointSet, NeighborTable, NodeSet};
pub use domain::Domain;
pub use error::{OtmError, Result};
pub use maxent::{LmeParams, ShapeTable};
pub use oracle::{DiscreteMeasure, TransportPlan};
pub use solver::{AdvectionField, RunHistory, Simulation, StepDiagnostics};
