//! Lighthill-Whitham-Richards traffic flow on road networks.
//!
//! Junctions are resolved by priority-based Riemann solvers ([`junction`]),
//! boundary traces are reconstructed from junction fluxes ([`trace`]) and the
//! network is evolved with a Godunov finite-volume scheme ([`engine`]).
//! [`diagnostics`] measures the interaction functionals used to study
//! wave-junction interactions.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod flux;
pub mod junction;
pub mod scenario;
pub mod trace;

pub use engine::{Network, Trajectory};
pub use error::{Error, Result};
pub use flux::{Branch, FluxModel};
pub use junction::{ConstraintBounds, JunctionFluxes, JunctionSpec, SolverKind};
pub use scenario::Scenario;
pub use trace::BoundaryTrace;
