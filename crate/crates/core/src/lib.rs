//! Minimum-energy paths between minima of differentiable loss landscapes.
//!
//! The crate is organised bottom-up:
//!
//! * [`landscape`]: the differentiable scalar field abstraction, analytic
//!   test surfaces, a small multilayer perceptron and a momentum trainer.
//! * [`chain`]: the discretised path: pivots, arc length, redistribution
//!   and the tangent rule.
//! * [`neb`]: nudged forces and the string-method relaxation loop.
//! * [`autoneb`]: cycles of relaxation with dense evaluation and pivot
//!   insertion.
//! * [`explorer`]: the graph of minima, its minimum spanning tree and the
//!   exploration heuristic that lowers the worst tree edge.
//! * [`oracle`]: exact minimax paths on dense 2D grids.
//! * [`io`]: JSON and CSV formats shared by the CLI and bindings.

pub mod autoneb;
pub mod chain;
pub mod error;
pub mod explorer;
pub mod io;
pub mod landscape;
pub mod neb;
pub mod optim;
pub mod oracle;

pub use autoneb::{auto_neb, AutoNebOutcome, AutoNebSchedule, NebCycle, SaddleRecord, SaddleSource};
pub use chain::{Chain, PivotLosses};
pub use error::{Error, Result};
pub use explorer::{explore, ExploreConfig, LandscapeGraph};
pub use landscape::{Evaluation, Landscape, ParamVector};
pub use neb::{neb_relax, NebConfig};
pub use oracle::{grid_mep, GridSpec};
