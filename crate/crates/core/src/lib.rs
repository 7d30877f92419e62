//! Pseudospectral kernels for the Euler-Korteweg system on periodic boxes,
//! the Gross-Pitaevskii comparison model and the dispersive diagnostics
//! used to study long-time behaviour.

pub mod bilinear;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod gp;
pub mod grid;
pub mod laws;
pub mod model;
pub mod multiplier;
pub mod ode;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Field, ValueKind};
pub use grid::FourierGrid;
pub use laws::{Capillarity, ConstitutiveLaws, Pressure};
pub use model::{EKState, ExtendedState};
