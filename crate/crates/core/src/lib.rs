//! Time-dependent mechanics with nonholonomic constraints.
//!
//! The crate evaluates dynamic equations on the jet space `(t, q, v)`,
//! decomposes them into a constraint-compatible part and an ideal reaction,
//! transports the result to momentum phase space through the Legendre map,
//! and lifts first-order flows to their vertical (Jacobi-field) extension.

pub mod bundle;
pub mod constraint;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod hamilton;
pub mod integrate;
pub mod linalg;
pub mod projection;
pub mod report;
pub mod vertical;

pub use error::{Error, Result};
