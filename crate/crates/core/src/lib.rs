//! Spacecraft proximity-operations simulator.
//!
//! Relative motion about a circular-orbit chief is modelled with the
//! Clohessy-Wiltshire-Hill equations (with a nonlinear two-body + J2
//! reference propagator alongside). Deputies fly point-to-point waypoint
//! legs under either an analytic baseline controller or a small neural
//! policy trained with a clipped-surrogate policy gradient. A runtime
//! assurance filter built from higher-order control barrier functions
//! minimally modifies each deputy's thrust by solving a relaxed QP.

pub mod cbf;
pub mod cli;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod qp;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
