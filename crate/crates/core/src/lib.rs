//! Shifted stationary states of the focusing NLS equation on weighted star
//! graphs: construction, point spectra by shooting, discrete linearized
//! operators, and a conservative time integrator.
//!
//! Start from [`graph::StarGraph`] and [`stationary::shifted_state`]; the
//! [`verify`] module bundles the end-to-end acceptance checks.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod ode;
pub mod operators;
pub mod roots;
pub mod shooting;
pub mod stationary;
pub mod verify;
