//! Symbolic-numeric toolkit for Lagrangian field theories with dissipation
//! on the phase bundle of k-velocities extended by k action coordinates.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] — immutable symbolic expression trees with a small DSL,
//!   differentiation, canonical normalisation, zero-testing and evaluation;
//! * [`chart`] — coordinate charts on the phase bundle;
//! * [`bundle`] — vector fields, lifts, k-vector fields and SOPDEs,
//!   differential forms and Cartan calculus;
//! * [`lagrangian`] — energy, contact one-forms, Hessian/regularity and the
//!   field-equation residual systems derived from a Lagrangian;
//! * [`symmetry`] — symmetry classification and dissipation-law construction;
//! * [`dissipation`] — symbolic and on-grid verification of dissipation laws;
//! * [`solver`] — finite-difference integrators and manufactured solutions
//!   for the example field equations;
//! * [`model`] / [`cli`] — the model-file format and the command-line front
//!   end.

pub mod bundle;
pub mod chart;
pub mod cli;
pub mod dissipation;
pub mod expr;
pub mod lagrangian;
pub mod model;
pub mod solver;
pub mod symmetry;
