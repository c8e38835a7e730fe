//! Numerical core for traveling-Maxwellian kinetics.
//!
//! The crate implements, at desk scale:
//!
//! * exact algebra of traveling Maxwellians (evaluation, conserved-moment
//!   maps and their Newton inversion),
//! * a discrete non-cutoff Boltzmann collision operator with an angular
//!   cutoff, built as a conservative deposit quadrature,
//! * phase-space diagnostics: commuting vector fields `X`, `Y`, weighted
//!   energy norms, truncated analytic norms, relative entropy,
//! * the three-step change of variables linking lab-frame solutions to the
//!   Strichartz-scaled Boltzmann equation (SSBE),
//! * an SSBE time integrator with exact characteristic transport, explicit
//!   collision substeps, a Picard/cutoff approximation scheme and
//!   scattering-limit extraction.
//!
//! All heavy loops are data-parallel over fixed work chunks (feature
//! `parallel`, on by default); reductions use worker-count-independent
//! orders so outputs are bit-identical for any thread count.

pub mod collision;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod maxwellian;
pub mod phase;
pub mod quadrature;
pub mod reduce;
pub mod scenario;
pub mod solver;
pub mod transform;
pub mod transport;

pub use error::{Error, Result};
