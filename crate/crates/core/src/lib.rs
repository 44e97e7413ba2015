//! Spectral simulation and adjoint-based optimal control of the
//! Cahn–Hilliard–Oono system with the control acting in the mass term:
//!
//! ```text
//! ∂ₜφ + φ − Δμ = u,    μ = −Δφ + f′(φ)    in Ω × (0, T),
//! ∂ₙφ = ∂ₙμ = 0 on ∂Ω,   φ(0) = φ₀,
//! ```
//!
//! on an axis-aligned rectangle, discretized with the Neumann cosine
//! eigenbasis. The crate provides the forward solver, a Faedo–Galerkin
//! reference integrator, the tangent and exact discrete adjoint models, a
//! projected-gradient optimizer over the admissible controls and a
//! verification harness.

pub mod control;
pub mod error;
pub mod galerkin;
pub mod harness;
pub mod potentials;
pub mod rng;
pub mod sensitivity;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
