//! Partitioned coupling of finite-element and POD-Galerkin reduced models
//! for advection-diffusion transmission problems.
//!
//! The domain is split into subdomains that exchange fluxes through a
//! Lagrange-multiplier trace space on the shared interface. Each time-step
//! evaluation recovers the interface flux from a small dual Schur-complement
//! solve, after which the subdomain updates decouple — so any side can be
//! a full finite-element model or a projection-based reduced model without
//! changing the coupling algebra.
//!
//! Module map:
//! - [`mesh`]: structured Q1 subdomain meshes, node classification,
//!   coupled/global mesh builders.
//! - [`assembly`]: mass/diffusion/advection operators, interface coupling,
//!   Dirichlet lifts and corrections.
//! - [`fields`]: velocity/scalar coefficient fields.
//! - [`linalg`]: sparse wrappers, mass factorizations, thin SVD.
//! - [`integrate`]: explicit time integrators and step scheduling.
//! - [`coupling`]: the partitioned two-subdomain solver, the monolithic
//!   reference solver, and the single-domain solver.
//! - [`rom`]: snapshot collection, POD bases, reduced operators,
//!   basis persistence.
//! - [`hybrid`]: mixed full/reduced coupling with the same flux-recovery
//!   step.

pub mod assembly;
pub mod coupling;
pub mod error;
pub mod fields;
pub mod hybrid;
pub mod integrate;
pub mod linalg;
pub mod mesh;
pub mod rom;

pub use error::{IvrError, Result};
