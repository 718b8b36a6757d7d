//! Numerical Hermitian-Yang-Mills flow and perturbed Hermitian-Einstein solvers
//! for holomorphic vector bundles over model Riemann surfaces (the round
//! projective line and flat tori).
//!
//! Layers, bottom up:
//! - [`linalg_hermitian`]: fiberwise dense Hermitian algebra.
//! - [`hn_algebra`]: exact Harder-Narasimhan bookkeeping on rational slope vectors.
//! - [`base_manifold`]: surface meshes, scalar Laplacian, Poisson and heat solvers.
//! - [`bundle_geometry`]: Hermitian metrics on bundles, curvature, slope invariants.
//! - [`chern_forms`]: pointwise Chern-form identities on surfaces.
//! - [`hym_flow`]: Donaldson's heat flow and its monitors.
//! - [`continuity_solver`]: the perturbed equation along a decreasing parameter path.

pub mod base_manifold;
pub mod bundle_geometry;
pub mod chern_forms;
pub mod continuity_solver;
pub mod hn_algebra;
pub mod hym_flow;
pub mod linalg_hermitian;

pub use linalg_hermitian::{CMat, C64};
