//! Mixed scalar curvature of multiply-foliated pseudo-Riemannian manifolds.

pub mod expr;
pub mod jet;
pub mod error;
pub mod geometry;
pub mod multiproduct;
pub mod connections;
pub mod models;
pub mod variational;
pub mod harness;
pub mod identities;
pub mod runner;
