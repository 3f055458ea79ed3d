//! skyq — a spatial catalog engine for point sources on the celestial sphere.
//!
//! The engine is built from a hierarchical triangular mesh over the sphere
//! (quad-tree trixels rooted at an octahedron), a half-space region algebra
//! that all spatial predicates reduce to, a trixel-partitioned object store
//! with a tag/full vertical split, a small query language executed as a
//! streaming query execution tree, and spatial hash joins for pairwise
//! searches.

pub mod error;
pub mod htm;
pub mod queryl;
pub mod cli;
pub mod sphere;
pub mod store;

pub use error::{Error, Result};
