//! Exact combinatorial sheaf theory on rational fans.
//!
//! The crate constructs the homotopy categories of injective stable sheaves
//! attached to a rational quasifan with a combinatorial completion, builds
//! the costandard / standard / simple / injective perverse objects, applies
//! the Koszul duality functor between the face lattices of a cone and its
//! dual, and cross-checks stalk data against the equivariant
//! (piecewise-polynomial) minimal extension sheaves.

pub mod dcat;
pub mod equivariant;
pub mod exterior;
pub mod fan;
pub mod jsonio;
pub mod koszul;
pub mod perverse;
pub mod qlinalg;
pub mod samples;
pub mod site;
