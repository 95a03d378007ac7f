//! Maximal admissible invariant sets of switching linear systems under
//! polynomial constraints, computed by lifting to monomial coordinates and
//! iterating polyhedral pre-images.

use openblas_src as _;

pub mod certificates;
pub mod engine;
pub mod error;
pub mod polyhedra;
pub mod polylift;

pub use error::{Error, Result};
