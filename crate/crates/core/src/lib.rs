//! Affine differential geometry of J̃-tangent affine hyperspheres, evaluated
//! with exact derivative jets.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod families;
pub mod hypersurface;
pub mod jets;
pub mod paracomplex;
pub mod verify;

pub use error::{GeomError, Result};
