//! Finite-difference micromagnetics for spin-transfer-torque switching of a
//! cross-shaped free layer.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod io;
pub mod fields;
pub mod macrospin;
pub mod materials;
pub mod mesh;
pub mod vec3;

pub use error::{Error, Result};
pub use field::VectorField;
pub use vec3::Vec3;
