#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod eft;
pub mod error;
mod expansion;
pub mod mcfloat;

pub use error::{Error, Result};
pub use mcfloat::{DoubleDouble, MultiFloat, QuadDouble, TripleDouble};
pub mod matrix;

pub use matrix::{Matrix, Scalar};
pub mod ozaki;
pub use ozaki::{ozaki_gemm, GemmBackend, OzakiProfile, ReferenceBackend};
pub mod oracle;
pub use oracle::ExactScalar;
pub mod gen;
pub mod lu;
