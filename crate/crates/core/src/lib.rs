#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod integrability;
pub mod kernels;
pub mod lie;
pub mod linalg;
pub mod operators;
pub mod reflection;

pub use error::{Error, Result};
