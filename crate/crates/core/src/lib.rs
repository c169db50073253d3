#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fpf;
pub mod harness;
pub mod phase;
pub mod qlearn;
pub mod rng;
pub mod sensor;

pub use error::{Error, Result};
