pub mod catalog;
pub mod error;
pub mod exec;
pub mod kernels;
pub mod operators;
pub mod povm;
pub mod report;
pub mod reproduce;
pub mod sampler;
mod quad;
pub mod sets;
pub mod spec;

pub use error::{Error, Result};
