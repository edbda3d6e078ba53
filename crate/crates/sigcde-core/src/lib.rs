//! Selective state-space layers viewed as linear controlled differential
//! equations, with the truncated-signature machinery needed to analyse them.
//!
//! Everything here runs on `alloc` only; file formats, threads and the CLI
//! live in the `sigcde` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod cde;
pub mod chain;
pub mod error;
pub mod experiments;
pub mod features;
pub mod linalg;
pub mod path;
pub mod signature;
pub mod ssm;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use path::Path;
