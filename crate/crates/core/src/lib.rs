//! Analog secure distributed matrix multiplication over the complex numbers.
//!
//! The product `AB` is outsourced to `N` honest-but-curious servers. Inputs
//! are split into blocks, masked with circular complex Gaussian noise, and
//! encoded as evaluations of a polynomial at the `N`-th roots of unity. Any
//! `K` responses decode the product; any `X` colluding servers learn at most
//! a configurable number of bits about the inputs.

pub mod codec;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod partition;
pub mod runtime;
pub mod security;

pub use error::{Error, Result};
