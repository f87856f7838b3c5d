pub mod bignum;
pub mod cli;
pub mod convolution;
pub mod dft;
pub mod error;
pub mod fourier;
pub mod regularity;
pub mod restriction;
pub mod schedule;
pub mod tree;

pub use error::{Error, Result};
