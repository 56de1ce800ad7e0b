//! Reprogramming algebra for random permutations and ideal ciphers, the
//! classical and quantum measure-and-reprogram simulators, and numerical
//! checks of the lifting inequalities on small domains.

pub mod algebra;
pub mod battery;
pub mod bounds;
pub mod cipher;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod games;
pub mod lifting;
pub mod oracle;
pub mod perm;
pub mod qsim;
pub mod sim;

pub use error::{Error, Result};
