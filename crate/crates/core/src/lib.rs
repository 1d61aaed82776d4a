//! Nonlinear quantum error correction for parametrized state families.
//!
//! The crate builds Kraus channels and sampled state alphabets, solves the
//! correctability criterion for a mixing matrix `u` and coefficient table
//! `c`, and constructs the recovery channel from that solution.

pub mod error;
pub mod alphabets;
pub mod channels;
pub mod criterion;
pub mod hilbert;
pub mod numkit;
pub mod recovery;

pub use error::{Error, Result};
pub use numkit::{CMatrix, CVector, Tolerances};
