//! Finite-blocklength information theory toolkit.
//!
//! Computes capacities and capacity-achieving output distributions,
//! Neyman–Pearson β values, converse bounds with explicit constants, exact
//! code-induced output statistics, concentration transfers and ℓq-norm
//! profiles of Gaussian codes, and checks the inequalities relating them.
//!
//! Library values are in nats; [`numeric::LogBase`] converts for reporting.

pub mod divergences;
pub mod error;
pub mod gaussian_norms;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod space;
pub mod channels;
pub mod cli;
pub mod codes;
pub mod concentration;
pub mod converses;
pub mod testing;

pub use error::{FbError, Result};
pub use numeric::{ExtReal, LogBase};
pub use report::{BoundReport, Verdict};
