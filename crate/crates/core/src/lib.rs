//! Stochastic flows on one-dimensional semigroups, their noise sensitivity,
//! and exact chaos analysis on finite product spaces.
//!
//! ```
//! use flownoise::flows::{build_flow, n_point_motion, ArratiaLattice};
//! use flownoise::rng::replica_rng;
//!
//! let model = ArratiaLattice::new(16)?;
//! let mut rng = replica_rng(1, 0);
//! let flow = build_flow(&model, 100, &mut rng)?;
//! let paths = n_point_motion(&flow, &[0, 4, 8])?;
//! assert_eq!(paths[0].positions.len(), 101);
//! # Ok::<(), flownoise::Error>(())
//! ```

pub mod chaos;
pub mod checks;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod flows;
pub mod perturb;
pub mod rng;
pub mod semigroups;
pub mod stats;
pub mod sticky_exact;

pub use error::{Error, Result};
