//! Discrete movable-antenna placement optimization for MISO-OFDM links.
//!
//! A transmitter carries `N_t` movable antennas on a linear rail of length
//! `A` metres, sampled into `M` candidate positions with a minimum spacing
//! between any two antennas. Placements are paths in a DAG over the sampling
//! positions; the library finds the placement (jointly with water-filled
//! per-subcarrier power allocation) that maximizes the achievable rate of the
//! wideband link.
//!
//! Modules:
//! - [`grid`]: sampling grid, placement DAG, lazy placement enumeration and
//!   the fixed-hop best-gain dynamic program.
//! - [`channel`]: seeded field-response channel realizations and per-position
//!   frequency responses.
//! - [`power`]: water-filling, the achievable-rate objective and MRT
//!   beamforming.
//! - [`solver`]: branch-and-bound, brute force, low-SNR and narrowband
//!   solvers plus the fixed-position baseline.
//! - [`harness`]: configuration-driven Monte Carlo sweeps with CSV and
//!   plot-data emission.

pub mod channel;
pub mod error;
pub mod grid;
pub mod harness;
pub mod power;
pub mod solver;

pub use channel::{ChannelModelParams, WidebandChannel};
pub use error::Error;
pub use grid::{AntennaPlacement, PlacementGraph, SamplingGrid};
pub use power::{PowerAllocation, SystemParams};
pub use solver::{BbConfig, SolveResult, SolveStats};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
