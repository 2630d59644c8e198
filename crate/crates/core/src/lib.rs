//! Simulation, optimization and analysis of QAOA-driven state transfer on a
//! one-dimensional XY qubit chain.
//!
//! Both QAOA generators conserve the number of spin excitations, so a single
//! excitation starting on site 1 never leaves the `N`-dimensional
//! single-excitation sector. Everything in this crate works in that sector:
//!
//! * [`subspace`] exact evolution, transfer fidelity and its adjoint gradient,
//!   plus a dense full-Hilbert-space oracle for cross-checking.
//! * [`spectral`] transition amplitudes, the Grover-oracle ansatz and its
//!   expansion over integer compositions, small-`δ` scaling predictions.
//! * [`optimizer`] multi-start projected L-BFGS over QAOA durations.
//! * [`lieb_robinson`] light-cone bounds on the success probability.
//! * [`pontryagin`] costate integration and bang-bang optimality checks.
//! * [`experiments`] grid campaigns, CSV persistence, fits and threshold-time
//!   searches.

pub mod error;
pub mod experiments;
pub mod lieb_robinson;
pub mod optimizer;
pub mod pontryagin;
pub mod spectral;
pub mod subspace;

pub use error::{Error, Result};
pub use optimizer::{OptimizationResult, OptimizerConfig, OptimizerMode, RestartRecord};
pub use subspace::{ExcitationVector, Schedule, SpectralDecomposition};

pub use num_complex::Complex64;
