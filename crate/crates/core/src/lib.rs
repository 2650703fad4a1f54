//! Dephasing-robust transport in one-dimensional chains.
//!
//! The crate builds quasi-periodic and random-matrix chain Hamiltonians,
//! evolves a localized excitation under pure dephasing either exactly
//! (Lindblad master equation) or stochastically (quantum-drift
//! trajectories), and extracts diffusion coefficients and steady-state
//! currents that can be compared against closed-form predictions.
//!
//! ```
//! use qdiffusion::analysis::universal_law;
//! use qdiffusion::lattice::{coherent_predictions, ModelSpec};
//!
//! let critical = coherent_predictions(&ModelSpec::hhaa(1000, 2.0)).unwrap();
//! let d0 = critical.d0().unwrap();
//! let tau_w = critical.tau_w().unwrap();
//! // diffusion at decoherence time τ_φ = 10 τ_W
//! let d = d0 * universal_law(0.1);
//! assert!(d < d0 && d > 0.99 * d0);
//! # let _ = tau_w;
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod lindblad;
pub mod linalg;
pub mod observables;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
pub use lattice::{build_hamiltonian, Hamiltonian, ModelKind, ModelSpec};
pub use observables::ObservableSeries;
pub use units::Units;
