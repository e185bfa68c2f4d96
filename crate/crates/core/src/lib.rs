//! Stochastic wavefunction simulation of open qubit systems under a thermal
//! collision model.
//!
//! A system of `N` qubits repeatedly collides with fresh thermal ancilla
//! qubits through a partial swap, then evolves freely under its own
//! Hamiltonian. Instead of propagating the `2^N x 2^N` density matrix, each
//! trajectory carries a single state vector: the thermal ancilla is drawn as a
//! random-phase state and the ancilla is traced out by choosing one of the two
//! conditional branches at random with the correct weight. Averaging the outer
//! products of `K` trajectories recovers the density matrix, with a squared
//! element-wise error decaying as `1/K`.
//!
//! Module map:
//!
//! * [`state`]: dense state vectors and big-endian basis labels.
//! * [`ops`]: Hamiltonians, swap and partial-swap unitaries, free propagators,
//!   density matrices.
//! * [`stochastic`]: reproducible random streams, random-phase states,
//!   thermal ancillas.
//! * [`ptrace`]: branch decomposition of a pure-state partial trace and its
//!   Monte Carlo selection.
//! * [`engine`]: collision steps, trajectories, the exact density-matrix map
//!   and ensemble accumulation.
//! * [`bench`]: experiment configuration, distance metric, convergence scans
//!   and on-disk artifacts.
//!
//! Qubits are numbered from 1, and qubit 1 is the most significant bit of a
//! basis index.

pub mod bench;
pub mod engine;
mod error;
pub mod ops;
pub mod ptrace;
pub mod state;
pub mod stochastic;

pub use error::{Error, Result};

/// Double-precision complex scalar used for every amplitude and matrix entry.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix used for operators and density matrices.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Largest register the dense representations accept.
pub const MAX_QUBITS: usize = 20;
