//! Quantum stochastic neural network (QSNN) classifier.
//!
//! The network state is a density matrix over neurons. A word sequence is
//! encoded by opening dissipative channels from the input neuron into word
//! neurons, mixed coherently by a trainable Hamiltonian, and read out by
//! trainable dissipative channels into output neurons. Training is plain
//! gradient descent with analytic gradients obtained from Fréchet derivatives
//! of the stage propagators.

pub mod classical;
pub mod corpus;
pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod network;
pub mod report;
pub mod training;

pub use error::{QsnnError, Result};
