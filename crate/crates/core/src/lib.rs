//! Black-box quantum control via a recurrent stochastic policy trained with a
//! memory-augmented clipped policy-gradient loop.
//!
//! The crate simulates two controlled quantum systems (a qubit coupled to a
//! spin bath, and a small transverse-field Ising chain), models sequences of
//! control parameters with a two-layer LSTM, and optimizes the policy with a
//! sequence-level clipped surrogate plus a buffer of the best sequences found
//! so far. Exhaustive and random-search oracles provide independent ground
//! truth at desk scale.

pub mod dd;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod sequence;
pub mod trainer;

pub use error::{QctrlError, Result};
pub use linalg::{ComplexOperator, Pauli, StateVector};
pub use sequence::{ActionStep, ControlSequence, SampledSequence};
