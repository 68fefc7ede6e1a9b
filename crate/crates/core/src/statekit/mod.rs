//! Complex state-vector engine.

pub mod dense;
pub mod hamiltonian;
pub mod kernels;
pub mod krylov;
pub mod spectral;
pub mod state;

pub use dense::{circuit_unitary, DenseOperator};
pub use hamiltonian::SparseHamiltonian;
pub use krylov::{exact_evolve_state, ExactEvolver, KrylovConfig};
pub use spectral::{exact_propagator_dense, Spectrum};
pub use state::StateVector;

/// Largest system handled with dense matrices.
pub const N_DENSE_CAP: usize = 12;
/// Largest system handled by Krylov propagation.
pub const N_KRYLOV_CAP: usize = 24;
