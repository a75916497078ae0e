//! Dense complex linear algebra on one- and two-qubit spaces, density-matrix
//! validation, and state-distance metrics.

mod eigen;
mod matrix;
mod state;

pub use eigen::{hermitian_eigen, hermitian_eigenvalues, HermitianEigen};
pub use matrix::{embed, gates, tensor, ComplexMatrix};
pub use state::{
    apply_kraus, apply_unitary, bloch_vector, expectation, fidelity, kraus_completeness_residual,
    random_density_matrix, random_pure_state, trace_distance, BlochVector, DensityMatrix,
    HERMITIAN_TOL, PSD_TOL, TRACE_TOL,
};

pub(crate) use matrix::ONE;
pub(crate) use state::apply_kraus_unchecked;
