//! Exact dense simulation of small quantum systems: states, measurements,
//! Born-rule sampling and the Hermitian spectral tools the Helstrom
//! construction needs.

pub mod linalg;
pub mod povm;
pub mod state;

pub use linalg::{
    hermitian_eig, positive_eigenprojector, trace_norm, CMatrix, HermitianEigen, DEFAULT_EIG_TOL,
};
pub use povm::{
    born_distribution, born_probabilities, computational_basis_povm, sample_outcome,
    sic_povm_qubit, OutcomeDistribution, Povm,
};
pub use state::{tensor_power, validate_density, DensityMatrix, DEFAULT_DIM_CAP};
