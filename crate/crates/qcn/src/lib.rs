//! Quantum causal networks: finite-dimensional quantum states and operations,
//! sequenced association graphs, undisturbed joint-state construction, and
//! intervention operators, with a brute-force oracle for the classical limit.

pub mod intervene;
pub mod linalg;
pub mod model;
pub mod network;
pub mod oracle;
pub mod qop;
pub mod qstate;
pub mod sag;

pub use linalg::{ComplexMatrix, SpectralDecomposition, C64, DEFAULT_DIM_CAP, DEFAULT_TOL};
pub use network::{JointState, LocalComponents, LocalDistribution, QuantumCausalNetwork};
pub use qop::{FiducialSet, QuantumOperation};
pub use qstate::{DensityOperator, Hamiltonian, ProjectionSet};
pub use sag::{CnSet, Sag};
