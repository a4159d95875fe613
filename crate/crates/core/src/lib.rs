//! Fractional p-Laplace exterior-value problems on uniform grids in one and
//! two dimensions, Dirichlet-to-Neumann pairings, and the reconstruction of
//! the kernel coefficient on the diagonal from exterior measurements.

// `!(x > 0.0)` rejects NaN together with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficient;
pub mod dnmap;
pub mod error;
pub mod grid;
pub mod inequalities;
pub mod optimize;
pub mod quadrature;
pub mod recon;
pub mod solver;
pub mod testfn;

pub use coefficient::{Coefficient, CoefficientFamily, Gamma, PairTable};
pub use dnmap::{dn_pairing, pairing_decomposition, Decomposition, PairingRecord};
pub use error::{Error, Result};
pub use grid::{build_domain, zero_extension, DomainSpec, GridDomain, GridFunction, Region};
pub use inequalities::{monotonicity_check, MonotonicityReport};
pub use recon::{
    exterior_determination, extrapolate, reconstruct_diagonal, stability_probe, ExperimentRecord,
    ExperimentRow, Extrapolation,
};
pub use solver::{solve_dirichlet, FracParams, SolveResult};
pub use testfn::{make_sequence, normalize_phi, tensor_bump, BumpProfile, TestSequenceConfig};
