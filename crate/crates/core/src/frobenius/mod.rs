//! Linear Frobenius systems, flat frames, and the reconstruction of a local
//! Lie-algebra action from a flat connection.

mod frame;
mod grid;
mod pipeline;
mod system;

pub(crate) use frame::leaf_block_inverse;
pub use frame::{riemannian_a, FlatFrame};
pub use grid::{fd_weights, Grid, GridField, DEFAULT_HALF_WIDTH, DEFAULT_NODES};
pub use pipeline::{
    build_commuting_fields, flat_splitting, reconstruct, CommutingFields, InitialSplitting, ReconstructOptions,
    ReconstructionResult, ResidualReport, Splitting,
};
pub use system::{
    integrability_residual, solve, solve_with, symbolic_matrix, symbolic_vector, zero_vector, FrobeniusSystem,
    MatrixFn, Solution, SolveMeta, VectorFn, DEFAULT_STEP, DEFAULT_TOL_INT,
};
