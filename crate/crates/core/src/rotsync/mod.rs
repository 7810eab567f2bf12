//! Rotation synchronization over the bipartite camera-object graph.

mod bcd;
mod calib;
mod certificate;
mod dual;
mod eig;
mod gpm;
mod solver;
mod stream;

pub use bcd::{exact_bcd_solve, BCD_NODE_LIMIT};
pub use calib::{calibrate_object, Calibration, CALIB_CG_MAX_ITER, CALIB_CG_TOL};
pub use certificate::{
    certificate_matrix, check_certificate, check_certificate_with, full_measurement_matrix,
    kkt_residual, stacked_basis, Certificate,
};
pub use dual::{
    dual_update_c, dual_update_t, object_gradients, object_rotations, primal_from_eigvectors,
    spectral_init_duals, symmetric_factor, sync_cost, DualBlocks,
};
pub use eig::{
    block_krylov_smallest, dense_smallest, smallest_eigpairs, smallest_eigpairs_with, EigOptions,
    EigPairs, DENSE_LIMIT,
};
pub use gpm::{gpm_solve, GpmResult};
pub use solver::{
    bipartite_cost, convergence_threshold, rotation_cost, solve_rotations, sync_power_graph,
    InnerSolve, RotSolution, RotationSolver, SolverConfig,
};
pub use stream::{streaming_update, StreamingSolver};
