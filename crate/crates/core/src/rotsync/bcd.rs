//! Exact block-coordinate descent over the camera and object blocks.
//! Both half-steps are full synchronizations, so this is only meant as a
//! reference for small graphs.

use std::time::Instant;

use nalgebra::Matrix3;

use super::dual::DualBlocks;
use super::solver::{
    convergence_threshold, finish_solution, sync_power_graph, InnerSolve, Progress, RotSolution,
    SolverConfig,
};
use crate::blockgraph::{
    accumulate_power_operator, degree_matrix, invert_dual_block, merge_object_blocks,
    power_graph_adjacency, BlockMatrix33, MeasurementGraph,
};
use crate::error::{Error, Result};
use crate::geom::Rotation;

/// Largest `C + T` accepted by [`exact_bcd_solve`].
pub const BCD_NODE_LIMIT: usize = 200;

/// Each half-step must be an exact block maximization for the dual trace to
/// be monotone, so the inner synchronizations run to machine precision
/// whatever the outer `delta` is.
fn exact_inner(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        delta: cfg.delta.min(1e-13),
        eig_tol: cfg.eig_tol.min(1e-12),
        max_inner: cfg.max_inner.max(1000),
        ..cfg.clone()
    }
}

/// Synchronizes on `op` until the dual handed to an inner solve already
/// passes its first eigenvalue check, so the returned dual is a verified
/// fixed point rather than one update past the last check.
fn exact_half_step(
    op: &BlockMatrix33,
    lambda: DualBlocks,
    warm: Option<&[Rotation]>,
    cfg: &SolverConfig,
) -> Result<(InnerSolve, usize)> {
    let mut solve = sync_power_graph(op, lambda, warm, cfg)?;
    let mut sweeps = solve.lambda3.len();
    for _ in 0..cfg.max_inner {
        let next = sync_power_graph(op, solve.lambda.clone(), Some(&solve.r), cfg)?;
        sweeps += next.lambda3.len();
        let settled = next.lambda3.len() == 1 && next.converged;
        solve = InnerSolve {
            lambda3: [solve.lambda3, next.lambda3].concat(),
            ..next
        };
        if settled {
            break;
        }
    }
    Ok((solve, sweeps))
}

fn inverses(lambda: &DualBlocks) -> Result<Vec<Matrix3<f64>>> {
    lambda
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| invert_dual_block(b, i))
        .collect()
}

fn degree_duals(adj: &nalgebra::DMatrix<f64>) -> DualBlocks {
    DualBlocks::scaled_identity(
        &(0..adj.nrows())
            .map(|i| adj.row(i).sum())
            .collect::<Vec<_>>(),
    )
}

/// Alternates exact camera and object synchronizations. `dual_trace_history`
/// holds `-Tr(Λ)` after every half-step.
pub fn exact_bcd_solve(g: &MeasurementGraph, cfg: &SolverConfig) -> Result<RotSolution> {
    cfg.validate()?;
    let nodes = g.num_cameras() + g.num_times();
    if nodes > BCD_NODE_LIMIT {
        return Err(Error::SizeGuard {
            nodes,
            limit: BCD_NODE_LIMIT,
        });
    }
    let merged = merge_object_blocks(g)?;
    let (deg_c, deg_t) = degree_matrix(&merged.adj_ct)?;
    let (nc, nt) = (deg_c.len(), deg_t.len());
    let rtilde_ct = merged.rtilde_ct;
    let by_time = rtilde_ct.transpose();
    let adj_tc = merged.adj_ct.transpose();

    let mut lambda_t = DualBlocks::scaled_identity(&deg_t);
    let mut lambda_c = degree_duals(&power_graph_adjacency(&merged.adj_ct, &deg_t));
    let mut lambda_t_start = degree_duals(&power_graph_adjacency(&adj_tc, &deg_c));
    let mut r_c: Option<Vec<Rotation>> = None;
    let mut r_t: Option<Vec<Rotation>> = None;
    let mut progress = Progress::default();
    let inner_cfg = exact_inner(cfg);
    for _ in 0..cfg.max_outer {
        let start = Instant::now();
        let m = accumulate_power_operator(nc, &by_time, &inverses(&lambda_t)?);
        let tol = convergence_threshold(cfg.delta, &lambda_c);
        let (cam, cam_sweeps) = exact_half_step(&m, lambda_c.clone(), r_c.as_deref(), &inner_cfg)?;
        let first = cam.lambda3[0];
        lambda_c = cam.lambda;
        r_c = Some(cam.r);
        progress
            .dual_trace_history
            .push(-(lambda_c.trace() + lambda_t.trace()));

        let n = accumulate_power_operator(nt, &rtilde_ct, &inverses(&lambda_c)?);
        let (obj, obj_sweeps) =
            exact_half_step(&n, lambda_t_start.clone(), r_t.as_deref(), &inner_cfg)?;
        lambda_t = obj.lambda;
        lambda_t_start = lambda_t.clone();
        r_t = Some(obj.r);
        progress
            .dual_trace_history
            .push(-(lambda_c.trace() + lambda_t.trace()));

        progress.inner_iterations += cam_sweeps + obj_sweeps;
        progress.iterations += 1;
        progress.lambda3_history.push(first.abs());
        progress
            .iteration_seconds
            .push(start.elapsed().as_secs_f64());
        if first.abs() <= tol {
            progress.converged = true;
            break;
        }
    }
    let (r_c, r_t) = (
        r_c.expect("at least one iteration"),
        r_t.expect("at least one iteration"),
    );
    // The two half-problems fix rotations only up to their own gauges; tie
    // the object side to the cameras with a single global rotation.
    let r_t = align_objects(&by_time, &r_c, r_t);
    finish_solution(&by_time, r_c, r_t, cfg, progress)
}

/// Right-multiplies every object rotation by the global rotation that best
/// fits the cross terms `Σ_t Tr(R_tᵀ G_t)`.
fn align_objects(
    by_time: &crate::blockgraph::BlockMatrix33,
    r_c: &[Rotation],
    r_t: Vec<Rotation>,
) -> Vec<Rotation> {
    let grads = super::dual::object_gradients(by_time, r_c);
    // maximize Σ Tr((R_t H)ᵀ G_t) = Tr(Hᵀ Σ R_tᵀ G_t)
    let s = r_t
        .iter()
        .zip(&grads)
        .fold(Matrix3::zeros(), |acc, (r, g)| {
            acc + r.matrix().transpose() * g
        });
    let h = crate::geom::project_to_so3(&s);
    r_t.into_iter().map(|r| r * h).collect()
}
