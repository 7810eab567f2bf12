//! Primal-dual bipartite rotation synchronization.
//!
//! The outer loop alternates between a camera-side synchronization on the
//! power graph `M = R̃_CT Λ_T⁻¹ R̃_CTᵀ` and a closed-form update of the object
//! duals `Λ_T`. The camera-side problem is itself solved by alternating an
//! eigensolve of `L = Λ_C - M` with the dual update `Λ_C ← sym(M R_C)`.

use std::time::Instant;

use nalgebra::Matrix3;

use super::certificate::{
    check_certificate_with, full_measurement_matrix, kkt_residual, stacked_basis, Certificate,
};
use super::dual::{
    dual_update_c, object_gradients, primal_from_eigvectors, spectral_init_duals, symmetric_factor,
    DualBlocks,
};
use super::eig::{smallest_eigpairs_with, EigOptions};
use super::gpm::polish;
use crate::blockgraph::{
    accumulate_power_operator, degree_matrix, invert_dual_block, merge_object_blocks,
    BlockMatrix33, MeasurementGraph, MergedBlocks, ScalarCsr,
};
use crate::error::{Error, Result};
use crate::geom::Rotation;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on `|λ₃|`.
    pub delta: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub eig_tol: f64,
    pub certificate_tol: f64,
    pub seed: u64,
    /// Fail on degenerate projections instead of picking a nearby rotation.
    pub strict_projection: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta: 1e-5,
            max_outer: 50,
            max_inner: 100,
            eig_tol: 1e-8,
            certificate_tol: 1e-6,
            seed: 0,
            strict_projection: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("eig_tol", self.eig_tol),
            ("certificate_tol", self.certificate_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Shape(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Shape("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn eig_options(&self) -> EigOptions {
        EigOptions {
            seed: self.seed,
            ..EigOptions::new(self.eig_tol)
        }
    }
}

#[derive(Clone, Debug)]
pub struct RotSolution {
    pub r_c: Vec<Rotation>,
    pub r_t: Vec<Rotation>,
    pub lambda_c: DualBlocks,
    pub lambda_t: DualBlocks,
    /// `-Tr(Λ)` after every outer iteration.
    pub dual_trace_history: Vec<f64>,
    /// `|λ₃|` of the first camera-side eigensolve of every outer iteration.
    pub lambda3_history: Vec<f64>,
    pub certificate: Certificate,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Objective `-Tr(R̃ R Rᵀ)` at the returned rotations.
    pub cost: f64,
    /// Wall-clock seconds spent in each outer iteration.
    pub iteration_seconds: Vec<f64>,
}

/// Below this multiple of `ε · max_i Tr(Λ_i)/3` an eigenvalue cannot be
/// resolved from zero in double precision.
const EIG_NOISE_FLOOR: f64 = 64.0;

/// Cap and relative stopping gain for the final GPM refinement.
pub const POLISH_SWEEPS: usize = 50;
pub const POLISH_REL_TOL: f64 = 1e-15;

/// The effective `|λ₃|` tolerance: `delta`, raised to the floating-point
/// floor of the dual scale for problems with very large edge weights.
pub fn convergence_threshold(delta: f64, lambda: &DualBlocks) -> f64 {
    let scale = lambda
        .blocks()
        .iter()
        .map(|b| b.trace().abs() / 3.0)
        .fold(0.0, f64::max);
    delta.max(EIG_NOISE_FLOOR * f64::EPSILON * scale)
}

/// Result of a camera-side synchronization on a fixed operator.
#[derive(Clone, Debug)]
pub struct InnerSolve {
    pub r: Vec<Rotation>,
    pub lambda: DualBlocks,
    /// `λ₃` of every eigensolve, in order.
    pub lambda3: Vec<f64>,
    pub converged: bool,
}

/// Synchronizes rotations on a symmetric operator `op` by alternating the
/// eigensolve of `Λ - op` with `Λ ← sym(op R)`, starting from `lambda`.
pub fn sync_power_graph(
    op: &BlockMatrix33,
    lambda: DualBlocks,
    warm: Option<&[Rotation]>,
    cfg: &SolverConfig,
) -> Result<InnerSolve> {
    let n = op.rows();
    if lambda.len() != n {
        return Err(Error::Shape(format!(
            "{} dual blocks for {n} nodes",
            lambda.len()
        )));
    }
    let neg = op.scale(-1.0);
    let mut opts = cfg.eig_options();
    opts.warm_start = warm.map(stacked_basis);
    let mut lambda = lambda;
    let mut lambda3 = Vec::new();
    let mut r = Vec::new();
    for _ in 0..cfg.max_inner {
        let l = neg.add(&BlockMatrix33::block_diagonal(lambda.blocks()));
        let pairs = smallest_eigpairs_with(&l, 3, &opts)?;
        let l3 = pairs.values[2];
        let tol = convergence_threshold(cfg.delta, &lambda);
        lambda3.push(l3);
        r = primal_from_eigvectors(&pairs.vectors, op, cfg.strict_projection)?;
        lambda = dual_update_c(op, &r);
        opts.warm_start = Some(pairs.vectors);
        if l3.abs() <= tol {
            return Ok(InnerSolve {
                r,
                lambda,
                lambda3,
                converged: true,
            });
        }
    }
    Ok(InnerSolve {
        r,
        lambda,
        lambda3,
        converged: false,
    })
}

/// Iterative state of the bipartite solver. Time columns can be appended
/// between runs, which makes it usable for streaming.
#[derive(Clone, Debug)]
pub struct RotationSolver {
    cfg: SolverConfig,
    cameras: usize,
    /// `R̃_CTᵀ`: one row per time node with transposed blocks.
    by_time: BlockMatrix33,
    adj_by_time: ScalarCsr,
    deg_t: Vec<f64>,
    lambda_c: DualBlocks,
    lambda_t: DualBlocks,
    /// Power-graph operator for the current `Λ_T`.
    power_op: BlockMatrix33,
    r_c: Option<Vec<Rotation>>,
    progress: Progress,
}

/// Iteration bookkeeping carried into a [`RotSolution`].
#[derive(Clone, Debug, Default)]
pub(crate) struct Progress {
    pub dual_trace_history: Vec<f64>,
    pub lambda3_history: Vec<f64>,
    pub iteration_seconds: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

impl RotationSolver {
    pub fn new(g: &MeasurementGraph, cfg: &SolverConfig) -> Result<Self> {
        Self::from_merged(&merge_object_blocks(g)?, cfg)
    }

    /// Spectral initialization from merged blocks.
    pub fn from_merged(merged: &MergedBlocks, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if merged.rtilde_ct.rows() == 0 || merged.rtilde_ct.cols() == 0 {
            return Err(Error::EmptyGraph);
        }
        let (_, deg_t) = degree_matrix(&merged.adj_ct)?;
        let (lambda_c, lambda_t) = spectral_init_duals(&merged.adj_ct, &deg_t);
        let by_time = merged.rtilde_ct.transpose();
        let inv: Vec<Matrix3<f64>> = deg_t.iter().map(|d| Matrix3::identity() / *d).collect();
        let power_op = accumulate_power_operator(merged.rtilde_ct.rows(), &by_time, &inv);
        Ok(RotationSolver {
            cfg: cfg.clone(),
            cameras: merged.rtilde_ct.rows(),
            by_time,
            adj_by_time: merged.adj_ct.transpose(),
            deg_t,
            lambda_c,
            lambda_t,
            power_op,
            r_c: None,
            progress: Progress::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: &SolverConfig) -> Result<()> {
        cfg.validate()?;
        self.cfg = cfg.clone();
        Ok(())
    }

    pub fn num_cameras(&self) -> usize {
        self.cameras
    }

    pub fn num_times(&self) -> usize {
        self.deg_t.len()
    }

    pub fn power_operator(&self) -> &BlockMatrix33 {
        &self.power_op
    }

    /// Runs outer iterations until the first camera-side `|λ₃|` of an
    /// iteration is within `delta`, or `max_outer` iterations have run.
    pub fn run(&mut self) -> Result<()> {
        self.progress.converged = false;
        for _ in 0..self.cfg.max_outer {
            let start = Instant::now();
            let tol = convergence_threshold(self.cfg.delta, &self.lambda_c);
            let inner = sync_power_graph(
                &self.power_op,
                self.lambda_c.clone(),
                self.r_c.as_deref(),
                &self.cfg,
            )?;
            let first = inner.lambda3[0];
            let sweeps = inner.lambda3.len();
            self.progress.inner_iterations += sweeps;
            self.lambda_c = inner.lambda;
            self.lambda_t = DualBlocks(
                object_gradients(&self.by_time, &inner.r)
                    .iter()
                    .map(symmetric_factor)
                    .collect(),
            );
            self.r_c = Some(inner.r);
            let inv: Vec<Matrix3<f64>> = self
                .lambda_t
                .blocks()
                .iter()
                .enumerate()
                .map(|(t, b)| invert_dual_block(b, t))
                .collect::<Result<_>>()?;
            self.power_op = accumulate_power_operator(self.cameras, &self.by_time, &inv);
            self.progress.iterations += 1;
            self.progress
                .dual_trace_history
                .push(-(self.lambda_c.trace() + self.lambda_t.trace()));
            self.progress.lambda3_history.push(first.abs());
            self.progress
                .iteration_seconds
                .push(start.elapsed().as_secs_f64());
            log::debug!(
                "outer {}: first |λ₃| = {:.3e}, {} inner, dual trace {:.9e}",
                self.progress.iterations,
                first.abs(),
                sweeps,
                self.progress.dual_trace_history.last().unwrap()
            );
            if first.abs() <= tol {
                self.progress.converged = true;
                break;
            }
        }
        Ok(())
    }

    /// Appends a time node with merged blocks `(camera index, R̃_ct, a_ct)`.
    /// The new object dual starts at its degree and the cached operators get
    /// the matching rank update. Columns without weight are ignored.
    pub fn append_time(&mut self, column: &[(usize, Matrix3<f64>, f64)]) -> Result<bool> {
        if let Some((c, _, _)) = column.iter().find(|(c, _, _)| *c >= self.cameras) {
            return Err(Error::UnknownCamera(*c));
        }
        let deg: f64 = column.iter().map(|(_, _, a)| *a).sum();
        if !(deg > 0.0) {
            return Ok(false);
        }
        self.by_time
            .push_row(column.iter().map(|(c, b, _)| (*c, b.transpose())));
        self.adj_by_time
            .push_row(column.iter().map(|(c, _, a)| (*c, *a)));
        let t = self.deg_t.len();
        self.deg_t.push(deg);
        self.lambda_t.0.push(Matrix3::identity() * deg);
        let update = accumulate_power_operator_row(self.cameras, &self.by_time, t, deg);
        self.power_op = self.power_op.add(&update);
        // Row sums of the power-graph adjacency grow by a_ct for each camera
        // in the column.
        for (c, a) in self.adj_by_time.row(t) {
            self.lambda_c.0[c] += Matrix3::identity() * a;
        }
        self.progress.converged = false;
        Ok(true)
    }

    /// Final primal-dual pair with certificate. The primal is first refined by
    /// a few monotone GPM sweeps, which removes the residual suboptimality left
    /// by stopping at `delta`.
    pub fn solution(&self) -> Result<RotSolution> {
        let r_c = match &self.r_c {
            Some(r) => r.clone(),
            None => {
                return Err(Error::NoConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                })
            }
        };
        let (r_c, r_t) = polish(&self.by_time, r_c, POLISH_SWEEPS, POLISH_REL_TOL);
        finish_solution(&self.by_time, r_c, r_t, &self.cfg, self.progress.clone())
    }
}

/// Recovers the duals from the first-order conditions at `(r_c, r_t)`,
/// checks the certificate and packs the result.
pub(crate) fn finish_solution(
    by_time: &BlockMatrix33,
    r_c: Vec<Rotation>,
    r_t: Vec<Rotation>,
    cfg: &SolverConfig,
    progress: Progress,
) -> Result<RotSolution> {
    let lambda_t = DualBlocks(
        object_gradients(by_time, &r_c)
            .iter()
            .map(symmetric_factor)
            .collect(),
    );
    let rtilde_ct = by_time.transpose();
    let stacked_t: Vec<Matrix3<f64>> = r_t.iter().map(|r| *r.matrix()).collect();
    let lambda_c = DualBlocks(
        rtilde_ct
            .mul_blocks(&stacked_t)
            .iter()
            .map(symmetric_factor)
            .collect(),
    );
    let full = full_measurement_matrix(&rtilde_ct);
    let mut all_lambda = lambda_c.0.clone();
    all_lambda.extend_from_slice(lambda_t.blocks());
    let all_lambda = DualBlocks(all_lambda);
    let all_r: Vec<Rotation> = r_c.iter().chain(&r_t).copied().collect();
    let mut opts = cfg.eig_options();
    opts.warm_start = Some(stacked_basis(&all_r));
    let mut certificate = check_certificate_with(&full, &all_lambda, cfg.certificate_tol, &opts)?;
    if !progress.converged {
        certificate.certified = false;
    }
    let kkt = kkt_residual(&full, &all_lambda, &all_r)?;
    let cost = bipartite_cost(by_time, &r_c, &r_t);
    Ok(RotSolution {
        r_c,
        r_t,
        lambda_c,
        lambda_t,
        dual_trace_history: progress.dual_trace_history,
        lambda3_history: progress.lambda3_history,
        certificate,
        iterations: progress.iterations,
        inner_iterations: progress.inner_iterations,
        converged: progress.converged,
        kkt_residual: kkt,
        cost,
        iteration_seconds: progress.iteration_seconds,
    })
}

/// Rank update `B_t deg⁻¹ B_tᵀ` of time row `t` alone.
fn accumulate_power_operator_row(
    n: usize,
    by_time: &BlockMatrix33,
    t: usize,
    deg: f64,
) -> BlockMatrix33 {
    let col: Vec<(usize, Matrix3<f64>)> = by_time.row(t).map(|(c, b)| (c, b.transpose())).collect();
    BlockMatrix33::from_triplets(
        n,
        n,
        col.iter().flat_map(|(i, bi)| {
            col.iter()
                .map(move |(j, bj)| (*i, *j, bi * bj.transpose() / deg))
        }),
    )
}

/// `-Tr(R̃ R Rᵀ) = -2 Σ_t Tr(R_tᵀ G_t)` with `G_t = Σ_c R̃_ctᵀ R_c`.
pub fn bipartite_cost(by_time: &BlockMatrix33, r_c: &[Rotation], r_t: &[Rotation]) -> f64 {
    -2.0 * object_gradients(by_time, r_c)
        .iter()
        .zip(r_t)
        .map(|(g, r)| (r.matrix().transpose() * g).trace())
        .sum::<f64>()
}

/// Objective `-Tr(R̃ R Rᵀ)` of a rotation assignment on a graph.
pub fn rotation_cost(g: &MeasurementGraph, r_c: &[Rotation], r_t: &[Rotation]) -> Result<f64> {
    let merged = merge_object_blocks(g)?;
    if r_c.len() != merged.rtilde_ct.rows() || r_t.len() != merged.rtilde_ct.cols() {
        return Err(Error::Shape(
            "rotation count does not match the graph".into(),
        ));
    }
    Ok(bipartite_cost(&merged.rtilde_ct.transpose(), r_c, r_t))
}

/// Algorithm entry point: spectral initialization followed by outer
/// iterations. Non-convergence is reported through `converged`.
pub fn solve_rotations(g: &MeasurementGraph, cfg: &SolverConfig) -> Result<RotSolution> {
    let mut solver = RotationSolver::new(g, cfg)?;
    solver.run()?;
    solver.solution()
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::blockgraph::{EdgeMeasurement, ObjectModel};
    use crate::geom::NoiseParams;
    use crate::rotsync::testutil::{max_gauge_error_deg, random_instance};

    #[test]
    fn noiseless_full_visibility_recovers_ground_truth() {
        let mut g = ChaCha8Rng::seed_from_u64(11);
        let inst = random_instance(25, 50, 1.0, None, &mut g);
        let sol = solve_rotations(&inst.graph, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(max_gauge_error_deg(&sol.r_c, &sol.r_t, &inst.r_c, &inst.r_t) < 1e-6);
        assert!(sol.certificate.certified);
        assert!(sol.kkt_residual < 1e-10);
    }

    #[test]
    fn noiseless_sparse_graph_recovers_ground_truth() {
        let mut g = ChaCha8Rng::seed_from_u64(12);
        let inst = random_instance(20, 60, 0.1, None, &mut g);
        let sol = solve_rotations(&inst.graph, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(max_gauge_error_deg(&sol.r_c, &sol.r_t, &inst.r_c, &inst.r_t) < 1e-6);
    }

    #[test]
    fn huge_weights_still_converge() {
        let mut g = ChaCha8Rng::seed_from_u64(16);
        let inst = random_instance(25, 3000, 0.8, None, &mut g);
        let edges: Vec<EdgeMeasurement> = inst
            .graph
            .edges()
            .iter()
            .map(|e| EdgeMeasurement {
                noise: NoiseParams::new(crate::geom::KAPPA_NOISELESS, 1.0),
                ..*e
            })
            .collect();
        let huge = MeasurementGraph::new(edges, inst.graph.object().clone()).unwrap();
        let sol = solve_rotations(&huge, &SolverConfig::default()).unwrap();
        assert!(sol.converged && sol.certificate.certified);
        assert!(max_gauge_error_deg(&sol.r_c, &sol.r_t, &inst.r_c, &inst.r_t) < 1e-6);
    }

    #[test]
    fn threshold_only_rises_for_large_duals() {
        assert_eq!(
            convergence_threshold(1e-5, &DualBlocks(vec![Matrix3::identity() * 1e4; 3])),
            1e-5
        );
        let big = convergence_threshold(1e-5, &DualBlocks(vec![Matrix3::identity() * 1e12; 3]));
        assert!(big > 1e-3 && big < 1e-1);
    }

    #[test]
    fn single_edge_is_exact() {
        let mut g = ChaCha8Rng::seed_from_u64(13);
        let r = Rotation::random(&mut g);
        let e = EdgeMeasurement {
            cam: 4,
            marker: 0,
            time: 9,
            r_meas: r,
            t_meas: Vector3::zeros(),
            noise: NoiseParams::new(1.0, 1.0),
        };
        let graph = MeasurementGraph::new(vec![e], ObjectModel::single(0)).unwrap();
        let sol = solve_rotations(&graph, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        let rel = sol.r_c[0] * sol.r_t[0].inverse();
        assert!((rel.matrix() - r.matrix()).norm() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn noisy_graph_converges_quickly_and_certifies() {
        let mut g = ChaCha8Rng::seed_from_u64(14);
        let inst = random_instance(25, 50, 0.5, Some(200.0), &mut g);
        let sol = solve_rotations(&inst.graph, &SolverConfig::default()).unwrap();
        assert!(sol.converged, "{:?}", sol.lambda3_history);
        assert!(sol.iterations <= 5, "{:?}", sol.lambda3_history);
        assert!(sol.certificate.certified, "{:?}", sol.certificate);
        assert!(sol.kkt_residual < 1e-6, "{}", sol.kkt_residual);
        for b in sol.lambda_c.blocks().iter().chain(sol.lambda_t.blocks()) {
            assert!((b - b.transpose()).norm() < 1e-9);
            assert!(nalgebra::SymmetricEigen::new(*b).eigenvalues.min() > -1e-9);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut g = ChaCha8Rng::seed_from_u64(15);
        let inst = random_instance(3, 4, 1.0, None, &mut g);
        let cfg = SolverConfig {
            delta: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_rotations(&inst.graph, &cfg).is_err());
    }
}
