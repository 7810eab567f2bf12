//! Full pose estimation: rotations, then translations with fixed rotations.

use std::time::Instant;

use crate::blockgraph::{prune, CameraId, MeasurementGraph, PruneReport};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::io::PoseSet;
use crate::rotsync::{solve_rotations, RotSolution, SolverConfig, StreamingSolver};
use crate::transsync::{build_translation_system, solve_translations, TranslationSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    /// Camera whose translation is pinned to zero; the first camera if unset.
    pub anchor: Option<CameraId>,
    /// Feed time steps one at a time through the streaming solver.
    pub stream: bool,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            anchor: None,
            stream: false,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub poses: PoseSet,
    pub rotation: RotSolution,
    pub translation: TranslationSolution,
    pub pruned: PruneReport,
    /// The graph actually solved, after pruning.
    pub graph: MeasurementGraph,
    pub rotation_seconds: f64,
    pub translation_seconds: f64,
}

pub fn solve_poses(g: &MeasurementGraph, cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.solver.validate()?;
    let (g, pruned) = prune(g)?;
    if g.num_cameras() == 0 || g.num_times() == 0 {
        return Err(Error::EmptyGraph);
    }
    if !g.is_connected() {
        return Err(Error::Shape("measurement graph is not connected".into()));
    }
    let anchor = cfg.anchor.unwrap_or(g.cameras()[0]);
    if g.camera_index(anchor).is_none() {
        return Err(Error::UnknownAnchor(anchor));
    }

    let start = Instant::now();
    let rotation = if cfg.stream {
        stream_rotations(&g, &cfg.solver)?
    } else {
        solve_rotations(&g, &cfg.solver)?
    };
    let rotation_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let sys = build_translation_system(&g, &rotation.r_c, &rotation.r_t, anchor)?;
    let translation = solve_translations(&sys, cfg.cg_tol, cfg.cg_max_iter)?;
    let translation_seconds = start.elapsed().as_secs_f64();

    let poses = PoseSet {
        cameras: g
            .cameras()
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, Pose::new(rotation.r_c[i], translation.t_c[i])))
            .collect(),
        objects: g
            .times()
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, Pose::new(rotation.r_t[i], translation.t_t[i])))
            .collect(),
    };
    Ok(PipelineResult {
        poses,
        rotation,
        translation,
        pruned,
        graph: g,
        rotation_seconds,
        translation_seconds,
    })
}

/// Batch-solves the shortest prefix of time steps that sees every camera
/// and is connected, then appends the remaining steps one by one.
fn stream_rotations(g: &MeasurementGraph, cfg: &SolverConfig) -> Result<RotSolution> {
    let steps = g.edges_by_time();
    let mut seen = vec![false; g.num_cameras()];
    let mut remaining = g.num_cameras();
    let mut split = steps.len();
    for (k, (_, edges)) in steps.iter().enumerate() {
        for e in edges.iter().filter(|e| e.noise.kappa > 0.0) {
            let c = g.camera_index(e.cam).ok_or(Error::UnknownCamera(e.cam))?;
            if !std::mem::replace(&mut seen[c], true) {
                remaining -= 1;
            }
        }
        if remaining == 0 {
            split = k + 1;
            break;
        }
    }
    let prefix_graph = |n: usize| {
        MeasurementGraph::new(
            steps[..n]
                .iter()
                .flat_map(|(_, e)| e.iter().cloned())
                .collect(),
            g.object().clone(),
        )
    };
    let mut prefix = prefix_graph(split)?;
    while !prefix.is_connected() && split < steps.len() {
        split += 1;
        prefix = prefix_graph(split)?;
    }
    let mut state = StreamingSolver::new(&prefix, cfg)?;
    for (_, edges) in &steps[split..] {
        state.push(edges)?;
    }
    state.solution()
}
