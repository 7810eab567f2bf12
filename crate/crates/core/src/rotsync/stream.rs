//! Streaming rotation synchronization: time steps arrive one at a time and
//! the solver resumes from its previous primal-dual state.

use std::collections::BTreeMap;

use nalgebra::Matrix3;

use super::solver::{RotSolution, RotationSolver, SolverConfig};
use crate::blockgraph::{EdgeMeasurement, MeasurementGraph};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct StreamingSolver {
    graph: MeasurementGraph,
    solver: RotationSolver,
}

impl StreamingSolver {
    /// Batch-solves the initial graph.
    pub fn new(g: &MeasurementGraph, cfg: &SolverConfig) -> Result<Self> {
        let mut solver = RotationSolver::new(g, cfg)?;
        solver.run()?;
        Ok(StreamingSolver {
            graph: g.clone(),
            solver,
        })
    }

    pub fn graph(&self) -> &MeasurementGraph {
        &self.graph
    }

    pub fn solution(&self) -> Result<RotSolution> {
        self.solver.solution()
    }

    /// Appends the edges of one new time step and re-optimizes. A step
    /// without rotation-carrying edges leaves the state unchanged.
    pub fn update(&mut self, new_edges: &[EdgeMeasurement]) -> Result<RotSolution> {
        self.push(new_edges)?;
        self.solution()
    }

    /// [`update`](Self::update) without assembling the solution. Returns
    /// whether the time step was added.
    pub fn push(&mut self, new_edges: &[EdgeMeasurement]) -> Result<bool> {
        let Some(first) = new_edges.first() else {
            return Ok(false);
        };
        let time = first.time;
        if new_edges.iter().any(|e| e.time != time) {
            return Err(Error::Shape(
                "streamed edges must share one time index".into(),
            ));
        }
        if self.graph.times().last().is_some_and(|last| *last >= time) {
            return Err(Error::Shape(format!(
                "streamed time {time} does not follow the existing times"
            )));
        }
        let mut column: BTreeMap<usize, (Matrix3<f64>, f64)> = BTreeMap::new();
        for e in new_edges {
            let c = self
                .graph
                .camera_index(e.cam)
                .ok_or(Error::UnknownCamera(e.cam))?;
            let rel = self
                .graph
                .object()
                .relative(e.marker)
                .ok_or(Error::UnknownMarker(e.marker))?;
            if e.noise.kappa <= 0.0 {
                continue;
            }
            let entry = column.entry(c).or_insert((Matrix3::zeros(), 0.0));
            entry.0 += e.noise.kappa * e.r_meas.matrix() * rel.r.matrix();
            entry.1 += e.noise.kappa;
        }
        let column: Vec<(usize, Matrix3<f64>, f64)> =
            column.into_iter().map(|(c, (b, a))| (c, b, a)).collect();
        let graph = self.graph.with_edges(new_edges)?;
        if !self.solver.append_time(&column)? {
            return Ok(false);
        }
        self.graph = graph;
        self.solver.run()?;
        Ok(true)
    }
}

/// One-shot form of [`StreamingSolver::update`].
pub fn streaming_update(
    state: &mut StreamingSolver,
    new_edges: &[EdgeMeasurement],
    cfg: &SolverConfig,
) -> Result<RotSolution> {
    state.solver.set_config(cfg)?;
    state.update(new_edges)
}
