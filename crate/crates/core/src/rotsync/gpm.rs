//! Generalized power method baseline: alternating closed-form projections.

use nalgebra::Matrix3;

use super::dual::object_gradients;
use super::solver::bipartite_cost;
use crate::blockgraph::{merge_object_blocks, BlockMatrix33, MeasurementGraph};
use crate::error::{Error, Result};
use crate::geom::{project_to_so3, Rotation};

#[derive(Clone, Debug)]
pub struct GpmResult {
    pub r_c: Vec<Rotation>,
    pub r_t: Vec<Rotation>,
    /// Objective after every sweep.
    pub cost_history: Vec<f64>,
}

impl GpmResult {
    pub fn cost(&self) -> f64 {
        self.cost_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Runs `iters` sweeps of `r_t ← proj(Σ_c R̃_ctᵀ r_c)` then
/// `r_c ← proj(Σ_t R̃_ct r_t)`, starting from camera rotations `init_c`.
pub fn gpm_solve(g: &MeasurementGraph, init_c: &[Rotation], iters: usize) -> Result<GpmResult> {
    let merged = merge_object_blocks(g)?;
    let rtilde_ct = merged.rtilde_ct;
    if init_c.len() != rtilde_ct.rows() {
        return Err(Error::Shape(format!(
            "{} initial rotations for {} cameras",
            init_c.len(),
            rtilde_ct.rows()
        )));
    }
    let by_time = rtilde_ct.transpose();
    let mut r_c = init_c.to_vec();
    let mut r_t: Vec<Rotation> = object_gradients(&by_time, &r_c)
        .iter()
        .map(project_to_so3)
        .collect();
    let mut cost_history = Vec::with_capacity(iters);
    for _ in 0..iters {
        r_t = object_gradients(&by_time, &r_c)
            .iter()
            .map(project_to_so3)
            .collect();
        let stacked: Vec<Matrix3<f64>> = r_t.iter().map(|r| *r.matrix()).collect();
        r_c = rtilde_ct
            .mul_blocks(&stacked)
            .iter()
            .map(project_to_so3)
            .collect();
        cost_history.push(bipartite_cost(&by_time, &r_c, &r_t));
    }
    Ok(GpmResult {
        r_c,
        r_t,
        cost_history,
    })
}

/// Monotone GPM sweeps from `r_c` until the relative cost decrease drops
/// below `rel_tol` or `max_sweeps` have run. Returns the polished pair.
pub(crate) fn polish(
    by_time: &BlockMatrix33,
    r_c: Vec<Rotation>,
    max_sweeps: usize,
    rel_tol: f64,
) -> (Vec<Rotation>, Vec<Rotation>) {
    let rtilde_ct = by_time.transpose();
    let mut r_c = r_c;
    let mut r_t: Vec<Rotation> = object_gradients(by_time, &r_c)
        .iter()
        .map(project_to_so3)
        .collect();
    let mut cost = bipartite_cost(by_time, &r_c, &r_t);
    for _ in 0..max_sweeps {
        let stacked: Vec<Matrix3<f64>> = r_t.iter().map(|r| *r.matrix()).collect();
        let next_c: Vec<Rotation> = rtilde_ct
            .mul_blocks(&stacked)
            .iter()
            .map(project_to_so3)
            .collect();
        let next_t: Vec<Rotation> = object_gradients(by_time, &next_c)
            .iter()
            .map(project_to_so3)
            .collect();
        let next = bipartite_cost(by_time, &next_c, &next_t);
        if !(next < cost) {
            break;
        }
        let gain = cost - next;
        r_c = next_c;
        r_t = next_t;
        cost = next;
        if gain <= rel_tol * cost.abs() {
            break;
        }
    }
    (r_c, r_t)
}
