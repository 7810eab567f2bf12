//! Translation recovery by weighted linear least squares once rotations are
//! known.

use nalgebra::{DVector, Matrix3, Vector3};
use rayon::prelude::*;

use crate::blockgraph::{BlockMatrix33, CameraId, MeasurementGraph};
use crate::error::{Error, Result};
use crate::geom::Rotation;

/// One measurement row: `τ t_c - τ A t_t ≈ rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRow {
    pub cam: usize,
    pub time: usize,
    pub tau: f64,
    /// `R_c R_{m1}ᵀ`.
    pub a: Matrix3<f64>,
    /// `τ (t̃ + R_c R_mᵀ t̄_{m,m1})`.
    pub rhs: Vector3<f64>,
}

/// Sparse least-squares system with the anchor camera's column removed.
#[derive(Clone, Debug)]
pub struct TranslationSystem {
    cameras: usize,
    times: usize,
    anchor: usize,
    rows: Vec<EdgeRow>,
    /// Rows touching each unknown, for the transposed product.
    by_unknown: Vec<Vec<usize>>,
}

impl TranslationSystem {
    pub fn rows(&self) -> &[EdgeRow] {
        &self.rows
    }

    /// Block index of the anchor camera.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Number of 3-vector unknowns, `C - 1 + T`.
    pub fn unknowns(&self) -> usize {
        self.cameras - 1 + self.times
    }

    fn cam_col(&self, c: usize) -> Option<usize> {
        match c.cmp(&self.anchor) {
            std::cmp::Ordering::Less => Some(c),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(c - 1),
        }
    }

    fn time_col(&self, t: usize) -> usize {
        self.cameras - 1 + t
    }

    /// The block operator `J` (`|E| x unknowns`).
    pub fn j_blocks(&self) -> BlockMatrix33 {
        let mut trips = Vec::with_capacity(2 * self.rows.len());
        for (e, row) in self.rows.iter().enumerate() {
            if let Some(col) = self.cam_col(row.cam) {
                trips.push((e, col, Matrix3::identity() * row.tau));
            }
            trips.push((e, self.time_col(row.time), -row.tau * row.a));
        }
        BlockMatrix33::from_triplets(self.rows.len(), self.unknowns(), trips)
    }

    /// Stacked right-hand side.
    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.rows.len(),
            self.rows
                .iter()
                .flat_map(|r| r.rhs.iter().copied().collect::<Vec<_>>()),
        )
    }

    fn x_at(x: &[Vector3<f64>], col: Option<usize>) -> Vector3<f64> {
        col.map_or_else(Vector3::zeros, |c| x[c])
    }

    /// `J x`, one 3-vector per edge.
    fn apply(&self, x: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.rows
            .par_iter()
            .map(|r| r.tau * (Self::x_at(x, self.cam_col(r.cam)) - r.a * x[self.time_col(r.time)]))
            .collect()
    }

    /// `Jᵀ y`.
    fn apply_t(&self, y: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let time0 = self.cameras - 1;
        self.by_unknown
            .par_iter()
            .enumerate()
            .map(|(col, rows)| {
                rows.iter().fold(Vector3::zeros(), |acc, &e| {
                    let r = &self.rows[e];
                    if col < time0 {
                        acc + r.tau * y[e]
                    } else {
                        acc - r.tau * r.a.transpose() * y[e]
                    }
                })
            })
            .collect()
    }

    /// Diagonal blocks of `JᵀJ`.
    fn diagonal_blocks(&self) -> Vec<Matrix3<f64>> {
        let time0 = self.cameras - 1;
        self.by_unknown
            .iter()
            .enumerate()
            .map(|(col, rows)| {
                rows.iter().fold(Matrix3::zeros(), |acc, &e| {
                    let r = &self.rows[e];
                    let t2 = r.tau * r.tau;
                    if col < time0 {
                        acc + Matrix3::identity() * t2
                    } else {
                        acc + t2 * r.a.transpose() * r.a
                    }
                })
            })
            .collect()
    }
}

/// Builds the translation system for rotations `r_c` (cameras) and `r_t`
/// (reference-marker rotation per time), anchoring camera `anchor`.
pub fn build_translation_system(
    g: &MeasurementGraph,
    r_c: &[Rotation],
    r_t: &[Rotation],
    anchor: CameraId,
) -> Result<TranslationSystem> {
    let (nc, nt) = (g.num_cameras(), g.num_times());
    if r_c.len() != nc || r_t.len() != nt {
        return Err(Error::Shape(format!(
            "{} camera and {} object rotations for a {nc}x{nt} graph",
            r_c.len(),
            r_t.len()
        )));
    }
    let anchor = g.camera_index(anchor).ok_or(Error::UnknownAnchor(anchor))?;
    let mut rows = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        if e.noise.tau <= 0.0 {
            continue;
        }
        let rel = g
            .object()
            .relative(e.marker)
            .ok_or(Error::UnknownMarker(e.marker))?;
        let c = g.camera_index(e.cam).ok_or(Error::UnknownCamera(e.cam))?;
        let t = g.time_index(e.time).expect("graph validated time ids");
        let a = r_c[c].matrix() * r_t[t].matrix().transpose();
        let rc_rmt = a * rel.r.matrix().transpose();
        rows.push(EdgeRow {
            cam: c,
            time: t,
            tau: e.noise.tau,
            a,
            rhs: e.noise.tau * (e.t_meas + rc_rmt * rel.t),
        });
    }
    let mut sys = TranslationSystem {
        cameras: nc,
        times: nt,
        anchor,
        rows,
        by_unknown: Vec::new(),
    };
    let mut by_unknown = vec![Vec::new(); sys.unknowns()];
    for (e, r) in sys.rows.iter().enumerate() {
        if let Some(col) = sys.cam_col(r.cam) {
            by_unknown[col].push(e);
        }
        by_unknown[sys.time_col(r.time)].push(e);
    }
    sys.by_unknown = by_unknown;
    Ok(sys)
}

#[derive(Clone, Debug)]
pub struct TranslationSolution {
    pub t_c: Vec<Vector3<f64>>,
    pub t_t: Vec<Vector3<f64>>,
    pub iterations: usize,
    /// `‖Jᵀ(b - J x)‖ / ‖Jᵀ b‖` at return.
    pub relative_gradient: f64,
}

fn dot(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Preconditioned conjugate gradients on `JᵀJ x = Jᵀ b` from zero. The
/// anchor camera is reinserted with a zero translation.
pub fn solve_translations(
    sys: &TranslationSystem,
    tol: f64,
    max_iter: usize,
) -> Result<TranslationSolution> {
    let n = sys.unknowns();
    let b: Vec<Vector3<f64>> = sys.rows.iter().map(|r| r.rhs).collect();
    let jtb = sys.apply_t(&b);
    let norm_b = dot(&jtb, &jtb).sqrt();
    let precond: Vec<Matrix3<f64>> = sys
        .diagonal_blocks()
        .iter()
        .map(|d| d.try_inverse().unwrap_or_else(Matrix3::zeros))
        .collect();
    let mut x = vec![Vector3::zeros(); n];
    let mut r = jtb.clone();
    let mut iterations = 0;
    let mut res = norm_b;
    if norm_b > 0.0 {
        let mut z: Vec<Vector3<f64>> = precond.iter().zip(&r).map(|(m, v)| m * v).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while res > tol * norm_b {
            if iterations >= max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res / norm_b,
                });
            }
            let ap = sys.apply_t(&sys.apply(&p));
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res / norm_b,
                });
            }
            let alpha = rz / pap;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut()
                .zip(&ap)
                .for_each(|(ri, api)| *ri -= alpha * api);
            iterations += 1;
            // Recompute the true gradient now and then to avoid drift.
            if iterations % 50 == 0 {
                let jx = sys.apply(&x);
                let resid: Vec<Vector3<f64>> = b.iter().zip(&jx).map(|(bi, ji)| bi - ji).collect();
                r = sys.apply_t(&resid);
            }
            res = dot(&r, &r).sqrt();
            z = precond.iter().zip(&r).map(|(m, v)| m * v).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut()
                .zip(&z)
                .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
    }
    let mut t_c = Vec::with_capacity(sys.cameras);
    for c in 0..sys.cameras {
        t_c.push(TranslationSystem::x_at(&x, sys.cam_col(c)));
    }
    let t_t = x[sys.cameras - 1..].to_vec();
    Ok(TranslationSolution {
        t_c,
        t_t,
        iterations,
        relative_gradient: if norm_b > 0.0 { res / norm_b } else { 0.0 },
    })
}
