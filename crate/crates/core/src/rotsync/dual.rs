//! Dual variables, their closed-form block updates, and the primal projection
//! from an eigenbasis.

use nalgebra::{DMatrix, Matrix3};

use crate::blockgraph::{power_graph_adjacency, BlockMatrix33, ScalarCsr};
use crate::error::Result;
use crate::geom::{project_to_so3, svd3, try_project_to_so3, Rotation};

/// Block-diagonal dual variable: one symmetric 3x3 block per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DualBlocks(pub Vec<Matrix3<f64>>);

impl DualBlocks {
    pub fn scaled_identity(diag: &[f64]) -> Self {
        DualBlocks(diag.iter().map(|d| Matrix3::identity() * *d).collect())
    }

    pub fn blocks(&self) -> &[Matrix3<f64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.0.iter().map(|b| b.trace()).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.0.iter().all(|b| (b - b.transpose()).norm() <= tol)
    }
}

/// `U Σ Uᵀ` from the SVD of `s`: the symmetric PSD factor of its left polar
/// decomposition.
pub fn symmetric_factor(s: &Matrix3<f64>) -> Matrix3<f64> {
    let (u, sigma, _) = svd3(s);
    let out = u * Matrix3::from_diagonal(&sigma) * u.transpose();
    0.5 * (out + out.transpose())
}

/// Spectral initialization: `Λ_T = Δ_T ⊗ I` and
/// `Λ_C = Diag(A_CT Δ_T^-1 A_CTᵀ 1) ⊗ I`.
pub fn spectral_init_duals(adj_ct: &ScalarCsr, deg_t: &[f64]) -> (DualBlocks, DualBlocks) {
    let power = power_graph_adjacency(adj_ct, deg_t);
    let row_sums: Vec<f64> = (0..power.nrows()).map(|i| power.row(i).sum()).collect();
    (
        DualBlocks::scaled_identity(&row_sums),
        DualBlocks::scaled_identity(deg_t),
    )
}

/// Camera dual update on the power graph: `S = M R_C`, block `i` becomes the
/// symmetric factor of `S_i`.
pub fn dual_update_c(power_op: &BlockMatrix33, r_c: &[Rotation]) -> DualBlocks {
    let stacked: Vec<Matrix3<f64>> = r_c.iter().map(|r| *r.matrix()).collect();
    DualBlocks(
        power_op
            .mul_blocks(&stacked)
            .iter()
            .map(symmetric_factor)
            .collect(),
    )
}

/// `G_t = Σ_c [R̃_CT]_{c,t}ᵀ R_c` for every time node, given `by_time = R̃_CTᵀ`.
pub fn object_gradients(by_time: &BlockMatrix33, r_c: &[Rotation]) -> Vec<Matrix3<f64>> {
    let stacked: Vec<Matrix3<f64>> = r_c.iter().map(|r| *r.matrix()).collect();
    by_time.mul_blocks(&stacked)
}

/// Object dual update: block `t` becomes the symmetric factor of `G_t`.
pub fn dual_update_t(rtilde_ct: &BlockMatrix33, r_c: &[Rotation]) -> DualBlocks {
    dual_update_t_grouped(&rtilde_ct.transpose(), r_c)
}

pub(crate) fn dual_update_t_grouped(by_time: &BlockMatrix33, r_c: &[Rotation]) -> DualBlocks {
    DualBlocks(
        object_gradients(by_time, r_c)
            .iter()
            .map(symmetric_factor)
            .collect(),
    )
}

/// Closed-form object rotations given the cameras: `R_t = proj(G_t)`.
pub fn object_rotations(by_time: &BlockMatrix33, r_c: &[Rotation]) -> Vec<Rotation> {
    object_gradients(by_time, r_c)
        .iter()
        .map(project_to_so3)
        .collect()
}

/// `-Tr(M R Rᵀ)` for a block-symmetric operator `M` and stacked rotations.
pub fn sync_cost(op: &BlockMatrix33, r: &[Rotation]) -> f64 {
    let stacked: Vec<Matrix3<f64>> = r.iter().map(|x| *x.matrix()).collect();
    -op.mul_blocks(&stacked)
        .iter()
        .zip(&stacked)
        .map(|(s, ri)| (ri.transpose() * s).trace())
        .sum::<f64>()
}

/// Projects each 3x3 block of an orthonormal `3n x 3` eigenbasis onto SO(3).
///
/// The eigenspace only fixes the basis up to O(3); a global reflection makes
/// every block improper. Both the basis and its reflection (third column
/// negated) are projected and the candidate with the lower cost
/// `-Tr(op R Rᵀ)` is kept.
pub fn primal_from_eigvectors(
    v: &DMatrix<f64>,
    op: &BlockMatrix33,
    strict: bool,
) -> Result<Vec<Rotation>> {
    let n = v.nrows() / 3;
    let block = |i: usize, flip: bool| -> Matrix3<f64> {
        let mut b: Matrix3<f64> = v.fixed_view::<3, 3>(3 * i, 0).into_owned();
        if flip {
            b.column_mut(2).neg_mut();
        }
        b
    };
    let project =
        |flip: bool| -> Vec<Rotation> { (0..n).map(|i| project_to_so3(&block(i, flip))).collect() };
    let plain = project(false);
    let flipped = project(true);
    let flip = sync_cost(op, &flipped) < sync_cost(op, &plain);
    if strict {
        return (0..n)
            .map(|i| try_project_to_so3(&block(i, flip)))
            .collect();
    }
    Ok(if flip { flipped } else { plain })
}
