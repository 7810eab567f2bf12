//! Optimality certificate for the bipartite rotation problem.

use nalgebra::{DMatrix, Matrix3};

use super::dual::DualBlocks;
use super::eig::{smallest_eigpairs_with, EigOptions};
use crate::blockgraph::BlockMatrix33;
use crate::error::{Error, Result};
use crate::geom::Rotation;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// Smallest eigenvalue of `Λ - R̃`.
    pub min_eig: f64,
    /// Allowed negative slack, `tol · Tr(Λ) / n` with `n` the scalar size.
    pub threshold: f64,
    pub certified: bool,
}

/// The symmetric `(C+T) x (C+T)` measurement matrix `[0 R̃_CT; R̃_CTᵀ 0]`.
pub fn full_measurement_matrix(rtilde_ct: &BlockMatrix33) -> BlockMatrix33 {
    let c = rtilde_ct.rows();
    let n = c + rtilde_ct.cols();
    BlockMatrix33::from_triplets(
        n,
        n,
        rtilde_ct
            .iter()
            .flat_map(|(i, j, b)| [(i, c + j, *b), (c + j, i, b.transpose())]),
    )
}

/// `Λ - R̃` for a block-diagonal `Λ`.
pub fn certificate_matrix(rtilde: &BlockMatrix33, lambda: &DualBlocks) -> Result<BlockMatrix33> {
    if rtilde.rows() != rtilde.cols() || lambda.len() != rtilde.rows() {
        return Err(Error::Shape(format!(
            "{} dual blocks for a {}x{} block matrix",
            lambda.len(),
            rtilde.rows(),
            rtilde.cols()
        )));
    }
    Ok(BlockMatrix33::from_triplets(
        rtilde.rows(),
        rtilde.cols(),
        rtilde
            .iter()
            .map(|(i, j, b)| (i, j, -b))
            .chain(lambda.blocks().iter().enumerate().map(|(i, b)| (i, i, *b))),
    ))
}

/// Checks `Λ - R̃ ⪰ 0` up to a slack relative to the mean dual scale.
pub fn check_certificate(
    rtilde: &BlockMatrix33,
    lambda: &DualBlocks,
    tol: f64,
) -> Result<Certificate> {
    check_certificate_with(rtilde, lambda, tol, &EigOptions::new(1e-9))
}

/// As [`check_certificate`], with explicit eigensolver options (a warm start
/// with the stacked primal solution speeds up large problems).
pub fn check_certificate_with(
    rtilde: &BlockMatrix33,
    lambda: &DualBlocks,
    tol: f64,
    opts: &EigOptions,
) -> Result<Certificate> {
    let l = certificate_matrix(rtilde, lambda)?;
    let pairs = smallest_eigpairs_with(&l, 3.min(3 * l.rows()), opts)?;
    let min_eig = pairs.values[0];
    let threshold = tol * lambda.trace().abs() / (3 * l.rows()) as f64;
    Ok(Certificate {
        min_eig,
        threshold,
        certified: min_eig >= -threshold,
    })
}

/// `‖(Λ - R̃) R‖_F / ‖R̃‖_F` for stacked rotations `R`.
pub fn kkt_residual(rtilde: &BlockMatrix33, lambda: &DualBlocks, r: &[Rotation]) -> Result<f64> {
    let l = certificate_matrix(rtilde, lambda)?;
    if r.len() != l.cols() {
        return Err(Error::Shape(format!(
            "{} rotations for {} nodes",
            r.len(),
            l.cols()
        )));
    }
    let stacked: Vec<Matrix3<f64>> = r.iter().map(|x| *x.matrix()).collect();
    let res = l
        .mul_blocks(&stacked)
        .iter()
        .map(|b| b.norm_squared())
        .sum::<f64>()
        .sqrt();
    let scale = rtilde.frobenius_norm();
    Ok(if scale > 0.0 { res / scale } else { res })
}

/// Stacks rotations into a `3n x 3` matrix with orthonormal columns.
pub fn stacked_basis(r: &[Rotation]) -> DMatrix<f64> {
    let s = 1.0 / (r.len() as f64).sqrt();
    let mut out = DMatrix::zeros(3 * r.len(), 3);
    for (i, x) in r.iter().enumerate() {
        out.fixed_view_mut::<3, 3>(3 * i, 0)
            .copy_from(&(x.matrix() * s));
    }
    out
}
