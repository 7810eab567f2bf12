//! Smallest eigenpairs of symmetric block operators.
//!
//! Small problems go through a dense symmetric eigendecomposition. Larger ones
//! use a thick-restarted block Krylov iteration with full reorthogonalization
//! and Rayleigh-Ritz extraction; the block size exceeds the number of wanted
//! pairs so that repeated eigenvalues (the three-fold kernel at a solution)
//! are resolved.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockgraph::BlockMatrix33;
use crate::error::{Error, Result};

/// Operators up to this many scalar rows are decomposed densely.
pub const DENSE_LIMIT: usize = 600;

const MAX_RESTARTS: usize = 500;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Options for the iterative path.
#[derive(Clone, Debug)]
pub struct EigOptions {
    /// Residual tolerance relative to the operator norm bound.
    pub tol: f64,
    pub seed: u64,
    /// Columns seeding the Krylov space (e.g. a previous solution).
    pub warm_start: Option<DMatrix<f64>>,
    /// Forces the iterative path regardless of size.
    pub force_iterative: bool,
}

impl EigOptions {
    pub fn new(tol: f64) -> Self {
        EigOptions {
            tol,
            seed: 0x5eed,
            warm_start: None,
            force_iterative: false,
        }
    }
}

/// The `count` smallest eigenpairs of a block-symmetric operator.
pub fn smallest_eigpairs(l: &BlockMatrix33, count: usize, tol: f64) -> Result<EigPairs> {
    smallest_eigpairs_with(l, count, &EigOptions::new(tol))
}

pub fn smallest_eigpairs_with(
    l: &BlockMatrix33,
    count: usize,
    opts: &EigOptions,
) -> Result<EigPairs> {
    if l.rows() != l.cols() {
        return Err(Error::Shape(format!(
            "{}x{} operator is not square",
            l.rows(),
            l.cols()
        )));
    }
    let n = 3 * l.rows();
    if count > n {
        return Err(Error::Shape(format!(
            "{count} eigenpairs requested from a {n}-dimensional operator"
        )));
    }
    if n <= DENSE_LIMIT && !opts.force_iterative {
        return Ok(dense_smallest(&l.to_dense(), count));
    }
    let bound = l.gershgorin_bound();
    block_krylov_smallest(n, &|x| l.mul_dense(x), bound, count, opts)
}

/// Dense path: full symmetric eigendecomposition.
pub fn dense_smallest(a: &DMatrix<f64>, count: usize) -> EigPairs {
    let sym = 0.5 * (a + a.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order[..count]
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    EigPairs { values, vectors }
}

/// Orthonormalizes the columns of `w` against `q` (which must have
/// orthonormal columns) and among themselves, twice. Columns that vanish are
/// replaced by fresh random directions.
fn orthonormalize_against(
    q: Option<&DMatrix<f64>>,
    mut w: DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = w.nrows();
    for j in 0..w.ncols() {
        let mut attempts = 0;
        loop {
            let original = w.column(j).norm();
            for _ in 0..2 {
                if let Some(q) = q {
                    let coeffs = q.tr_mul(&w.column(j));
                    let proj = q * coeffs;
                    w.column_mut(j).axpy(-1.0, &proj, 1.0);
                }
                for k in 0..j {
                    let d = w.column(k).dot(&w.column(j));
                    let ck = w.column(k).into_owned();
                    w.column_mut(j).axpy(-d, &ck, 1.0);
                }
            }
            let norm = w.column(j).norm();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) && norm > 1e-300 {
                w.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            attempts += 1;
            assert!(
                attempts < 20 && q.map_or(0, |q| q.ncols()) + j < n,
                "cannot extend orthonormal basis"
            );
            for i in 0..n {
                w[(i, j)] = StandardNormal.sample(rng);
            }
        }
    }
    w
}

fn random_block(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng))
}

/// Thick-restarted block Krylov iteration for the smallest eigenpairs of the
/// symmetric operator `apply` of size `n`. `norm_bound` bounds the spectral
/// radius and scales the residual tolerance.
pub fn block_krylov_smallest(
    n: usize,
    apply: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
    norm_bound: f64,
    count: usize,
    opts: &EigOptions,
) -> Result<EigPairs> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let block = (count + 3).min(n);
    let keep = (2 * block).min(n);
    let max_basis = n.min((12 * block).max(keep + 4 * block));
    let threshold = opts.tol * norm_bound.max(f64::MIN_POSITIVE);

    let mut start = random_block(n, block, &mut rng);
    if let Some(ws) = &opts.warm_start {
        let k = ws.ncols().min(block);
        for j in 0..k {
            start.set_column(j, &ws.column(j));
        }
    }
    let mut basis = orthonormalize_against(None, start, &mut rng);
    let mut applied = apply(&basis);
    let mut frontier = applied.clone();
    let mut best_residual = f64::INFINITY;

    for _restart in 0..MAX_RESTARTS {
        // Expand the Krylov space block by block.
        while basis.ncols() < max_basis {
            let width = block.min(max_basis - basis.ncols());
            let next = frontier.columns(0, width).into_owned();
            let next = orthonormalize_against(Some(&basis), next, &mut rng);
            let a_next = apply(&next);
            basis = concat_columns(&basis, &next);
            applied = concat_columns(&applied, &a_next);
            frontier = a_next;
        }
        // Rayleigh-Ritz.
        let h = basis.tr_mul(&applied);
        let ritz = dense_smallest(&h, keep.min(h.ncols()));
        let y = &basis * &ritz.vectors;
        let ay = &applied * &ritz.vectors;
        let mut residual = ay.clone();
        for (j, theta) in ritz.values.iter().enumerate() {
            let yj = y.column(j).into_owned();
            residual.column_mut(j).axpy(-theta, &yj, 1.0);
        }
        let worst = (0..count)
            .map(|j| residual.column(j).norm())
            .fold(0.0, f64::max);
        best_residual = best_residual.min(worst);
        if worst <= threshold || basis.ncols() >= n {
            let vectors = y.columns(0, count).into_owned();
            return Ok(EigPairs {
                values: ritz.values[..count].to_vec(),
                vectors,
            });
        }
        // Restart with the kept Ritz vectors; continue from their residuals.
        basis = y;
        applied = ay;
        frontier = residual;
    }
    Err(Error::NoConvergence {
        iterations: MAX_RESTARTS,
        residual: best_residual,
    })
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}
