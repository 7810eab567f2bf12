//! Sparse matrices of 3x3 blocks, row-compressed by block.

use nalgebra::{DMatrix, Matrix3};

/// Sparse matrix whose entries are 3x3 real blocks. Absent blocks are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix33 {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<Matrix3<f64>>,
}

impl BlockMatrix33 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BlockMatrix33 {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// Builds from `(row, col, block)` triplets; duplicates are summed.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Matrix3<f64>)>,
    {
        let mut entries: Vec<(usize, usize, Matrix3<f64>)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut blocks: Vec<Matrix3<f64>> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, b) in entries {
            assert!(
                i < rows && j < cols,
                "block ({i}, {j}) outside {rows}x{cols}"
            );
            if last == Some((i, j)) {
                *blocks.last_mut().unwrap() += b;
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                blocks.push(b);
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        BlockMatrix33 {
            rows,
            cols,
            row_ptr,
            col_idx,
            blocks,
        }
    }

    /// Appends a block row given as `(col, block)` pairs.
    pub fn push_row<I: IntoIterator<Item = (usize, Matrix3<f64>)>>(&mut self, row: I) {
        let mut entries: Vec<(usize, Matrix3<f64>)> = row.into_iter().collect();
        entries.sort_by_key(|(j, _)| *j);
        for (j, b) in entries {
            assert!(
                j < self.cols,
                "column {j} outside {} block columns",
                self.cols
            );
            if self.col_idx.len() > self.row_ptr[self.rows] && *self.col_idx.last().unwrap() == j {
                *self.blocks.last_mut().unwrap() += b;
            } else {
                self.col_idx.push(j);
                self.blocks.push(b);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        self.rows += 1;
    }

    pub fn block_diagonal(diag: &[Matrix3<f64>]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, b)| (i, i, *b)),
        )
    }

    /// Dense `n x n` block storage, row-major, with all-zero blocks dropped.
    pub fn from_dense_blocks(n: usize, dense: &[Matrix3<f64>]) -> Self {
        assert_eq!(dense.len(), n * n);
        Self::from_triplets(
            n,
            n,
            dense
                .iter()
                .enumerate()
                .filter(|(_, b)| b.iter().any(|v| *v != 0.0))
                .map(|(k, b)| (k / n, k % n, *b)),
        )
    }

    /// Number of block rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of block columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Matrix3<f64>> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| &self.blocks[range.start + k])
    }

    /// Stored blocks of row `i` as `(col, block)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &Matrix3<f64>)> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.blocks[range].iter())
    }

    /// All stored blocks as `(row, col, block)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Matrix3<f64>)> {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, b)| (i, j, b)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.iter().map(|(i, j, b)| (j, i, b.transpose())),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.blocks.iter_mut().for_each(|b| *b *= s);
        out
    }

    /// `self + other`, both of the same shape.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_triplets(
            self.rows,
            self.cols,
            self.iter().chain(other.iter()).map(|(i, j, b)| (i, j, *b)),
        )
    }

    /// Product with a block vector: `y_i = Σ_j B_ij x_j`.
    pub fn mul_blocks(&self, x: &[Matrix3<f64>]) -> Vec<Matrix3<f64>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .fold(Matrix3::zeros(), |acc, (j, b)| acc + b * x[j])
            })
            .collect()
    }

    /// Product with a dense `3 cols x k` matrix.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), 3 * self.cols);
        let k = x.ncols();
        let mut y = DMatrix::zeros(3 * self.rows, k);
        for c in 0..k {
            let xc = x.column(c);
            let xs = xc.as_slice();
            let mut yc = y.column_mut(c);
            let ys = yc.as_mut_slice();
            for i in 0..self.rows {
                let mut acc = [0.0f64; 3];
                for (j, b) in self.row(i) {
                    let xj = &xs[3 * j..3 * j + 3];
                    for r in 0..3 {
                        acc[r] += b[(r, 0)] * xj[0] + b[(r, 1)] * xj[1] + b[(r, 2)] * xj[2];
                    }
                }
                ys[3 * i..3 * i + 3].copy_from_slice(&acc);
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(3 * self.rows, 3 * self.cols);
        for (i, j, b) in self.iter() {
            d.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(b);
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Maximum absolute scalar row sum, an upper bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.rows)
            .flat_map(|i| {
                let mut sums = [0.0f64; 3];
                for (_, b) in self.row(i) {
                    for (r, s) in sums.iter_mut().enumerate() {
                        *s += b.row(r).iter().map(|v| v.abs()).sum::<f64>();
                    }
                }
                sums
            })
            .fold(0.0, f64::max)
    }

    /// Whether block `(i, j)` equals the transpose of block `(j, i)` within `tol`.
    pub fn is_block_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let zero = Matrix3::zeros();
        self.iter().all(|(i, j, b)| {
            let other = self.get(j, i).unwrap_or(&zero);
            (b - other.transpose()).norm() <= tol
        })
    }
}

/// Sparse scalar matrix in CSR form; used for the merged adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarCsr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl ScalarCsr {
    /// Builds from triplets, summing duplicates.
    pub fn from_triplets<I: IntoIterator<Item = (usize, usize, f64)>>(
        rows: usize,
        cols: usize,
        triplets: I,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            assert!(
                i < rows && j < cols,
                "entry ({i}, {j}) outside {rows}x{cols}"
            );
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                values.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        ScalarCsr {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Appends a row given as `(col, value)` pairs.
    pub fn push_row<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I) {
        let mut entries: Vec<(usize, f64)> = row.into_iter().collect();
        entries.sort_by_key(|(j, _)| *j);
        for (j, v) in entries {
            assert!(j < self.cols, "column {j} outside {} columns", self.cols);
            if self.col_idx.len() > self.row_ptr[self.rows] && *self.col_idx.last().unwrap() == j {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.col_idx.push(j);
                self.values.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .map(|k| self.values[range.start + k])
            .unwrap_or(0.0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(i, j, v)| (j, i, v)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }
}
