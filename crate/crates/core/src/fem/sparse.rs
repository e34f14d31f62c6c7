//! Compressed sparse row matrices.

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries. Duplicates are summed in
    /// input order, so the result depends only on the order of `entries`.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= nrows || *j >= ncols) {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
            )));
        }
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&k| (entries[k].0, entries[k].1));

        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = entries[k];
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// A matrix with a fixed pattern and zero values. `pattern[i]` lists the
    /// column indices of row `i` in increasing order.
    pub(crate) fn zeros_with_pattern(ncols: usize, pattern: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(pattern.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in pattern {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            nrows: pattern.len(),
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            symmetric: false,
        }
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[start..end].binary_search(&j).ok().map(|k| start + k)
    }

    /// Adds into an entry that must already be in the pattern.
    pub(crate) fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn is_flagged_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Marks the matrix symmetric after checking it to within `rel_tol` of its largest entry.
    pub fn flag_symmetric(&mut self, rel_tol: f64) -> Result<()> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let asym = self.max_asymmetry();
        if self.nrows != self.ncols || asym > rel_tol * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix is not symmetric: max |A - A^T| = {asym:e}"
            )));
        }
        self.symmetric = true;
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in sparse product");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `a A + b B`, entry-wise.
    pub fn linear_combination(a: f64, lhs: &Self, b: f64, rhs: &Self) -> Result<Self> {
        if (lhs.nrows, lhs.ncols) != (rhs.nrows, rhs.ncols) {
            return Err(Error::InvalidArgument(format!(
                "cannot combine {}x{} and {}x{} matrices",
                lhs.nrows, lhs.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let entries: Vec<_> = lhs
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(rhs.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        let mut out = Self::from_triplets(lhs.nrows, lhs.ncols, &entries)?;
        out.symmetric = lhs.symmetric && rhs.symmetric;
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let entries: Vec<_> = self
            .triplets()
            .map(|(row, col, val)| Triplet { row, col, val })
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &entries)
            .map_err(|e| Error::Solver {
                message: format!("cannot convert matrix for factorization: {e:?}"),
                residual: None,
            })
    }
}
