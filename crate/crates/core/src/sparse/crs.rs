use std::thread;

use crate::error::{Error, Result};

/// Compressed Row Storage with 4-byte column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CrsMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl CrsMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has {} entries, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets[0] must be 0".into()));
        }
        if let Some(r) = row_offsets.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets decreases at row {r}"
            )));
        }
        let nnz = row_offsets[nrows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidMatrix(format!(
                "expected {nnz} entries, got {} column indices and {} values",
                col_indices.len(),
                values.len()
            )));
        }
        if ncols > u32::MAX as usize + 1 {
            return Err(Error::InvalidMatrix(format!(
                "{ncols} columns do not fit 4-byte indices"
            )));
        }
        if let Some(&c) = col_indices.iter().find(|&&c| c as usize >= ncols) {
            return Err(Error::InvalidMatrix(format!(
                "column index {c} out of range for {ncols} columns"
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// and each row is sorted by column.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({r}, {c}) outside {nrows}x{ncols}"
            )));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_offsets[r + 1] += 1;
            col_indices.push(c as u32);
            values.push(v);
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self::new(nrows, ncols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, (0..=n).collect(), (0..n as u32).collect(), vec![1.0; n])
            .expect("identity is well formed")
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_len(&self, row: usize) -> usize {
        self.row_offsets[row + 1] - self.row_offsets[row]
    }

    /// Column indices and values of one row.
    pub fn row(&self, row: usize) -> (&[u32], &[f64]) {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Iterates over `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    /// `‖A‖∞`, the maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Whether the sparsity pattern equals that of the transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && self.triplets().all(|(r, c, _)| {
                let (cols, _) = self.row(c);
                cols.binary_search(&(r as u32)).is_ok()
            })
    }

    fn check_rhs(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(row);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum()
    }
}

/// `y = A·x`.
pub fn spmv_crs(a: &CrsMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.check_rhs(x)?;
    Ok((0..a.nrows).map(|r| a.row_dot(r, x)).collect())
}

/// `y = A·x` with row blocks distributed over `threads` workers.
///
/// Each output element is computed by exactly one worker in the same order as
/// [`spmv_crs`], so results are bit-identical.
pub fn spmv_crs_parallel(a: &CrsMatrix, x: &[f64], threads: usize) -> Result<Vec<f64>> {
    a.check_rhs(x)?;
    let mut y = vec![0.0; a.nrows];
    let threads = threads.max(1);
    if threads == 1 || a.nrows < 2 {
        for (r, out) in y.iter_mut().enumerate() {
            *out = a.row_dot(r, x);
        }
        return Ok(y);
    }
    let block = a.nrows.div_ceil(threads);
    thread::scope(|s| {
        for (b, ys) in y.chunks_mut(block).enumerate() {
            s.spawn(move || {
                for (i, out) in ys.iter_mut().enumerate() {
                    *out = a.row_dot(b * block + i, x);
                }
            });
        }
    });
    Ok(y)
}
