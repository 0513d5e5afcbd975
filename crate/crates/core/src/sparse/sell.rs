use std::cmp::Reverse;
use std::thread;

use serde::{Deserialize, Serialize};

use super::crs::CrsMatrix;
use crate::error::{Error, Result};

/// SELL-C-σ: chunks of `C` rows, zero-padded to the longest row in the chunk
/// and stored column-major, after sorting rows by descending length within
/// windows of `σ` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SellCSigmaMatrix {
    nrows: usize,
    ncols: usize,
    c: usize,
    sigma: usize,
    nnz: usize,
    chunk_offsets: Vec<usize>,
    chunk_lengths: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
    /// `row_perm[new] = old`.
    row_perm: Vec<usize>,
    /// `inverse_perm[old] = new`.
    inverse_perm: Vec<usize>,
}

/// Storage overhead caused by zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaddingReport {
    pub nnz: usize,
    pub stored: usize,
    /// `stored / nnz - 1`; zero for an empty matrix.
    pub overhead: f64,
}

pub fn crs_to_sell(a: &CrsMatrix, c: usize, sigma: usize) -> Result<SellCSigmaMatrix> {
    if c == 0 {
        return Err(Error::InvalidArgument {
            name: "C",
            reason: "chunk height must be at least 1".into(),
        });
    }
    if sigma == 0 {
        return Err(Error::InvalidArgument {
            name: "sigma",
            reason: "sorting window must be at least 1".into(),
        });
    }
    let nrows = a.nrows();

    let mut row_perm: Vec<usize> = (0..nrows).collect();
    for window in row_perm.chunks_mut(sigma) {
        // Stable, so equal lengths keep their original order.
        window.sort_by_key(|&r| Reverse(a.row_len(r)));
    }
    let mut inverse_perm = vec![0; nrows];
    for (new, &old) in row_perm.iter().enumerate() {
        inverse_perm[old] = new;
    }

    let nchunks = nrows.div_ceil(c);
    let mut chunk_lengths = Vec::with_capacity(nchunks);
    let mut chunk_offsets = Vec::with_capacity(nchunks + 1);
    chunk_offsets.push(0);
    for rows in row_perm.chunks(c) {
        let len = rows.iter().map(|&r| a.row_len(r)).max().unwrap_or(0);
        chunk_lengths.push(len);
        chunk_offsets.push(chunk_offsets.last().unwrap() + c * len);
    }

    let stored = *chunk_offsets.last().unwrap();
    let pad_col = a.ncols().saturating_sub(1) as u32;
    let mut col_indices = vec![pad_col; stored];
    let mut values = vec![0.0; stored];
    for (k, rows) in row_perm.chunks(c).enumerate() {
        let base = chunk_offsets[k];
        for (lane, &r) in rows.iter().enumerate() {
            let (cols, vals) = a.row(r);
            for (j, (&col, &v)) in cols.iter().zip(vals).enumerate() {
                col_indices[base + j * c + lane] = col;
                values[base + j * c + lane] = v;
            }
        }
    }

    Ok(SellCSigmaMatrix {
        nrows,
        ncols: a.ncols(),
        c,
        sigma,
        nnz: a.nnz(),
        chunk_offsets,
        chunk_lengths,
        col_indices,
        values,
        row_perm,
        inverse_perm,
    })
}

impl SellCSigmaMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn chunk_height(&self) -> usize {
        self.c
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn nchunks(&self) -> usize {
        self.chunk_lengths.len()
    }

    pub fn chunk_offsets(&self) -> &[usize] {
        &self.chunk_offsets
    }

    pub fn chunk_lengths(&self) -> &[usize] {
        &self.chunk_lengths
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn inverse_perm(&self) -> &[usize] {
        &self.inverse_perm
    }

    /// Entries held in storage, padding included.
    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    /// Stored entry at `(chunk, column-within-chunk, lane)`.
    pub fn entry(&self, chunk: usize, j: usize, lane: usize) -> (u32, f64) {
        let idx = self.chunk_offsets[chunk] + j * self.c + lane;
        (self.col_indices[idx], self.values[idx])
    }

    fn chunk_product(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let base = self.chunk_offsets[k];
        for j in 0..self.chunk_lengths[k] {
            let start = base + j * self.c;
            let cols = &self.col_indices[start..start + self.c];
            let vals = &self.values[start..start + self.c];
            for ((acc, &col), &v) in out.iter_mut().zip(cols).zip(vals) {
                *acc += v * x[col as usize];
            }
        }
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

    fn unpermute(&self, permuted: &[f64]) -> Vec<f64> {
        self.inverse_perm.iter().map(|&new| permuted[new]).collect()
    }
}

/// `y = A·x` in the original row order.
pub fn spmv_sell(a: &SellCSigmaMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.check_rhs(x)?;
    let mut permuted = vec![0.0; a.nchunks() * a.c];
    for (k, out) in permuted.chunks_mut(a.c).enumerate() {
        a.chunk_product(k, x, out);
    }
    Ok(a.unpermute(&permuted))
}

/// `y = A·x` with chunks distributed over `threads` workers; bit-identical to [`spmv_sell`].
pub fn spmv_sell_parallel(a: &SellCSigmaMatrix, x: &[f64], threads: usize) -> Result<Vec<f64>> {
    a.check_rhs(x)?;
    let threads = threads.max(1);
    let mut permuted = vec![0.0; a.nchunks() * a.c];
    if threads == 1 || a.nchunks() < 2 {
        for (k, out) in permuted.chunks_mut(a.c).enumerate() {
            a.chunk_product(k, x, out);
        }
    } else {
        let per_worker = a.nchunks().div_ceil(threads);
        thread::scope(|s| {
            for (w, block) in permuted.chunks_mut(per_worker * a.c).enumerate() {
                s.spawn(move || {
                    for (i, out) in block.chunks_mut(a.c).enumerate() {
                        a.chunk_product(w * per_worker + i, x, out);
                    }
                });
            }
        });
    }
    Ok(a.unpermute(&permuted))
}

pub fn padding_report(s: &SellCSigmaMatrix) -> PaddingReport {
    let stored = s.stored_entries();
    let overhead = if s.nnz == 0 {
        0.0
    } else {
        stored as f64 / s.nnz as f64 - 1.0
    };
    PaddingReport {
        nnz: s.nnz,
        stored,
        overhead,
    }
}

/// σ candidates tried by [`auto_sigma`]: powers of two up to 1024.
pub const SIGMA_CANDIDATES: [usize; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// Smallest σ in [`SIGMA_CANDIDATES`] whose padding overhead is at most
/// `max_overhead`; falls back to the candidate with the least overhead.
pub fn auto_sigma(a: &CrsMatrix, c: usize, max_overhead: f64) -> Result<(usize, PaddingReport)> {
    let mut best: Option<(usize, PaddingReport)> = None;
    for sigma in SIGMA_CANDIDATES {
        let report = padding_report(&crs_to_sell(a, c, sigma)?);
        if report.overhead <= max_overhead {
            return Ok((sigma, report));
        }
        if best.is_none_or(|(_, b)| report.overhead < b.overhead) {
            best = Some((sigma, report));
        }
    }
    Ok(best.expect("candidate list is not empty"))
}
