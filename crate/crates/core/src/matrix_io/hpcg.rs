//! HPCG-style 27-point stencil matrices.

use crate::error::{Error, Result};
use crate::sparse::CrsMatrix;

pub const HPCG_DIAGONAL: f64 = 26.0;
pub const HPCG_OFF_DIAGONAL: f64 = -1.0;

/// 27-point stencil on an `nx × ny × nz` grid; row `x + nx·(y + ny·z)` couples
/// to every grid neighbor in the surrounding 3×3×3 cube, including itself.
pub fn generate_hpcg(nx: usize, ny: usize, nz: usize) -> Result<CrsMatrix> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument {
            name: "grid",
            reason: format!("dimensions must be at least 1, got {nx}x{ny}x{nz}"),
        });
    }
    let too_large = || Error::GridTooLarge { nx, ny, nz };
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(too_large)?;
    let capacity = n.checked_mul(27).ok_or_else(too_large)?;

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(capacity);
    let mut values = Vec::with_capacity(capacity);
    row_offsets.push(0);

    let range = |i: usize, len: usize| i.saturating_sub(1)..=(i + 1).min(len - 1);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let row = x + nx * (y + ny * z);
                // z-major neighbor loop keeps columns ascending.
                for zz in range(z, nz) {
                    for yy in range(y, ny) {
                        for xx in range(x, nx) {
                            let col = xx + nx * (yy + ny * zz);
                            col_indices.push(col as u32);
                            values.push(if col == row {
                                HPCG_DIAGONAL
                            } else {
                                HPCG_OFF_DIAGONAL
                            });
                        }
                    }
                }
                row_offsets.push(col_indices.len());
            }
        }
    }
    CrsMatrix::new(n, n, row_offsets, col_indices, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let a = generate_hpcg(1, 1, 1).unwrap();
        assert_eq!(a.triplets().collect::<Vec<_>>(), [(0, 0, 26.0)]);
    }

    #[test]
    fn cube_of_three() {
        let a = generate_hpcg(3, 3, 3).unwrap();
        assert_eq!(a.row_len(13), 27);
        for corner in [0, 2, 6, 8, 18, 20, 24, 26] {
            assert_eq!(a.row_len(corner), 8);
        }
    }

    #[test]
    fn structure_and_row_sums() {
        let a = generate_hpcg(4, 3, 5).unwrap();
        assert!(a.is_structurally_symmetric());
        for r in 0..a.nrows() {
            let (cols, vals) = a.row(r);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
            let sum: f64 = vals.iter().sum();
            assert_eq!(sum, 26.0 - (cols.len() - 1) as f64);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(generate_hpcg(0, 1, 1).is_err());
        assert!(matches!(
            generate_hpcg(1 << 20, 1 << 20, 1 << 20),
            Err(Error::GridTooLarge { .. })
        ));
    }
}
