//! Executable sparse matrix formats: CRS, SELL-C-σ, and RCM reordering.

mod crs;
mod rcm;
mod sell;

pub use crs::{spmv_crs, spmv_crs_parallel, CrsMatrix};
pub use rcm::{permute_symmetric, rcm_reorder};
pub use sell::{
    auto_sigma, crs_to_sell, padding_report, spmv_sell, spmv_sell_parallel, PaddingReport,
    SellCSigmaMatrix, SIGMA_CANDIDATES,
};
