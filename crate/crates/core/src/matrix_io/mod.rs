//! Matrix ingestion (Matrix Market) and synthesis (HPCG 27-point stencil).

mod hpcg;
mod market;

pub use hpcg::{generate_hpcg, HPCG_DIAGONAL, HPCG_OFF_DIAGONAL};
pub use market::{
    read_matrix_market, read_matrix_market_from, write_matrix_market, MatrixMarketHeader,
    MmField, MmFormat, MmSymmetry,
};
