//! Analytic performance model of sparse matrix-vector multiplication.
//!
//! Memory traffic per row is `n_nzr · (value + index + 8α) + 20` bytes: each
//! nonzero streams an 8-byte value and a 4-byte column index, the right-hand
//! side costs `8α` bytes per nonzero, and each row pays 8 bytes for the result
//! store, 8 for its write-allocate, and 4 for the row offset.
//!
//! CRS is bound by the FMA latency chain of the short inner loop plus the
//! horizontal `faddv` reduction. SELL-C-σ processes `C` rows at once, so the
//! reduction disappears and the index load + gather throughput dominates; its
//! in-core, L2, and memory contributions add because all transfers are reads.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ecm::{compose, scale, EcmPrediction, ScalingCurve, TrafficProfile, WorkUnit};
use crate::error::{Error, Result};
use crate::machine::MachineModel;
use crate::sparse::{CrsMatrix, SellCSigmaMatrix};

const FMA_FORM: &str = "fmla";
const HORIZONTAL_ADD_FORM: &str = "faddv_512";
const GATHER_FORM: &str = "complex_gather_plus_load";
const LOAD_FORM: &str = "ld1d";

/// Inputs of the per-row traffic formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpmvTrafficParams {
    /// Average nonzeros per row.
    pub n_nzr: f64,
    /// Right-hand-side access efficiency.
    pub alpha: f64,
    pub value_bytes: f64,
    pub index_bytes: f64,
    pub lhs_bytes_per_row: f64,
}

impl SpmvTrafficParams {
    pub fn new(n_nzr: f64, alpha: f64) -> Result<Self> {
        if !(n_nzr.is_finite() && n_nzr >= 0.0) {
            return Err(Error::InvalidArgument {
                name: "n_nzr",
                reason: format!("must be non-negative, got {n_nzr}"),
            });
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidArgument {
                name: "alpha",
                reason: format!("must be non-negative, got {alpha}"),
            });
        }
        Ok(Self {
            n_nzr,
            alpha,
            value_bytes: 8.0,
            index_bytes: 4.0,
            lhs_bytes_per_row: 20.0,
        })
    }

    /// Every RHS element is loaded from memory exactly once (`α = 1/n_nzr`).
    pub fn optimistic(n_nzr: f64) -> Result<Self> {
        let alpha = if n_nzr > 0.0 { 1.0 / n_nzr } else { 0.0 };
        Self::new(n_nzr, alpha)
    }
}

pub fn traffic_per_row(p: &SpmvTrafficParams) -> f64 {
    p.n_nzr * (p.value_bytes + p.index_bytes + 8.0 * p.alpha) + p.lhs_bytes_per_row
}

/// Latency-bound in-core time of one CRS row:
/// `ceil(n_nzr / VL) · FMA latency + faddv throughput`.
pub fn crs_core_cycles_per_row(m: &MachineModel, n_nzr: f64) -> Result<f64> {
    if !(n_nzr.is_finite() && n_nzr > 0.0) {
        return Err(Error::InvalidArgument {
            name: "n_nzr",
            reason: format!("must be positive, got {n_nzr}"),
        });
    }
    let fma = m.lookup_instruction(FMA_FORM)?.require_latency()?;
    let reduce = m.lookup_instruction(HORIZONTAL_ADD_FORM)?.reciprocal_throughput;
    let vectors = (n_nzr / f64::from(m.vector_length_doubles)).ceil();
    Ok(vectors * fma + reduce)
}

/// Whether CRS SpMV can reach the domain bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrsSaturation {
    pub cycles_per_row: f64,
    pub bytes_per_row: f64,
    /// Bytes per second one core can demand.
    pub per_core_bw: f64,
    /// All cores of the domain together.
    pub domain_demand: f64,
    /// Measured multi-stream domain bandwidth.
    pub domain_bw: f64,
    pub saturates: bool,
}

pub fn crs_saturation_check(m: &MachineModel, n_nzr: f64, alpha: f64) -> Result<CrsSaturation> {
    m.validate()?;
    let bytes_per_row = traffic_per_row(&SpmvTrafficParams::new(n_nzr, alpha)?);
    let cycles_per_row = crs_core_cycles_per_row(m, n_nzr)?;
    let per_core_bw = bytes_per_row * m.frequency / cycles_per_row;
    let domain_demand = f64::from(m.cores_per_domain) * per_core_bw;
    let domain_bw = m.mem_bw_multistream * m.frequency;
    Ok(CrsSaturation {
        cycles_per_row,
        bytes_per_row,
        per_core_bw,
        domain_demand,
        domain_bw,
        saturates: domain_demand >= domain_bw,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpmvFormat {
    Crs,
    Sell,
}

/// Single-core and domain-level SpMV prediction, per matrix row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpmvPrediction {
    pub format: SpmvFormat,
    pub traffic: TrafficProfile,
    pub cycles: EcmPrediction,
    /// Index load + gather + value load cycles.
    pub gather_cycles: f64,
    /// Loop-carried latency bound (reported even when it does not dominate).
    pub reduction_bound: f64,
    pub bytes_per_row: f64,
    pub flops_per_row: f64,
    /// Flop/s of one core with the matrix in memory.
    pub single_core_perf: f64,
    /// Bytes/s of one core with the matrix in memory.
    pub single_core_bw: f64,
    pub scaling: ScalingCurve,
}

impl SpmvPrediction {
    fn assemble(
        m: &MachineModel,
        format: SpmvFormat,
        n_nzr: f64,
        gather_cycles: f64,
        reduction_bound: f64,
        bytes_per_row: f64,
    ) -> Self {
        let traffic = TrafficProfile {
            work_unit: WorkUnit::MatrixRow,
            core_load_cycles: gather_cycles,
            core_store_cycles: 0.0,
            dependency_chain_cycles: reduction_bound,
            l1l2_read_bytes: bytes_per_row,
            l1l2_write_bytes: 0.0,
            mem_read_bytes: bytes_per_row,
            mem_write_bytes: 0.0,
            readonly: false,
        };
        let cycles = compose(m, &traffic);
        let flops_per_row = 2.0 * n_nzr;
        let scaling = scale(m, &cycles, &traffic);
        Self {
            format,
            traffic,
            cycles,
            gather_cycles,
            reduction_bound,
            bytes_per_row,
            flops_per_row,
            single_core_perf: flops_per_row * m.frequency / cycles.t_mem,
            single_core_bw: bytes_per_row * m.frequency / cycles.t_mem,
            scaling,
        }
    }

    /// Flop/s at the bandwidth roof of one domain, if there is one.
    pub fn roof_perf(&self, m: &MachineModel) -> Option<f64> {
        self.scaling
            .roof_units_per_cycle
            .map(|rows| rows * m.frequency * self.flops_per_row)
    }

    /// Flop/s per core count along the scaling curve.
    pub fn perf_curve(&self) -> Vec<(u32, f64)> {
        self.scaling
            .points
            .iter()
            .map(|p| (p.cores, p.units_per_second * self.flops_per_row))
            .collect()
    }
}

fn gather_cost_per_vector(m: &MachineModel) -> Result<f64> {
    Ok(m.lookup_instruction(GATHER_FORM)?.reciprocal_throughput
        + m.lookup_instruction(LOAD_FORM)?.reciprocal_throughput)
}

fn check_unroll(unroll_ways: u32) -> Result<()> {
    if unroll_ways == 0 {
        return Err(Error::InvalidArgument {
            name: "unroll",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// SELL-C-σ prediction from row statistics.
pub fn sell_cycles_per_row(
    m: &MachineModel,
    n_nzr: f64,
    alpha: f64,
    unroll_ways: u32,
) -> Result<SpmvPrediction> {
    sell_cycles_per_row_padded(m, n_nzr, n_nzr, alpha, unroll_ways)
}

/// SELL-C-σ prediction where `stored_per_row` (padding included) drives the
/// gather cost and the value/index traffic while `n_nzr` drives flops and RHS traffic.
pub fn sell_cycles_per_row_padded(
    m: &MachineModel,
    n_nzr: f64,
    stored_per_row: f64,
    alpha: f64,
    unroll_ways: u32,
) -> Result<SpmvPrediction> {
    check_unroll(unroll_ways)?;
    let params = SpmvTrafficParams::new(n_nzr, alpha)?;
    if !(stored_per_row.is_finite() && stored_per_row >= n_nzr) {
        return Err(Error::InvalidArgument {
            name: "stored_per_row",
            reason: format!("must be at least n_nzr ({n_nzr}), got {stored_per_row}"),
        });
    }
    let vectors = stored_per_row / f64::from(m.vector_length_doubles);
    let gather = gather_cost_per_vector(m)? * vectors;
    let fma = m.lookup_instruction(FMA_FORM)?.require_latency()?;
    let reduction = fma / f64::from(unroll_ways) * vectors;
    let bytes = stored_per_row * (params.value_bytes + params.index_bytes)
        + params.n_nzr * 8.0 * params.alpha
        + params.lhs_bytes_per_row;
    Ok(SpmvPrediction::assemble(
        m,
        SpmvFormat::Sell,
        n_nzr,
        gather,
        reduction,
        bytes,
    ))
}

/// SELL-C-σ prediction for a concrete matrix, charging the padded chunk lengths.
pub fn sell_prediction_for_matrix(
    m: &MachineModel,
    s: &SellCSigmaMatrix,
    alpha: f64,
    unroll_ways: u32,
) -> Result<SpmvPrediction> {
    check_unroll(unroll_ways)?;
    let needed = unroll_ways as usize * m.vector_length_doubles as usize;
    if s.chunk_height() < needed {
        return Err(Error::InvalidArgument {
            name: "C",
            reason: format!(
                "chunk height {} cannot hold {unroll_ways}-way unrolling of {}-wide vectors",
                s.chunk_height(),
                m.vector_length_doubles
            ),
        });
    }
    if s.nrows() == 0 {
        return Err(Error::InvalidMatrix("matrix has no rows".into()));
    }
    let rows = s.nrows() as f64;
    sell_cycles_per_row_padded(
        m,
        s.nnz() as f64 / rows,
        s.stored_entries() as f64 / rows,
        alpha,
        unroll_ways,
    )
}

/// CRS prediction: the latency chain of each row bounds every level.
pub fn crs_prediction(m: &MachineModel, n_nzr: f64, alpha: f64) -> Result<SpmvPrediction> {
    let params = SpmvTrafficParams::new(n_nzr, alpha)?;
    let latency = crs_core_cycles_per_row(m, n_nzr)?;
    let gather = gather_cost_per_vector(m)? * n_nzr / f64::from(m.vector_length_doubles);
    Ok(SpmvPrediction::assemble(
        m,
        SpmvFormat::Crs,
        n_nzr,
        gather,
        latency,
        traffic_per_row(&params),
    ))
}

/// Row-length statistics of a matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub nrows: usize,
    pub ncols: usize,
    pub nnz: usize,
    /// Arithmetic mean of nonzeros per row.
    pub n_nzr: f64,
    pub min_row: usize,
    pub max_row: usize,
    /// Row length → number of rows with that length.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn matrix_stats(a: &CrsMatrix) -> MatrixStats {
    let mut histogram = BTreeMap::new();
    for r in 0..a.nrows() {
        *histogram.entry(a.row_len(r)).or_insert(0) += 1;
    }
    MatrixStats {
        nrows: a.nrows(),
        ncols: a.ncols(),
        nnz: a.nnz(),
        n_nzr: if a.nrows() == 0 {
            0.0
        } else {
            a.nnz() as f64 / a.nrows() as f64
        },
        min_row: histogram.keys().next().copied().unwrap_or(0),
        max_row: histogram.keys().next_back().copied().unwrap_or(0),
        histogram,
    }
}

/// Empirical α from a fully associative LRU cache of `cache_bytes` fed with the
/// RHS access stream of a CRS SpMV.
pub fn estimate_alpha(a: &CrsMatrix, cache_bytes: u64, line_bytes: u32) -> Result<f64> {
    if line_bytes < 8 || cache_bytes < u64::from(line_bytes) {
        return Err(Error::InvalidArgument {
            name: "cache",
            reason: "cache must hold at least one line of at least 8 bytes".into(),
        });
    }
    if a.nnz() == 0 {
        return Ok(0.0);
    }
    let capacity = (cache_bytes / u64::from(line_bytes)) as usize;
    let elems_per_line = u64::from(line_bytes) / 8;
    let mut last_use: HashMap<u64, u64> = HashMap::new();
    let mut by_age: BTreeMap<u64, u64> = BTreeMap::new();
    let mut misses = 0u64;
    for (tick, &col) in a.col_indices().iter().enumerate() {
        let tick = tick as u64;
        let line = u64::from(col) / elems_per_line;
        match last_use.insert(line, tick) {
            Some(prev) => {
                by_age.remove(&prev);
            }
            None => {
                misses += 1;
                if by_age.len() == capacity {
                    let (_, evicted) = by_age.pop_first().unwrap();
                    last_use.remove(&evicted);
                }
            }
        }
        by_age.insert(tick, line);
    }
    Ok(misses as f64 * f64::from(line_bytes) / (8.0 * a.nnz() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_io::generate_hpcg;

    fn m() -> MachineModel {
        MachineModel::a64fx_fx700()
    }

    #[test]
    fn traffic_examples() {
        let p = SpmvTrafficParams::new(27.0, 1.0 / 27.0).unwrap();
        assert!((traffic_per_row(&p) - 352.0).abs() < 1e-12);
        assert_eq!(traffic_per_row(&SpmvTrafficParams::new(27.0, 1.0).unwrap()), 560.0);
        assert_eq!(traffic_per_row(&SpmvTrafficParams::optimistic(0.0).unwrap()), 20.0);
        assert!(SpmvTrafficParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn crs_core_examples() {
        assert_eq!(crs_core_cycles_per_row(&m(), 27.0).unwrap(), 47.5);
        assert_eq!(crs_core_cycles_per_row(&m(), 8.0).unwrap(), 20.5);
        assert_eq!(crs_core_cycles_per_row(&m(), 1.0).unwrap(), 20.5);
        assert_eq!(crs_core_cycles_per_row(&m(), 9.0).unwrap(), 29.5);
        assert!(crs_core_cycles_per_row(&m(), 0.0).is_err());
    }

    #[test]
    fn crs_hpcg_does_not_saturate() {
        let s = crs_saturation_check(&m(), 27.0, 1.0 / 27.0).unwrap();
        assert!((s.per_core_bw / 1e9 - 13.34).abs() < 0.05);
        assert!((s.domain_demand / 1e9 - 160.1).abs() < 0.1);
        assert!(!s.saturates);
    }

    #[test]
    fn long_rows_flip_the_flag() {
        let s = crs_saturation_check(&m(), 256.0, 1.0 / 256.0).unwrap();
        // 3100 B/row over 299.5 cy/row on 12 cores
        assert!((s.domain_demand - 12.0 * 3100.0 * 1.8e9 / 299.5).abs() < 1.0);
        assert!(s.saturates);
    }

    #[test]
    fn zero_frequency_rejected() {
        let mut bad = m();
        bad.frequency = 0.0;
        assert!(crs_saturation_check(&bad, 27.0, 1.0 / 27.0).is_err());
    }

    #[test]
    fn sell_hpcg() {
        let p = sell_cycles_per_row(&m(), 27.0, 1.0 / 27.0, 4).unwrap();
        assert_eq!(p.gather_cycles, 20.25);
        assert_eq!(p.reduction_bound, 2.25 * 27.0 / 8.0);
        assert_eq!(p.cycles.t_l2, 20.25 + 5.5);
        assert!((p.cycles.t_mem - (25.75 + 352.0 / 117.0)).abs() < 1e-9);
        assert!((p.single_core_perf / 1e9 - 3.38).abs() < 0.01);
        assert!((p.single_core_bw / 1e9 - 22.03).abs() < 0.01);
        let roof = p.roof_perf(&m()).unwrap();
        assert!((roof / 1e9 - 117.0 * 1.8 / 352.0 * 54.0).abs() < 1e-9);
        assert_eq!(p.scaling.saturation_cores, Some(10));
    }

    #[test]
    fn sell_single_vector_row() {
        let p = sell_cycles_per_row(&m(), 8.0, 1.0 / 8.0, 1).unwrap();
        assert_eq!(p.gather_cycles, 6.0);
        // 9 cy chain > 6 cy throughput without unrolling
        assert_eq!(p.cycles.t_l1, 9.0);
    }

    #[test]
    fn unrolling_only_helps() {
        let inf = sell_cycles_per_row(&m(), 27.0, 1.0 / 27.0, 1024).unwrap();
        for u in [1, 2, 3, 4, 8] {
            let p = sell_cycles_per_row(&m(), 27.0, 1.0 / 27.0, u).unwrap();
            for (a, b) in inf.cycles.levels().iter().zip(p.cycles.levels()) {
                assert!(a <= &b);
            }
        }
    }

    #[test]
    fn crs_model_is_latency_bound() {
        let p = crs_prediction(&m(), 27.0, 1.0 / 27.0).unwrap();
        assert_eq!(p.cycles.levels(), [47.5, 47.5, 47.5]);
        assert!((p.single_core_perf / 1e9 - 2.046).abs() < 0.01);
        assert_eq!(p.scaling.saturation_cores, Some(16));
        assert!(!p.scaling.saturates_within(12));
    }

    #[test]
    fn stats() {
        let s = matrix_stats(&CrsMatrix::identity(5));
        assert_eq!(s.n_nzr, 1.0);
        assert_eq!(s.histogram, BTreeMap::from([(1, 5)]));
        let a = CrsMatrix::from_triplets(3, 3, [(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let s = matrix_stats(&a);
        assert_eq!(s.histogram, BTreeMap::from([(0, 2), (2, 1)]));
        assert_eq!((s.min_row, s.max_row), (0, 2));
        assert!((s.n_nzr - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sell_matrix_prediction_checks_chunk_height() {
        let a = generate_hpcg(4, 4, 4).unwrap();
        let s = crate::sparse::crs_to_sell(&a, 16, 1).unwrap();
        assert!(sell_prediction_for_matrix(&m(), &s, 0.04, 4).is_err());
        assert!(sell_prediction_for_matrix(&m(), &s, 0.04, 2).is_ok());
    }

    #[test]
    fn alpha_estimate() {
        let a = generate_hpcg(16, 16, 16).unwrap();
        let stats = matrix_stats(&a);
        // Large cache: each RHS element is loaded once.
        let big = estimate_alpha(&a, 1 << 30, 256).unwrap();
        assert!((big - 1.0 / stats.n_nzr).abs() < 1e-12);
        // A one-line cache misses on nearly every access.
        let tiny = estimate_alpha(&a, 256, 256).unwrap();
        assert!(tiny > big);
        assert!(estimate_alpha(&a, 4, 256).is_err());
    }
}
