//! Reference values for the A64FX (FX700) model and checks against them.
//!
//! Kernel predictions are compared at ±0.1 cy/VL, which absorbs the one-decimal
//! rounding of the reference table. Measured values are carried along for
//! deviation reports only.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{find_kernel, predict, LayerConditionState};
use crate::machine::MachineModel;
use crate::spmv_model::{
    crs_prediction, crs_saturation_check, sell_cycles_per_row, traffic_per_row,
    SpmvTrafficParams,
};

/// Tolerance for kernel prediction triples, cy/VL.
pub const KERNEL_TOLERANCE: f64 = 0.1;

/// Deviations at or above this fraction are flagged in reports.
pub const DEVIATION_FLAG: f64 = 0.15;

/// One row of the streaming/stencil validation table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelReference {
    pub kernel: &'static str,
    pub lc: Option<LayerConditionState>,
    /// Model prediction at L1, L2, MEM in cy/VL.
    pub predicted: [f64; 3],
    /// Best measured value at L1, L2, MEM in cy/VL.
    pub measured: [f64; 3],
}

impl KernelReference {
    pub fn label(&self) -> String {
        match self.lc {
            Some(lc) => format!("{} ({lc})", self.kernel),
            None => self.kernel.to_owned(),
        }
    }
}

pub const KERNEL_REFERENCES: [KernelReference; 11] = {
    use LayerConditionState::*;
    const fn row(
        kernel: &'static str,
        lc: Option<LayerConditionState>,
        predicted: [f64; 3],
        measured: [f64; 3],
    ) -> KernelReference {
        KernelReference {
            kernel,
            lc,
            predicted,
            measured,
        }
    }
    [
        row("copy", None, [1.5, 4.5, 5.6], [1.6, 4.4, 5.1]),
        row("daxpy", None, [2.0, 5.0, 6.1], [2.1, 4.7, 5.5]),
        row("dot", None, [1.0, 3.0, 4.1], [1.7, 3.2, 4.0]),
        row("init", None, [1.0, 3.0, 3.5], [1.0, 3.9, 4.3]),
        row("load", None, [0.5, 1.5, 2.0], [0.7, 1.9, 2.6]),
        row("triad", None, [2.0, 6.0, 7.7], [2.1, 5.8, 6.7]),
        row("sum", None, [0.5, 1.5, 2.0], [1.1, 2.0, 2.5]),
        row("schoenauer", None, [2.5, 7.5, 9.7], [2.7, 7.2, 8.4]),
        row("2d5pt", Some(SatisfiedL1), [3.5, 6.5, 7.6], [5.8, 7.0, 8.0]),
        row("2d5pt", Some(ViolatedL1SatisfiedL2), [3.5, 8.5, 9.6], [5.8, 8.6, 9.4]),
        row("2d5pt", Some(ViolatedL2), [3.5, 8.5, 10.7], [5.8, 8.6, 10.0]),
    ]
};

/// One validated quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub unit: String,
    pub computed: Vec<f64>,
    pub expected: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn numeric(name: &str, unit: &str, computed: Vec<f64>, expected: Vec<f64>, tolerance: f64) -> Self {
        let passed = computed.len() == expected.len()
            && computed
                .iter()
                .zip(&expected)
                .all(|(c, e)| (c - e).abs() <= tolerance);
        Self {
            name: name.to_owned(),
            unit: unit.to_owned(),
            computed,
            expected,
            tolerance,
            passed,
        }
    }

    fn flag(name: &str, computed: bool, expected: bool) -> Self {
        let as_num = |b: bool| if b { 1.0 } else { 0.0 };
        Self {
            name: name.to_owned(),
            unit: "flag".to_owned(),
            computed: vec![as_num(computed)],
            expected: vec![as_num(expected)],
            tolerance: 0.0,
            passed: computed == expected,
        }
    }
}

/// Composes every reference kernel row on `m` and compares the triples.
pub fn validate_kernels(m: &MachineModel) -> Result<Vec<Check>> {
    KERNEL_REFERENCES
        .iter()
        .map(|r| {
            let (_, p) = predict(&find_kernel(r.kernel)?, m, r.lc, None)?;
            Ok(Check::numeric(
                &r.label(),
                "cy/VL",
                p.levels().to_vec(),
                r.predicted.to_vec(),
                KERNEL_TOLERANCE,
            ))
        })
        .collect()
}

/// The SpMV constants for the HPCG matrix (27 nonzeros per row, α = 1/27).
pub fn validate_spmv_constants(m: &MachineModel) -> Result<Vec<Check>> {
    let n_nzr = 27.0;
    let alpha = 1.0 / n_nzr;
    let crs = crs_saturation_check(m, n_nzr, alpha)?;
    let crs_model = crs_prediction(m, n_nzr, alpha)?;
    let sell = sell_cycles_per_row(m, n_nzr, alpha, 4)?;
    let roof = sell.roof_perf(m).unwrap_or(f64::INFINITY);
    let cores = m.cores_per_domain;

    Ok(vec![
        Check::numeric("CRS in-core cycles per row", "cy/row", vec![crs.cycles_per_row], vec![47.5], 1e-9),
        Check::numeric(
            "traffic per row",
            "B/row",
            vec![traffic_per_row(&SpmvTrafficParams::new(n_nzr, alpha)?)],
            vec![352.0],
            1e-9,
        ),
        Check::numeric("CRS single-core bandwidth", "GB/s", vec![crs.per_core_bw / 1e9], vec![13.34], 0.05),
        Check::numeric("CRS domain demand", "GB/s", vec![crs.domain_demand / 1e9], vec![160.0], 0.5),
        Check::flag("CRS saturates domain", crs.saturates, false),
        Check::numeric("SELL L1 cycles per row", "cy/row", vec![sell.cycles.t_l1], vec![20.25], 0.05),
        Check::numeric("SELL cycles per row", "cy/row", vec![sell.cycles.t_mem], vec![28.76], 0.1),
        Check::numeric("SELL single-core performance", "Gflop/s", vec![sell.single_core_perf / 1e9], vec![3.38], 0.05),
        Check::numeric("SELL single-core bandwidth", "GB/s", vec![sell.single_core_bw / 1e9], vec![22.0], 0.2),
        Check::numeric("SELL saturation roof", "Gflop/s", vec![roof / 1e9], vec![32.2], 0.2),
        Check::flag("CRS model saturates within domain", crs_model.scaling.saturates_within(cores), false),
        Check::flag("SELL model saturates within domain", sell.scaling.saturates_within(cores), true),
    ])
}
