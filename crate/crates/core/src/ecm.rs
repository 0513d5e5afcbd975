//! Composition of in-core and data-transfer contributions into ECM predictions.
//!
//! The A64FX overlap hypothesis is partial at both cache levels:
//!
//! * Cycles in which stores retire in the core overlap with L1↔L2 transfers;
//!   cycles in which loads retire do not.
//! * Cycles in which the memory interface writes to memory overlap with
//!   L2↔L1 transfers; memory read cycles do not.
//!
//! Compute instructions are assumed to overlap with everything. A loop-carried
//! dependency chain enters as a lower bound on every level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineModel;

/// The unit of work all cycle counts refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WorkUnit {
    /// One SIMD vector, i.e. `iterations` scalar loop iterations.
    Vector { iterations: u32 },
    MatrixRow,
}

impl fmt::Display for WorkUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkUnit::Vector { iterations } => write!(f, "one VL = {iterations} iterations"),
            WorkUnit::MatrixRow => f.write_str("one matrix row"),
        }
    }
}

impl WorkUnit {
    pub fn short_name(&self) -> &'static str {
        match self {
            WorkUnit::Vector { .. } => "VL",
            WorkUnit::MatrixRow => "row",
        }
    }
}

/// Per-work-unit core cycles and byte volumes at each boundary of the hierarchy.
///
/// Write-allocate transfers caused by store misses are counted as reads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub work_unit: WorkUnit,
    pub core_load_cycles: f64,
    pub core_store_cycles: f64,
    /// Loop-carried latency bound; zero if the loop has no carried dependency.
    pub dependency_chain_cycles: f64,
    pub l1l2_read_bytes: f64,
    pub l1l2_write_bytes: f64,
    pub mem_read_bytes: f64,
    pub mem_write_bytes: f64,
    /// No store streams; selects the read-only memory bandwidth.
    pub readonly: bool,
}

impl TrafficProfile {
    pub fn zero(work_unit: WorkUnit) -> Self {
        Self {
            work_unit,
            core_load_cycles: 0.0,
            core_store_cycles: 0.0,
            dependency_chain_cycles: 0.0,
            l1l2_read_bytes: 0.0,
            l1l2_write_bytes: 0.0,
            mem_read_bytes: 0.0,
            mem_write_bytes: 0.0,
            readonly: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 7] = [
            ("core_load_cycles", self.core_load_cycles),
            ("core_store_cycles", self.core_store_cycles),
            ("dependency_chain_cycles", self.dependency_chain_cycles),
            ("l1l2_read_bytes", self.l1l2_read_bytes),
            ("l1l2_write_bytes", self.l1l2_write_bytes),
            ("mem_read_bytes", self.mem_read_bytes),
            ("mem_write_bytes", self.mem_write_bytes),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidTraffic {
                    field,
                    reason: format!("must be finite and non-negative, got {value}"),
                });
            }
        }
        if self.mem_read_bytes > self.l1l2_read_bytes {
            return Err(Error::InvalidTraffic {
                field: "mem_read_bytes",
                reason: format!(
                    "exceeds l1l2_read_bytes ({} > {})",
                    self.mem_read_bytes, self.l1l2_read_bytes
                ),
            });
        }
        Ok(())
    }

    /// Bytes crossing the memory interface per work unit.
    pub fn mem_bytes(&self) -> f64 {
        self.mem_read_bytes + self.mem_write_bytes
    }

    fn core_cycles(&self) -> f64 {
        // SVE loads and stores cannot issue to L1 in the same cycle.
        self.core_load_cycles + self.core_store_cycles
    }

    fn l1l2_cycles(&self, m: &MachineModel) -> f64 {
        self.l1l2_read_bytes / m.l2_load_bw + self.l1l2_write_bytes / m.l2_store_bw
    }

    fn mem_read_cycles(&self, m: &MachineModel) -> f64 {
        self.mem_read_bytes / m.mem_bw(self.readonly)
    }

    fn mem_write_cycles(&self, m: &MachineModel) -> f64 {
        self.mem_write_bytes / m.mem_store_bw
    }
}

/// Predicted cycles per work unit with the data set resident in L1, L2, or memory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcmPrediction {
    pub work_unit: WorkUnit,
    pub t_l1: f64,
    pub t_l2: f64,
    pub t_mem: f64,
}

impl EcmPrediction {
    pub fn levels(&self) -> [f64; 3] {
        [self.t_l1, self.t_l2, self.t_mem]
    }

    pub fn at(&self, level: Level) -> f64 {
        match level {
            Level::L1 => self.t_l1,
            Level::L2 => self.t_l2,
            Level::Mem => self.t_mem,
        }
    }
}

impl fmt::Display for EcmPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{ {:.1} | {:.1} | {:.1} }} cy/{}",
            self.t_l1,
            self.t_l2,
            self.t_mem,
            self.work_unit.short_name()
        )
    }
}

/// Data-set residence level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    L1,
    L2,
    Mem,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::L1, Level::L2, Level::Mem];

    pub fn name(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::Mem => "MEM",
        }
    }
}

/// Partially overlapping composition (the validated A64FX hypothesis).
pub fn compose(m: &MachineModel, t: &TrafficProfile) -> EcmPrediction {
    let dep = t.dependency_chain_cycles;
    let ld = t.core_load_cycles;
    let st = t.core_store_cycles;
    let l1l2 = t.l1l2_cycles(m);
    // Memory writes hide behind L1<->L2 transfers, memory reads add on top.
    let l2_side = l1l2.max(t.mem_write_cycles(m)) + t.mem_read_cycles(m);

    let t_l1 = t.core_cycles();
    let t_l2 = ld + st.max(l1l2);
    let t_mem = ld + st.max(l2_side);
    EcmPrediction {
        work_unit: t.work_unit,
        t_l1: t_l1.max(dep),
        t_l2: t_l2.max(dep),
        t_mem: t_mem.max(dep),
    }
}

/// Fully serial composition: every contribution adds.
pub fn compose_no_overlap(m: &MachineModel, t: &TrafficProfile) -> EcmPrediction {
    let dep = t.dependency_chain_cycles;
    let t_l1 = t.core_cycles();
    let t_l2 = t_l1 + t.l1l2_cycles(m);
    let t_mem = t_l2 + t.mem_read_cycles(m) + t.mem_write_cycles(m);
    EcmPrediction {
        work_unit: t.work_unit,
        t_l1: t_l1.max(dep),
        t_l2: t_l2.max(dep),
        t_mem: t_mem.max(dep),
    }
}

/// Fully overlapping composition: the largest contribution wins.
pub fn compose_full_overlap(m: &MachineModel, t: &TrafficProfile) -> EcmPrediction {
    let dep = t.dependency_chain_cycles;
    let t_l1 = t.core_cycles();
    let t_l2 = t_l1.max(t.l1l2_cycles(m));
    let t_mem = t_l2.max(t.mem_read_cycles(m) + t.mem_write_cycles(m));
    EcmPrediction {
        work_unit: t.work_unit,
        t_l1: t_l1.max(dep),
        t_l2: t_l2.max(dep),
        t_mem: t_mem.max(dep),
    }
}

/// Per-vector cost of a reduction chain of `latency` cycles split over
/// `unroll_ways` independent accumulators.
pub fn dependency_bound(latency: f64, unroll_ways: u32) -> f64 {
    assert!(latency > 0.0, "latency must be positive");
    assert!(unroll_ways >= 1, "unroll_ways must be at least 1");
    latency / f64::from(unroll_ways)
}

/// One point of a multicore scaling curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub cores: u32,
    pub units_per_cycle: f64,
    pub units_per_second: f64,
    pub bytes_per_second: f64,
}

/// Naive ECM scaling within one contention domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub work_unit: WorkUnit,
    pub points: Vec<ScalingPoint>,
    /// Memory bytes per work unit used to convert to bandwidth.
    pub bytes_per_unit: f64,
    /// Work units per cycle at which the domain bandwidth binds; `None` without memory traffic.
    pub roof_units_per_cycle: Option<f64>,
    /// Smallest core count at which the roof binds (may exceed the curve's range).
    pub saturation_cores: Option<u32>,
}

impl ScalingCurve {
    pub fn saturates_within(&self, cores: u32) -> bool {
        self.saturation_cores.is_some_and(|n| n <= cores)
    }

    pub fn max_units_per_second(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.units_per_second)
            .fold(0.0, f64::max)
    }
}

/// Scaling curve over `1..=cores_per_domain`.
pub fn scale(m: &MachineModel, p: &EcmPrediction, t: &TrafficProfile) -> ScalingCurve {
    scale_to(m, p, t, m.cores_per_domain)
}

/// Scaling curve over `1..=max_cores`.
///
/// `perf(n) = min(n / t_mem, b_domain / bytes_per_unit)`, where the domain
/// bandwidth is the measured figure matching `t.readonly`.
pub fn scale_to(
    m: &MachineModel,
    p: &EcmPrediction,
    t: &TrafficProfile,
    max_cores: u32,
) -> ScalingCurve {
    let bytes = t.mem_bytes();
    let roof = (bytes > 0.0).then(|| m.mem_bw(t.readonly) / bytes);
    let saturation_cores = roof.map(|r| {
        // Guard against 4.0000000001 rounding up to 5.
        let n = (p.t_mem * r - 1e-9).ceil();
        n.max(1.0) as u32
    });
    let points = (1..=max_cores)
        .map(|n| {
            let mut per_cycle = if p.t_mem > 0.0 {
                f64::from(n) / p.t_mem
            } else {
                f64::INFINITY
            };
            if let Some(r) = roof {
                per_cycle = per_cycle.min(r);
            }
            ScalingPoint {
                cores: n,
                units_per_cycle: per_cycle,
                units_per_second: per_cycle * m.frequency,
                bytes_per_second: per_cycle * m.frequency * bytes,
            }
        })
        .collect();
    ScalingCurve {
        work_unit: p.work_unit,
        points,
        bytes_per_unit: bytes,
        roof_units_per_cycle: roof,
        saturation_cores,
    }
}
