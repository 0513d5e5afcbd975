//! Streaming and stencil loop kernels described by their data streams.
//!
//! A kernel is reduced to the loads and stores one scalar iteration issues.
//! [`traffic`] turns that description into a per-VL [`TrafficProfile`] for a
//! machine, counting one 8-byte element per stream and iteration.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ecm::{compose, dependency_bound, EcmPrediction, TrafficProfile, WorkUnit};
use crate::error::{Error, Result};
use crate::machine::MachineModel;

const ELEMENT_BYTES: f64 = 8.0;

/// One load instruction per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Access {
    pub array: String,
    /// Offset in the outer (row) dimension; zero for one-dimensional kernels.
    #[serde(default)]
    pub outer_offset: i32,
}

impl Access {
    fn of(array: &str) -> Self {
        Self {
            array: array.to_owned(),
            outer_offset: 0,
        }
    }

    fn at(array: &str, outer_offset: i32) -> Self {
        Self {
            array: array.to_owned(),
            outer_offset,
        }
    }
}

/// Two-dimensional stencil geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilGeometry {
    /// The array the stencil reads with neighbor offsets.
    pub input: String,
    /// `(outer, inner)` neighbor offsets.
    pub offsets: Vec<(i32, i32)>,
}

impl StencilGeometry {
    /// Number of distinct input rows touched by one update.
    pub fn rows(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(outer, _)| outer)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Abstract description of a streaming or stencil loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    pub expression: String,
    pub loads: Vec<Access>,
    /// Arrays written once per iteration.
    pub stores: Vec<String>,
    pub flops_per_iteration: u32,
    /// Instruction form carrying the loop-carried reduction, if any.
    pub reduction: Option<String>,
    pub stencil: Option<StencilGeometry>,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reduction.is_some() && self.loads.is_empty() {
            return Err(Error::InvalidArgument {
                name: "reduction",
                reason: format!("kernel `{}` reduces but loads nothing", self.name),
            });
        }
        if let Some(s) = &self.stencil {
            if !self.loads.iter().any(|a| a.array == s.input) {
                return Err(Error::InvalidArgument {
                    name: "stencil",
                    reason: format!("stencil input `{}` is never loaded", s.input),
                });
            }
        }
        Ok(())
    }

    pub fn is_stencil(&self) -> bool {
        self.stencil.is_some()
    }

    pub fn readonly(&self) -> bool {
        self.stores.is_empty()
    }

    /// Distinct arrays loaded, in first-use order.
    fn loaded_arrays(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for a in &self.loads {
            if !seen.contains(&a.array.as_str()) {
                seen.push(a.array.as_str());
            }
        }
        seen
    }

    /// Store targets that are not read by the loop and therefore need a write-allocate.
    fn write_allocates(&self) -> usize {
        let loaded = self.loaded_arrays();
        self.stores
            .iter()
            .filter(|s| !loaded.contains(&s.as_str()))
            .count()
    }
}

/// Where the stencil's reused input rows can be kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerConditionState {
    SatisfiedL1,
    ViolatedL1SatisfiedL2,
    ViolatedL2,
}

impl LayerConditionState {
    pub const ALL: [LayerConditionState; 3] = [
        LayerConditionState::SatisfiedL1,
        LayerConditionState::ViolatedL1SatisfiedL2,
        LayerConditionState::ViolatedL2,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            LayerConditionState::SatisfiedL1 => "satisfied",
            LayerConditionState::ViolatedL1SatisfiedL2 => "violated-l1",
            LayerConditionState::ViolatedL2 => "violated",
        }
    }

    fn satisfied_in_l1(self) -> bool {
        self == LayerConditionState::SatisfiedL1
    }

    fn satisfied_in_l2(self) -> bool {
        self != LayerConditionState::ViolatedL2
    }
}

impl fmt::Display for LayerConditionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for LayerConditionState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|lc| lc.cli_name() == s)
            .ok_or_else(|| Error::InvalidArgument {
                name: "lc",
                reason: format!("expected one of satisfied, violated-l1, violated; got `{s}`"),
            })
    }
}

/// Capacity criterion for keeping the rows a stencil reuses in one cache.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerConditionRule {
    /// Rows that must fit simultaneously.
    pub rows: u32,
    /// Fraction of the cache usable for those rows.
    pub safety_factor: f64,
}

impl Default for LayerConditionRule {
    fn default() -> Self {
        Self {
            rows: 3,
            safety_factor: 0.5,
        }
    }
}

impl LayerConditionRule {
    pub fn is_satisfied(&self, inner_dim: usize, element_bytes: usize, cache_capacity: u64) -> bool {
        assert!(inner_dim > 0, "inner dimension must be positive");
        let needed = f64::from(self.rows) * inner_dim as f64 * element_bytes as f64;
        needed <= cache_capacity as f64 * self.safety_factor
    }

    /// Classifies an inner dimension against the L1 and L2 capacities of `m`.
    pub fn state(&self, m: &MachineModel, inner_dim: usize) -> LayerConditionState {
        if self.is_satisfied(inner_dim, ELEMENT_BYTES as usize, m.l1_capacity) {
            LayerConditionState::SatisfiedL1
        } else if self.is_satisfied(inner_dim, ELEMENT_BYTES as usize, m.l2_capacity) {
            LayerConditionState::ViolatedL1SatisfiedL2
        } else {
            LayerConditionState::ViolatedL2
        }
    }
}

/// Three rows of `inner_dim` elements must fit in half the cache.
pub fn evaluate_layer_condition(inner_dim: usize, element_bytes: usize, cache_capacity: u64) -> bool {
    LayerConditionRule::default().is_satisfied(inner_dim, element_bytes, cache_capacity)
}

/// The kernels of the A64FX validation set.
pub fn builtin_kernels() -> Vec<KernelSpec> {
    fn kernel(
        name: &str,
        expression: &str,
        loads: Vec<Access>,
        stores: &[&str],
        flops: u32,
        reduction: Option<&str>,
    ) -> KernelSpec {
        KernelSpec {
            name: name.to_owned(),
            expression: expression.to_owned(),
            loads,
            stores: stores.iter().map(|s| (*s).to_owned()).collect(),
            flops_per_iteration: flops,
            reduction: reduction.map(str::to_owned),
            stencil: None,
        }
    }

    let mut stencil = kernel(
        "2d5pt",
        "a[j][i]=c*(b[j][i-1]+b[j][i+1]+b[j-1][i]+b[j+1][i]+b[j][i])",
        vec![
            Access::at("b", 0),
            Access::at("b", 0),
            Access::at("b", -1),
            Access::at("b", 1),
            Access::at("b", 0),
        ],
        &["a"],
        4,
        None,
    );
    stencil.stencil = Some(StencilGeometry {
        input: "b".to_owned(),
        offsets: vec![(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)],
    });

    vec![
        kernel("copy", "a[i]=b[i]", vec![Access::of("b")], &["a"], 0, None),
        kernel(
            "daxpy",
            "y[i]=a[i]*x+y[i]",
            vec![Access::of("a"), Access::of("y")],
            &["y"],
            2,
            None,
        ),
        kernel(
            "dot",
            "sum+=a[i]*b[i]",
            vec![Access::of("a"), Access::of("b")],
            &[],
            2,
            Some("fmla"),
        ),
        kernel("init", "a[i]=s", vec![], &["a"], 0, None),
        kernel("load", "load(a[i])", vec![Access::of("a")], &[], 0, None),
        kernel(
            "triad",
            "a[i]=b[i]+s*c[i]",
            vec![Access::of("b"), Access::of("c")],
            &["a"],
            2,
            None,
        ),
        kernel("sum", "sum+=a[i]", vec![Access::of("a")], &[], 1, Some("fadd")),
        kernel(
            "schoenauer",
            "a[i]=b[i]+c[i]*d[i]",
            vec![Access::of("b"), Access::of("c"), Access::of("d")],
            &["a"],
            2,
            None,
        ),
        stencil,
    ]
}

pub fn kernel_names() -> Vec<String> {
    builtin_kernels().into_iter().map(|k| k.name).collect()
}

/// Looks up a builtin kernel by its CLI name (`schönauer` is accepted as an alias).
pub fn find_kernel(name: &str) -> Result<KernelSpec> {
    let wanted = if name == "schönauer" { "schoenauer" } else { name };
    builtin_kernels()
        .into_iter()
        .find(|k| k.name == wanted)
        .ok_or_else(|| Error::UnknownKernel {
            name: name.to_owned(),
            known: kernel_names(),
        })
}

/// Per-VL traffic of `k` on `m`.
///
/// `lc` must be `None` for non-stencil kernels; stencils default to
/// [`LayerConditionState::SatisfiedL1`]. `unroll` is the number of independent
/// accumulators for reductions; `None` assumes the latency is fully hidden.
pub fn traffic(
    k: &KernelSpec,
    m: &MachineModel,
    lc: Option<LayerConditionState>,
    unroll: Option<u32>,
) -> Result<TrafficProfile> {
    k.validate()?;
    let lc = match (&k.stencil, lc) {
        (None, Some(_)) => {
            return Err(Error::LayerConditionNotApplicable {
                kernel: k.name.clone(),
            })
        }
        (None, None) => None,
        (Some(_), lc) => Some(lc.unwrap_or(LayerConditionState::SatisfiedL1)),
    };
    if unroll == Some(0) {
        return Err(Error::InvalidArgument {
            name: "unroll",
            reason: "must be at least 1".into(),
        });
    }

    // One element per iteration and stream, i.e. one full vector per VL.
    let stream = m.vector_bytes();

    let mut l2_streams = 0usize;
    let mut mem_streams = 0usize;
    for array in k.loaded_arrays() {
        match (&k.stencil, lc) {
            (Some(s), Some(lc)) if s.input == array => {
                let rows = s.rows();
                l2_streams += if lc.satisfied_in_l1() { 1 } else { rows };
                mem_streams += if lc.satisfied_in_l2() { 1 } else { rows };
            }
            _ => {
                l2_streams += 1;
                mem_streams += 1;
            }
        }
    }
    let wa = k.write_allocates();
    l2_streams += wa;
    mem_streams += wa;
    let writes = k.stores.len() as f64 * stream;

    let dependency_chain_cycles = match (&k.reduction, unroll) {
        (Some(form), Some(u)) => {
            let latency = m.lookup_instruction(form)?.require_latency()?;
            dependency_bound(latency, u)
        }
        _ => 0.0,
    };

    let t = TrafficProfile {
        work_unit: WorkUnit::Vector {
            iterations: m.vector_length_doubles,
        },
        core_load_cycles: k.loads.len() as f64 * stream / m.l1_load_bw,
        core_store_cycles: k.stores.len() as f64 * stream / m.l1_store_bw,
        dependency_chain_cycles,
        l1l2_read_bytes: l2_streams as f64 * stream,
        l1l2_write_bytes: writes,
        mem_read_bytes: mem_streams as f64 * stream,
        mem_write_bytes: writes,
        readonly: k.readonly(),
    };
    t.validate()?;
    Ok(t)
}

/// Traffic and single-core prediction in one step.
pub fn predict(
    k: &KernelSpec,
    m: &MachineModel,
    lc: Option<LayerConditionState>,
    unroll: Option<u32>,
) -> Result<(TrafficProfile, EcmPrediction)> {
    let t = traffic(k, m, lc, unroll)?;
    Ok((t, compose(m, &t)))
}
