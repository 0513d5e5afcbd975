//! Machine descriptions: bandwidths, capacities, and in-core instruction costs.
//!
//! All bandwidths are in bytes per core cycle. Memory bandwidths are the
//! measured per-domain figures (STREAM triad and read-only), not the
//! theoretical interface peak.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name under which the embedded A64FX (FX700) description is addressable.
pub const A64FX_FX700: &str = "a64fx-fx700";

/// Throughput and latency of one instruction form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionProfile {
    pub form: String,
    /// Cycles per instruction in steady state.
    pub reciprocal_throughput: f64,
    /// Absent when the form has no meaningful single-instruction latency.
    pub latency: Option<f64>,
    /// The latency is only known as a lower bound (e.g. gathers).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub latency_is_lower_bound: bool,
}

impl InstructionProfile {
    fn new(form: &str, reciprocal_throughput: f64, latency: Option<f64>) -> Self {
        Self {
            form: form.to_owned(),
            reciprocal_throughput,
            latency,
            latency_is_lower_bound: false,
        }
    }

    /// Latency, failing loudly for forms where none is defined.
    pub fn require_latency(&self) -> Result<f64> {
        self.latency.ok_or_else(|| Error::MissingLatency {
            form: self.form.clone(),
        })
    }
}

/// One CPU description. Immutable once validated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineModel {
    pub name: String,
    /// Core clock in Hz.
    pub frequency: f64,
    pub vector_length_doubles: u32,
    pub cacheline_bytes: u32,
    pub l1_load_bw: f64,
    pub l1_store_bw: f64,
    pub l2_load_bw: f64,
    pub l2_store_bw: f64,
    /// Measured STREAM triad bandwidth of one contention domain.
    pub mem_bw_multistream: f64,
    /// Measured read-only bandwidth of one contention domain.
    pub mem_bw_readonly: f64,
    /// Peak write bandwidth between memory and L2 for one domain.
    pub mem_store_bw: f64,
    /// Aggregate L2 load bandwidth cap per domain.
    pub domain_l2_load_bw: f64,
    /// Aggregate L2 store bandwidth cap per domain.
    pub domain_l2_store_bw: f64,
    pub cores_per_domain: u32,
    /// Bytes per core.
    pub l1_capacity: u64,
    /// Bytes per domain.
    pub l2_capacity: u64,
    pub instruction_table: Vec<InstructionProfile>,
}

impl MachineModel {
    /// The A64FX CPU as configured in the Fujitsu FX700 (one CMG = one domain).
    pub fn a64fx_fx700() -> Self {
        let mut gather_simple = InstructionProfile::new("gather_simple", 2.0, Some(11.0));
        gather_simple.latency_is_lower_bound = true;
        let mut gather_complex = InstructionProfile::new("gather_complex", 4.0, Some(11.0));
        gather_complex.latency_is_lower_bound = true;

        Self {
            name: A64FX_FX700.to_owned(),
            frequency: 1.8e9,
            vector_length_doubles: 8,
            cacheline_bytes: 256,
            l1_load_bw: 128.0,
            l1_store_bw: 64.0,
            l2_load_bw: 64.0,
            l2_store_bw: 32.0,
            mem_bw_multistream: 117.0,
            mem_bw_readonly: 125.0,
            mem_store_bw: 64.0,
            domain_l2_load_bw: 512.0,
            domain_l2_store_bw: 256.0,
            cores_per_domain: 12,
            l1_capacity: 64 * 1024,
            l2_capacity: 8 * 1024 * 1024,
            instruction_table: vec![
                InstructionProfile::new("ld1d", 0.5, Some(11.0)),
                gather_simple,
                gather_complex,
                InstructionProfile::new("simple_gather_plus_load", 3.5, None),
                InstructionProfile::new("complex_gather_plus_load", 5.5, None),
                InstructionProfile::new("st1d", 1.0, None),
                InstructionProfile::new("fadd", 0.5, Some(9.0)),
                InstructionProfile::new("fmad", 0.5, Some(9.0)),
                InstructionProfile::new("fmla", 0.5, Some(9.0)),
                InstructionProfile::new("fmul", 0.5, Some(9.0)),
                InstructionProfile::new("fadda_512", 18.5, Some(72.0)),
                InstructionProfile::new("faddv_512", 11.5, Some(49.0)),
                InstructionProfile::new("while", 1.0, Some(1.0)),
            ],
        }
    }

    /// Bytes moved per full SIMD vector of doubles.
    pub fn vector_bytes(&self) -> f64 {
        f64::from(self.vector_length_doubles) * 8.0
    }

    /// Measured domain memory bandwidth for a kernel with or without store streams.
    pub fn mem_bw(&self, readonly: bool) -> f64 {
        if readonly {
            self.mem_bw_readonly
        } else {
            self.mem_bw_multistream
        }
    }

    pub fn lookup_instruction(&self, form: &str) -> Result<&InstructionProfile> {
        self.instruction_table
            .iter()
            .find(|p| p.form == form)
            .ok_or_else(|| Error::UnknownInstruction {
                form: form.to_owned(),
                known: self
                    .instruction_table
                    .iter()
                    .map(|p| p.form.clone())
                    .collect(),
            })
    }

    /// Checks every invariant and names the first offending field.
    pub fn validate(&self) -> Result<()> {
        fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidMachine {
                field,
                reason: reason.into(),
            }
        }
        fn positive(field: &'static str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be a positive number, got {value}")))
            }
        }

        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        positive("frequency", self.frequency)?;
        positive("l1_load_bw", self.l1_load_bw)?;
        positive("l1_store_bw", self.l1_store_bw)?;
        positive("l2_load_bw", self.l2_load_bw)?;
        positive("l2_store_bw", self.l2_store_bw)?;
        positive("mem_bw_multistream", self.mem_bw_multistream)?;
        positive("mem_bw_readonly", self.mem_bw_readonly)?;
        positive("mem_store_bw", self.mem_store_bw)?;
        positive("domain_l2_load_bw", self.domain_l2_load_bw)?;
        positive("domain_l2_store_bw", self.domain_l2_store_bw)?;
        if self.mem_bw_readonly < self.mem_bw_multistream {
            return Err(invalid(
                "mem_bw_readonly",
                format!(
                    "must be at least mem_bw_multistream ({} < {})",
                    self.mem_bw_readonly, self.mem_bw_multistream
                ),
            ));
        }
        if !self.vector_length_doubles.is_power_of_two() {
            return Err(invalid(
                "vector_length_doubles",
                format!("must be a power of two, got {}", self.vector_length_doubles),
            ));
        }
        if self.cacheline_bytes == 0 {
            return Err(invalid("cacheline_bytes", "must be positive"));
        }
        if self.cores_per_domain == 0 {
            return Err(invalid("cores_per_domain", "must be positive"));
        }
        if self.l1_capacity == 0 {
            return Err(invalid("l1_capacity", "must be positive"));
        }
        if self.l2_capacity == 0 {
            return Err(invalid("l2_capacity", "must be positive"));
        }
        for (i, p) in self.instruction_table.iter().enumerate() {
            if self.instruction_table[..i].iter().any(|q| q.form == p.form) {
                return Err(invalid(
                    "instruction_table",
                    format!("duplicate form `{}`", p.form),
                ));
            }
            if !(p.reciprocal_throughput.is_finite() && p.reciprocal_throughput > 0.0) {
                return Err(invalid(
                    "instruction_table",
                    format!("`{}`: reciprocal_throughput must be positive", p.form),
                ));
            }
            if let Some(lat) = p.latency {
                if !(lat.is_finite() && lat >= p.reciprocal_throughput) {
                    return Err(invalid(
                        "instruction_table",
                        format!(
                            "`{}`: latency {lat} is below reciprocal throughput {}",
                            p.form, p.reciprocal_throughput
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses and validates a JSON machine description.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::MachineParse {
            path: origin.to_owned(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("machine model serializes")
    }
}

/// Loads a machine description from a JSON file.
pub fn load_machine(path: impl AsRef<Path>) -> Result<MachineModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    MachineModel::from_json(&text, path)
}

pub fn save_machine(m: &MachineModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, m.to_json() + "\n")?;
    Ok(())
}

/// Resolves a builtin name or, failing that, a file path.
pub fn resolve_machine(name_or_path: &str) -> Result<MachineModel> {
    if name_or_path == A64FX_FX700 {
        Ok(MachineModel::a64fx_fx700())
    } else {
        load_machine(name_or_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_published_constants() {
        let m = MachineModel::a64fx_fx700();
        m.validate().unwrap();
        assert_eq!(m.frequency, 1.8e9);
        assert_eq!(m.vector_length_doubles, 8);
        assert_eq!(m.cacheline_bytes, 256);
        assert_eq!((m.l1_load_bw, m.l1_store_bw), (128.0, 64.0));
        assert_eq!((m.l2_load_bw, m.l2_store_bw), (64.0, 32.0));
        assert_eq!((m.mem_bw_multistream, m.mem_bw_readonly), (117.0, 125.0));
        assert_eq!((m.domain_l2_load_bw, m.domain_l2_store_bw), (512.0, 256.0));
        assert_eq!(m.mem_store_bw, 64.0);
        assert_eq!(m.cores_per_domain, 12);
        assert_eq!(m.l1_capacity, 65536);
        assert_eq!(m.l2_capacity, 8 << 20);
    }

    #[test]
    fn builtin_instruction_table() {
        let m = MachineModel::a64fx_fx700();
        let expect: &[(&str, f64, Option<f64>)] = &[
            ("ld1d", 0.5, Some(11.0)),
            ("gather_simple", 2.0, Some(11.0)),
            ("gather_complex", 4.0, Some(11.0)),
            ("simple_gather_plus_load", 3.5, None),
            ("complex_gather_plus_load", 5.5, None),
            ("st1d", 1.0, None),
            ("fadd", 0.5, Some(9.0)),
            ("fmad", 0.5, Some(9.0)),
            ("fmla", 0.5, Some(9.0)),
            ("fmul", 0.5, Some(9.0)),
            ("fadda_512", 18.5, Some(72.0)),
            ("faddv_512", 11.5, Some(49.0)),
            ("while", 1.0, Some(1.0)),
        ];
        assert_eq!(m.instruction_table.len(), expect.len());
        for &(form, rt, lat) in expect {
            let p = m.lookup_instruction(form).unwrap();
            assert_eq!(p.reciprocal_throughput, rt, "{form}");
            assert_eq!(p.latency, lat, "{form}");
        }
        assert!(m.lookup_instruction("gather_complex").unwrap().latency_is_lower_bound);
    }

    #[test]
    fn lookup_unknown_lists_known_forms() {
        let m = MachineModel::a64fx_fx700();
        let err = m.lookup_instruction("nonexistent").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nonexistent"));
        assert!(msg.contains("faddv_512"));
    }

    #[test]
    fn missing_latency_fails_loudly() {
        let m = MachineModel::a64fx_fx700();
        let p = m.lookup_instruction("complex_gather_plus_load").unwrap();
        assert_eq!(p.reciprocal_throughput, 5.5);
        assert!(matches!(p.require_latency(), Err(Error::MissingLatency { .. })));
    }

    #[test]
    fn zero_bandwidth_rejected_by_name() {
        let mut m = MachineModel::a64fx_fx700();
        m.mem_bw_multistream = 0.0;
        match m.validate() {
            Err(Error::InvalidMachine { field, .. }) => assert_eq!(field, "mem_bw_multistream"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_invariants() {
        let mut m = MachineModel::a64fx_fx700();
        m.vector_length_doubles = 6;
        assert!(matches!(
            m.validate(),
            Err(Error::InvalidMachine { field: "vector_length_doubles", .. })
        ));

        let mut m = MachineModel::a64fx_fx700();
        m.mem_bw_readonly = 100.0;
        assert!(matches!(
            m.validate(),
            Err(Error::InvalidMachine { field: "mem_bw_readonly", .. })
        ));

        let mut m = MachineModel::a64fx_fx700();
        m.instruction_table[0].latency = Some(0.1);
        assert!(matches!(
            m.validate(),
            Err(Error::InvalidMachine { field: "instruction_table", .. })
        ));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let m = MachineModel::a64fx_fx700();
        let back = MachineModel::from_json(&m.to_json(), Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn file_with_zero_bandwidth_is_rejected() {
        let mut value = serde_json::to_value(MachineModel::a64fx_fx700()).unwrap();
        value["mem_bw_multistream"] = serde_json::json!(0);
        let dir = std::env::temp_dir().join(format!("ecm-machine-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("zero.json");
        fs::write(&path, value.to_string()).unwrap();
        let err = load_machine(&path).unwrap_err();
        assert!(err.to_string().contains("mem_bw_multistream"), "{err}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = MachineModel::from_json("{\n  \"name\": 3\n}", Path::new("bad.json")).unwrap_err();
        match err {
            Error::MachineParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolve_builtin_by_name() {
        let m = resolve_machine(A64FX_FX700).unwrap();
        assert_eq!(m.l2_load_bw, 64.0);
    }
}
