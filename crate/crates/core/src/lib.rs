//! Execution-Cache-Memory (ECM) performance model of the A64FX CPU.
//!
//! The crate has two halves:
//!
//! * an analytic half that composes in-core cycles and cache/memory transfer
//!   times into cycles per unit of work ([`ecm`], [`kernels`], [`spmv_model`]),
//!   driven by a [`MachineModel`];
//! * an executable half with CRS and SELL-C-σ sparse formats, RCM reordering,
//!   Matrix Market input, and an HPCG matrix generator ([`sparse`], [`matrix_io`]),
//!   whose row statistics feed the SpMV model.
//!
//! ```
//! use ecm_model::{kernels, MachineModel};
//!
//! let m = MachineModel::a64fx_fx700();
//! let triad = kernels::find_kernel("triad")?;
//! let (_, p) = kernels::predict(&triad, &m, None, None)?;
//! assert_eq!((p.t_l1, p.t_l2), (2.0, 6.0));
//! assert!((p.t_mem - 7.64).abs() < 0.01);
//! # Ok::<(), ecm_model::Error>(())
//! ```

pub mod ecm;
mod error;
pub mod kernels;
pub mod machine;
pub mod matrix_io;
pub mod sparse;
pub mod spmv_model;
pub mod validation;

pub use ecm::{
    compose, compose_full_overlap, compose_no_overlap, dependency_bound, scale, scale_to,
    EcmPrediction, Level, ScalingCurve, ScalingPoint, TrafficProfile, WorkUnit,
};
pub use error::{Error, Result};
pub use machine::{load_machine, resolve_machine, save_machine, InstructionProfile, MachineModel};

// The guide's code listings are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/machine.md")]
    mod machine {}
    #[doc = include_str!("../../../book/src/overlap.md")]
    mod overlap {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/sparse-formats.md")]
    mod sparse_formats {}
    #[doc = include_str!("../../../book/src/spmv-model.md")]
    mod spmv_model {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
