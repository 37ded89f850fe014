//! Zero-forcing precoding and RIS phase design for a multi-RIS, multi-user
//! massive MIMO downlink.
//!
//! Two precoding schemes are provided. BS-UE-ZF nulls interference between
//! all UEs over the cascaded channels. BS-RIS-ZF nulls toward every RIS
//! element and every direct UE, which makes the precoder independent of the
//! RIS phases. For each scheme there are finite-M and large-array phase
//! designs, plus a random baseline.

// NaN must fail the `!(x > 0)` style guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod phaseopt;
pub mod rng;
pub mod schedule;
pub mod sysconfig;

pub use beamform::{bs_ris_zf, bs_ue_zf, zf_precoder, BeamformerSet, ZfSettings};
pub use channel::{
    build_correlation, sample_channels, ChannelSampler, ChannelSet, CorrelationMatrix,
};
pub use error::{Error, Result};
pub use harness::{emit_outputs, run_sweep, Curve, RunConfig, SweepSummary};
pub use metrics::{complexity_counts, sinr_exact, sum_rate, ComplexityCounts, Sinrs, TrialResult};
pub use phaseopt::{PhaseConfig, PhaseOptSettings, PhaseRule};
pub use sysconfig::{
    load_config, validate_config, ChannelModelConfig, PowerMode, Scheme, SystemConfig,
};
