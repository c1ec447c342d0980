//! Unified NOMA framework for heterogeneous ultra-dense networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: PPP deployments, path loss and fading.
//! * [`noma`]: sparse spreading matrices, superposition, SIC and MPA.
//! * [`association`]: max-average-received-power association and pairing.
//! * [`allocation`]: RB matching under a quota and SCA power control.
//! * [`metrics`]: rates, fairness, aggregation and CSV output.
//! * [`engine`]: experiment configs, presets and the seeded Monte-Carlo runner.

pub mod allocation;
pub mod association;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod noma;
pub mod seed;
