//! Deterministic cycle-stepped simulator and analytical toolkit for
//! hierarchical shared-L1 many-core clusters.
//!
//! The crate models a cluster of single-issue RISC cores sharing a banked L1
//! scratchpad through hierarchical crossbar networks, and provides:
//!
//! - [`topology`]: cluster shapes, address mapping, analytic zero-load latency;
//! - [`engine`]: the cycle-stepped network/bank/core model;
//! - [`traffic`]: Poisson load generation and latency/throughput sweeps;
//! - [`kernels`]: reference SDR kernels (FFT, MatMul, channel estimation,
//!   small-system inversion), locality-aware trace generation, and kernel
//!   simulation with stall accounting;
//! - [`analytics`]: closed-form data-movement, performance and energy models;
//! - [`config`]/[`report`]/[`cli`]: experiment configuration, result bundles
//!   and the command-line front end.

pub mod analytics;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod kernels;
pub mod parallel;
pub mod report;
pub mod topology;
pub mod traffic;

pub use error::{Result, SimError};
