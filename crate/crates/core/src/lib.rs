//! Trace-driven simulator for a multi-core cache hierarchy whose shared
//! last-level cache (SLLC) is built from STT-RAM. A small per-core Reuse
//! Detector keeps blocks that show no reuse out of the SLLC, cutting the
//! number of expensive STT-RAM writes.
//!
//! The crate is organised bottom-up: address arithmetic ([`addr`]), cache
//! arrays ([`cache`]), the reuse detector ([`rd`]), the presence
//! [`directory`], the DASCA-lite predictor ([`dasca`]), the engine
//! ([`hierarchy`]), and the energy, metrics and workload tooling on top.

pub mod addr;
pub mod cache;
pub mod dasca;
pub mod directory;
pub mod energy;
pub mod error;
pub mod golden;
pub mod hierarchy;
pub mod metrics;
pub mod rd;
pub mod stats;
pub mod trace;
pub mod workload;

pub use addr::{BlockAddr, Geometry, RdTagConfig};
pub use cache::CacheConfig;
pub use dasca::DascaConfig;
pub use energy::{EnergyParams, TimingParams};
pub use error::{CacheError, ConfigError, MetricsError, SimError, TraceError, WorkloadError};
pub use hierarchy::{simulate, Hierarchy, HierarchyConfig, Policy};
pub use metrics::{derive_metrics, MetricsReport};
pub use rd::{RdConfig, ReuseDetector};
pub use stats::{CoreStats, ReuseBreakdown, SimStats};
pub use trace::{AccessEvent, AccessKind};
