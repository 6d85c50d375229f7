//! Trace-driven SSD emulation: drive configuration, read-retry ladder,
//! workload synthesis, FTL replay and endurance sweeps.

mod config;
mod lifetime;
mod retry;
mod sim;
mod workload;

pub use config::SsdConfig;
pub use lifetime::{sweep_lifetime, sweep_lifetime_with, LifetimePoint, LifetimeReport, SweepConfig};
pub use retry::{
    measure_read_retry, program_random, Condition, ModeProbe, ProbeConfig, ReadRetryModel, RetryStats, RetryTable,
};
pub use sim::{run_trace, run_trace_at, Ftl, GcStats, LatencyReport, RequestLatency, OVERPROVISION};
pub use workload::{synthesize_workload, Op, Trace, TraceRecord, WorkloadSpec, SECTOR_BYTES};
