//! Workloads, the drone scenario and the benchmark driver.

pub mod drones;
pub mod harness;
pub mod metrics;
pub mod synthetic;
pub mod tracking;

pub use drones::{DroneScenario, DroneTrace};
pub use harness::{run_benchmark, BenchError, BenchResult, ModeRun, Trace};
pub use metrics::{write_csv, MetricsRow, Summary};
pub use synthetic::SyntheticWorkload;
