pub mod config;
pub mod runner;
pub mod scenario;
pub mod topology;

pub use config::{Backend, RunConfig};
pub use runner::SimCluster;
pub use scenario::{run_scenario, ScenarioOutcome};
pub use topology::Topology;
