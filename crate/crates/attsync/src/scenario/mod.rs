//! Scenario files, compiled-in examples, run orchestration, and randomized
//! sweeps.

pub mod builtin;
pub mod config;
pub mod rng;
pub mod run;
pub mod sweep;

pub use builtin::{builtin, builtin_names};
pub use config::{load_scenario, parse_scenario, CompiledScenario, ScenarioError, ScenarioFile};
pub use run::{run_scenario, write_artifacts, Diagnostics, RunArtifacts, RunOutput};
pub use sweep::{run_sweep, SweepOptions, SweepSummary};
