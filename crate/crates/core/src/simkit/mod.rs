//! Synthetic grasp episodes and a Coulomb stick-slip grasp model standing in
//! for the physical sensor rig.

mod config;
mod dataset;
mod episode;
mod patch;
mod physics;
mod scenario;

pub use config::{parse_kv, KvConfig};
pub use dataset::{episode_features, generate_dataset, DatasetConfig, DatasetStats};
pub use episode::{generate_episode, Episode, SLIP_EPSILON};
pub use patch::{ContactPatch, GelGrid};
pub use physics::{step_grasp_physics, write_trace_csv, GraspParams, GraspSim, GraspSimState};
pub use scenario::{Scenario, ScenarioKind};
