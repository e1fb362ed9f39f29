//! Experiment front door: configuration, the procedural dataset, run modes,
//! metrics emission and evaluation.

pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod run;
pub mod scene;

pub use config::ExperimentConfig;
pub use dataset::{generate_scene, load_dataset, partition_views};
pub use evaluate::evaluate_views;
pub use run::{export_metrics, run_client, run_server, run_sim, ExperimentOutput};
pub use scene::SceneSpec;
