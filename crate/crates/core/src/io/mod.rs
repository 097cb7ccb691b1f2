//! Experiment configuration, binary snapshots and CSV output.

mod config;
mod csv;
mod snapshot;

pub use config::{
    load_config, parse_config, ConfigError, ExperimentConfig, FieldSpec, GeometrySection,
    GridSection, ModeSpec, PhysicsSection, PipelineSection, Phase, SteeringSection, TimeSection,
};
pub use csv::{format_row, write_csv};
pub use snapshot::{read_snapshot, snapshot_from_bytes, snapshot_to_bytes, write_snapshot, SnapshotError};
