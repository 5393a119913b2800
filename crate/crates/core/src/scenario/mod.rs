//! Declarative scenarios: loading, the full pipeline from geometry to
//! energy, sweeps, and the on-disk output bundle.

mod config;
mod report;
mod run;

pub use config::{
    load_scenario, parse_scenario, BendAxisDir, BendConfig, BendSweepConfig, CoilConfig,
    CompareConfig, FieldMapConfig, GestureConfig, OutputConfig, PicoRingConfig, Polling,
    ProtocolConfig, ReaderConfig, Scenario, Shape, StreamConfig, SweepConfig, TagConfig,
    TagGridConfig, Uid, WearableConfig,
};
pub use report::{read_manifest, render_report, Manifest, ManifestEntry};
pub use run::{
    build_coil, compare_coils, field_map_for, run_scenario, write_bundle, BendRow, BendSweep,
    Bundle, BuiltCoil, CoilComparison, Coverage, CoveragePoint, LinkRow, PicoRingOutcome, Pipeline,
};

use thiserror::Error;

/// Version recorded in every output manifest.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{origin}: {}{message}", if .path.is_empty() || .path == "." { String::new() } else { format!("at {}: ", .path) })]
    Parse {
        origin: String,
        /// Dotted field path of the offending value.
        path: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("{context}: {message}")]
    Physics { context: String, message: String },
}

impl ScenarioError {
    /// Process exit code: 2 for schema and validation errors, 3 for physics
    /// errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. } | ScenarioError::Validation(_) => 2,
            ScenarioError::Physics { .. } => 3,
            ScenarioError::Io { .. } => 1,
        }
    }

    pub(crate) fn physics<E: std::fmt::Display>(context: impl Into<String>) -> impl FnOnce(E) -> ScenarioError {
        let context = context.into();
        move |e| ScenarioError::Physics {
            context,
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> ScenarioError {
        ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
