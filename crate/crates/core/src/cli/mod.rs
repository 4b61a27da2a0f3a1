//! Batch front-end: model-file ingestion, analysis/synthesis/simulation
//! commands, and CSV emission. The `penstab` binary is a thin argument
//! parser over this module so other entry points (tests, foreign-language
//! bindings) drive the same code paths.

pub mod commands;
pub mod model;
pub mod report;

pub use commands::{
    cmd_analyze, cmd_simulate, cmd_sweep, cmd_synthesize, AnalyzeOptions, SimulateOptions,
    SweepOptions, SynthesizeOptions,
};
pub use model::{ControllerFile, Model, ModelFile};
pub use report::RunReport;
