//! Experiment harness for the `relu-recover` crate: configuration presets,
//! the figure-style experiment runners, CSV result tables with config-echo
//! provenance, and SVG plotting.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

pub use config::{Experiment, ExperimentConfig, InitKind};
pub use plot::{emit_plot, PlotKind};
pub use table::ResultTable;
