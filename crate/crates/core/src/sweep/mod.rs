//! The experiment driver: ladder of autoencoders, regression on the codes,
//! significance against the best entry, caching and output files.

pub mod cache;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use cache::{ModelCache, CODE_VERSION};
pub use config::{parse_ladder, BaselineFeatures, SweepConfig, DEFAULT_LADDER};
pub use plot::{emit_overlay, emit_plots, PlotFiles};
pub use report::{AeSummary, BaselineRow, EntryReport, IntrinsicDimension, SweepReport, Timings};
pub use run::{check_simplex, run_baseline, run_sweep, write_outputs, BaselineResult, SweepRun};
