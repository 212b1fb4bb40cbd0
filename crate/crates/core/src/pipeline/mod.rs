//! Configuration-driven sweeps, CSV persistence and collapse analysis.

pub mod analysis;
pub mod config;
pub mod io;
pub mod sweep;
pub mod validate;

pub use analysis::{collapse, locate, run_collapse, write_scaled, write_scaled_file, Collapse};
pub use config::{CollapseRequest, ConfigFile, Grid, GridUnits, OrderParameter, Solver, SweepConfig};
pub use io::{read_csv, read_series, write_csv, write_series, HEADER};
pub use sweep::{run_sweep, thread_count, PointResult, THREADS_ENV};
pub use validate::{run_checks, Check};
