//! Run configuration and result files.

pub mod config;
pub mod csv;
pub mod ovf;

pub use config::{load_config, parse_config, MaterialSpec, RunConfig};
pub use csv::{parse_timeseries, write_records, write_thresholds, write_timeseries, TIMESERIES_HEADER};
pub use ovf::{read_ovf, write_snapshot, OvfData};
