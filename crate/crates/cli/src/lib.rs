//! Library side of the `indcca` command: suite configs, the suite runner,
//! and report formatting.

pub mod config;
pub mod report;
pub mod suite;

pub use config::{
    parse_config, parse_scheme_config, ConfigError, RunConfig, SchemeConfig, SuiteConfig,
};
pub use report::{emit_report, Format, ReportError};
pub use suite::{build_scheme, calibrate, run_suite, RunReport, RunStatus, SuiteReport};
