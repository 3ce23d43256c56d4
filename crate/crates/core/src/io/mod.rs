pub mod config;
pub mod results;
pub mod trace_csv;

pub use config::{
    parse_config, parse_config_str, AreaConfig, LoadFlow, Project, ProjectConfig, TieConfig,
    UnitConfig,
};
pub use results::{
    write_results, AreaResult, ChannelMetric, FitSummary, ResultBundle, UnitResult, RESULTS_FILE,
};
pub use trace_csv::{read_trace, read_trace_csv, write_trace, write_trace_csv};
