//! Configuration-driven experiment runner: builds a problem and truth, sweeps
//! the noise level over realizations, applies a method with a parameter
//! rule, and writes CSV tables, plot data and fitted rates.

mod config;
mod report;
mod run;

pub use config::{
    ExperimentConfig, GridConfig, Method, MethodOptions, ProblemConfig, ProblemName, Representer, Rule, SeedConfig,
    TruthConfig,
};
pub use report::{
    aggregate, aggregate_by_delta, csv_string, fit_rate, fit_rate_points, format_float, group_key, group_records,
    parse_csv, write_csv, write_plot_data, Aggregate, GroupBy, RateFit, CSV_HEADER,
};
pub use run::{check_records, haar_vectors, realization_seed, run_experiment, RunRecord};
