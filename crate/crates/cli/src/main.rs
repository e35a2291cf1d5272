use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use illposed_core::acceptance::run_selftest;
use illposed_core::experiment::{
    fit_rate, group_records, parse_csv, run_experiment, write_csv, write_plot_data, Aggregate, ExperimentConfig,
    GroupBy,
};
use illposed_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_METHOD: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "illposed", version, about = "Regularization experiments for ill-posed inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and write the results CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the CSV and plot data. Defaults to the directory of
        /// the config's `output` path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit log-log convergence rates to a results CSV.
    Rates {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Group::Method)]
        group: Group,
        /// Aggregate realizations with the mean instead of the median.
        #[arg(long)]
        mean: bool,
    },
    /// Run the quick acceptance checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    Method,
    Rule,
    MethodRule,
}

fn fail(code: u8, err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn exit_code_for(err: &Error) -> u8 {
    match err.root() {
        Error::Validation { .. } => EXIT_CONFIG,
        _ => EXIT_METHOD,
    }
}

fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    let cfg = match ExperimentConfig::from_path(config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    let declared = PathBuf::from(cfg.output.as_deref().unwrap_or("results.csv"));
    let csv_path = match out {
        Some(dir) => dir.join(declared.file_name().unwrap_or("results.csv".as_ref())),
        None => declared,
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        pool = pool.num_threads(k.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_METHOD, &Error::Internal(e.to_string())),
    };

    let start = Instant::now();
    let records = match pool.install(|| run_experiment(&cfg)) {
        Ok(r) => r,
        Err(e) => return fail(exit_code_for(&e), &e),
    };
    if let Err(e) = write_csv(&csv_path, &records, cfg.tau) {
        return fail(EXIT_METHOD, &e);
    }
    let dir = csv_path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    if let Err(e) = write_plot_data(dir, stem, &records, Aggregate::Median) {
        return fail(EXIT_METHOD, &e);
    }

    println!(
        "{} records -> {} ({:.2} s)",
        records.len(),
        csv_path.display(),
        start.elapsed().as_secs_f64()
    );
    if let Ok(fit) = fit_rate(&records, Aggregate::Median) {
        println!("rate {:.4} (fit residual {:.3e})", fit.slope, fit.residual);
    }
    ExitCode::SUCCESS
}

fn rates(csv: &Path, group: Group, mean: bool) -> ExitCode {
    let text = match std::fs::read_to_string(csv) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, &Error::Io(format!("{}: {e}", csv.display()))),
    };
    let records = match parse_csv(&text) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    let by = match group {
        Group::Method => GroupBy::Method,
        Group::Rule => GroupBy::Rule,
        Group::MethodRule => GroupBy::MethodRule,
    };
    let how = if mean { Aggregate::Mean } else { Aggregate::Median };

    println!("{:<28} {:>10} {:>12} {:>12} {:>6}", "group", "slope", "intercept", "residual", "levels");
    let mut failed = false;
    for (key, recs) in group_records(&records, by) {
        match fit_rate(&recs, how) {
            Ok(fit) => println!(
                "{key:<28} {:>10.4} {:>12.4} {:>12.3e} {:>6}",
                fit.slope,
                fit.intercept,
                fit.residual,
                fit.points.len()
            ),
            Err(e) => {
                eprintln!("{key}: {e}");
                failed = true;
            }
        }
    }
    if failed {
        ExitCode::from(EXIT_METHOD)
    } else {
        ExitCode::SUCCESS
    }
}

fn selftest() -> ExitCode {
    let start = Instant::now();
    let reports = run_selftest();
    for r in &reports {
        println!("{}", r.summary_line());
        if !r.passed() {
            print!("{}", r.details());
        }
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if reports.iter().all(|r| r.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, threads } => run(&config, out, threads),
        Command::Rates { csv, group, mean } => rates(&csv, group, mean),
        Command::Selftest => selftest(),
    }
}
