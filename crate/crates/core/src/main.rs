use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kronfactor::capm::capm_residuals;
use kronfactor::dgp::monte_carlo;
use kronfactor::io::{
    format_scan_reports, format_sim_report, format_sim_table, format_test_reports, parse_sim_config, read_numbers,
    read_series, write_atomic, write_series,
};
use kronfactor::testing::{practical_scan, reshape_series, run_kron_test_along};
use kronfactor::{Error, ModeSet, Result};

#[derive(Parser)]
#[command(name = "kronfactor", version, about = "Kronecker structure tests for tensor factor models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo design from a key=value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving report.txt and table.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Test the Kronecker structure of the loadings along a mode set.
    Test {
        #[arg(long)]
        data: PathBuf,
        /// Merged modes, 1-based: `v..K` or a comma list.
        #[arg(long)]
        mode_set: String,
        /// Ranks of the modes outside the mode set, ascending by mode.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        pre_ranks: Vec<usize>,
        #[arg(long = "r-v", required = true)]
        r_v: usize,
        #[arg(long, required = true)]
        alpha: Vec<f64>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan every mode for missing Kronecker structure.
    Scan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        r_vec: usize,
        #[arg(long, required = true)]
        alpha: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove the market effect from every component.
    Capm {
        #[arg(long)]
        data: PathBuf,
        /// Market returns, one per time point, comma or whitespace separated.
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge the given modes (1-based) into one trailing mode.
    Reshape {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode_set(text: &str, order: usize) -> Result<ModeSet> {
    let bad = || Error::Config(format!("cannot parse mode set {text:?}"));
    let labels: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    ModeSet::from_one_based(&labels, order)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io { path: config.display().to_string(), message: e.to_string() })?;
            let spec = parse_sim_config(&text)?;
            let result = monte_carlo(&spec.dgp, spec.reps, &spec.alphas)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| Error::Io { path: out.display().to_string(), message: e.to_string() })?;
            write_atomic(&out.join("report.txt"), &format_sim_report(&spec, &result))?;
            write_atomic(&out.join("table.txt"), &format_sim_table(&spec, &result))
        }
        Command::Test { data, mode_set, pre_ranks, r_v, alpha, out } => {
            let y = read_series(&data)?;
            let a = parse_mode_set(&mode_set, y.order())?;
            let reports = run_kron_test_along(&y, &a, &pre_ranks, r_v, &alpha)?;
            emit(&format_test_reports(&reports), out.as_deref())
        }
        Command::Scan { data, r_vec, alpha, out } => {
            let y = read_series(&data)?;
            let reports = practical_scan(&y, r_vec, &alpha)?;
            emit(&format_scan_reports(&reports), out.as_deref())
        }
        Command::Capm { data, market, out } => {
            let y = read_series(&data)?;
            let r = read_numbers(&market)?;
            write_series(&capm_residuals(&y, &r)?.residuals, &out)
        }
        Command::Reshape { data, modes, out } => {
            let y = read_series(&data)?;
            let a = ModeSet::from_one_based(&modes, y.order())?;
            write_series(&reshape_series(&y, &a)?, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let lines: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", lines.join(" "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
