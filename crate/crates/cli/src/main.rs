//! Command-line entry point: exact computations, parameter sweeps and
//! Monte Carlo runs over the spin-market imbalance chain.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::Usage;
use config::{parse_beta, Overlay, RangeSpec};
use output::Format;
use std::path::PathBuf;

fn parse_beta_arg(s: &str) -> Result<f64, String> {
    parse_beta(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug, Clone, Default)]
struct ParamFlags {
    /// agent count
    #[arg(long)]
    n: Option<usize>,
    /// lattice dimension (neighborhoods have 2d sites)
    #[arg(long)]
    d: Option<usize>,
    /// global coupling constant
    #[arg(long)]
    alpha: Option<f64>,
    /// seller/buyer impact ratio, in [-1, 0)
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// heat-bath move probability, in (0, 1]
    #[arg(long)]
    q: Option<f64>,
    /// inverse temperature; "inf" selects the frozen phase
    #[arg(long, value_parser = parse_beta_arg)]
    beta: Option<f64>,
    /// impact of an incremental buyer
    #[arg(long = "f-plus")]
    f_plus: Option<f64>,
    /// reference price entering the wealth formulas
    #[arg(long)]
    price: Option<f64>,
}

impl ParamFlags {
    fn overlay(&self) -> Overlay {
        Overlay {
            n: self.n,
            d: self.d,
            alpha: self.alpha,
            gamma: self.gamma,
            q: self.q,
            beta: self.beta,
            f_plus: self.f_plus,
            price: self.price,
            ..Overlay::default()
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct SweepFlags {
    /// agent count
    #[arg(long)]
    n: Option<usize>,
    /// lattice dimension (neighborhoods have 2d sites)
    #[arg(long)]
    d: Option<usize>,
    /// coupling constant: scalar or start:stop:step
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<RangeSpec>,
    /// impact ratio: scalar or start:stop:step
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<RangeSpec>,
    /// heat-bath probability: scalar or start:stop:step (default 0.01:1:0.01)
    #[arg(long)]
    q: Option<RangeSpec>,
    /// impact of an incremental buyer
    #[arg(long = "f-plus")]
    f_plus: Option<f64>,
    /// reference price entering the wealth formulas
    #[arg(long)]
    price: Option<f64>,
}

impl SweepFlags {
    fn overlay(&self) -> Overlay {
        Overlay {
            n: self.n,
            d: self.d,
            f_plus: self.f_plus,
            price: self.price,
            ..Overlay::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the per-level transition kernel as a table
    Kernel(ParamFlags),
    /// Classify every imbalance level into its attractor set
    Classify(ParamFlags),
    /// Compute the stationary measure branch(es) plus metadata
    Measure(ParamFlags),
    /// Per-q wealth table at fixed coupling and impact ratio
    Wealth {
        #[command(flatten)]
        params: ParamFlags,
        /// q grid: scalar or start:stop:step (default 0.01:1:0.01)
        #[arg(long = "q-grid")]
        q_grid: Option<RangeSpec>,
    },
    /// Optimal strategic level q* as alpha and/or gamma vary
    Qstar(SweepFlags),
    /// Full (alpha, gamma, q) grid sweep of measure properties
    Sweep(SweepFlags),
    /// Monte Carlo run of the full two-dimensional spin process
    Simulate {
        #[command(flatten)]
        params: ParamFlags,
        /// number of epochs
        #[arg(long)]
        epochs: Option<u64>,
        /// RNG seed (chacha12)
        #[arg(long)]
        seed: Option<u64>,
        /// initial capital per agent
        #[arg(long)]
        capital: Option<f64>,
        /// initial market spins: random | plus | minus | <file>
        #[arg(long = "init-eta1", default_value = "random")]
        init_eta1: String,
        /// initial expectation spins: random | plus | minus | <file>
        #[arg(long = "init-eta2", default_value = "random")]
        init_eta2: String,
        /// paths to record: comma list of nplus,price,wealth,eta2 (or all)
        #[arg(long, default_value = "none")]
        record: String,
    },
    /// Explicit chain rates and dense stationary solve (debugging)
    #[command(hide = true)]
    Oracle {
        #[command(flatten)]
        params: ParamFlags,
        /// branch assignment for frozen levels, as bits (0 bit = +1 mark)
        #[arg(long, default_value_t = 0)]
        branch: u64,
    },
}

#[derive(Parser, Debug)]
#[command(
    name = "imbal",
    version,
    about = "Spin-market imbalance chain: exact measures, sweeps and Monte Carlo"
)]
struct Cli {
    /// key=value config file; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output file ("-" = stdout) or directory for multi-file subcommands
    #[arg(long, global = true, default_value = "-")]
    out: PathBuf,
    /// tabular output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// worker threads for sweeps (default: IMBAL_JOBS or the CPU count)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn jobs_from(cli: &Cli, overlay: &Overlay) -> usize {
    cli.jobs
        .or(overlay.jobs)
        .or_else(|| std::env::var("IMBAL_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let file_overlay = match &cli.config {
        Some(path) => config::read_config_file(path).map_err(|e| Usage(e.to_string()))?,
        None => Overlay::default(),
    };
    // a multi-file subcommand treats "-" as the current directory
    let out_dir = if cli.out == PathBuf::from("-") { PathBuf::from(".") } else { cli.out.clone() };

    match &cli.command {
        Command::Kernel(p) => {
            let overlay = p.overlay().over(&file_overlay);
            commands::cmd_kernel(&overlay, &cli.out, cli.format)
        }
        Command::Classify(p) => {
            let overlay = p.overlay().over(&file_overlay);
            commands::cmd_classify(&overlay, &cli.out, cli.format)
        }
        Command::Measure(p) => {
            let overlay = p.overlay().over(&file_overlay);
            commands::cmd_measure(&overlay, &out_dir, cli.format)
        }
        Command::Wealth { params, q_grid } => {
            let overlay = params.overlay().over(&file_overlay);
            let jobs = jobs_from(&cli, &overlay);
            commands::cmd_wealth(&overlay, *q_grid, &cli.out, cli.format, jobs)
        }
        Command::Qstar(flags) => {
            let overlay = flags.overlay().over(&file_overlay);
            let jobs = jobs_from(&cli, &overlay);
            commands::cmd_qstar(
                &overlay,
                flags.alpha,
                flags.gamma,
                flags.q,
                &cli.out,
                cli.format,
                jobs,
            )
        }
        Command::Sweep(flags) => {
            let overlay = flags.overlay().over(&file_overlay);
            let jobs = jobs_from(&cli, &overlay);
            commands::cmd_sweep(
                &overlay,
                flags.alpha,
                flags.gamma,
                flags.q,
                &cli.out,
                cli.format,
                jobs,
            )
        }
        Command::Simulate { params, epochs, seed, capital, init_eta1, init_eta2, record } => {
            let mut overlay = params.overlay().over(&file_overlay);
            overlay.epochs = epochs.or(overlay.epochs);
            overlay.seed = seed.or(overlay.seed);
            overlay.capital = capital.or(overlay.capital);
            commands::cmd_simulate(&overlay, init_eta1, init_eta2, record, &out_dir, cli.format)
        }
        Command::Oracle { params, branch } => {
            let overlay = params.overlay().over(&file_overlay);
            commands::cmd_oracle(&overlay, *branch, &cli.out, cli.format)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("imbal: {err}");
            let code = if err.downcast_ref::<Usage>().is_some()
                || err.downcast_ref::<clap::Error>().is_some()
            {
                1
            } else {
                2
            };
            std::process::exit(code);
        }
    }
}
