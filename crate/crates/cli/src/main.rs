use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relu_recover::Error;
use relu_recover_cli::config::{Experiment, ExperimentConfig, InitKind};
use relu_recover_cli::experiments;
use relu_recover_cli::plot::{emit_plot, PlotKind};
use relu_recover_cli::table::ResultTable;

#[derive(Parser)]
#[command(
    name = "relu-recover",
    about = "Teacher-network recovery experiments: gradient descent on one-hidden-layer ReLU models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence comparison: warm start vs random init on one dataset
    Fig2a(RunArgs),
    /// Success-probability sweep over dimensions and sample-size ratios
    Fig2b(RunArgs),
    /// Estimation-error sweep under label noise
    Fig2c(RunArgs),
    /// Local-geometry and concentration checks
    CheckTheory(RunArgs),
    /// One training run with full trajectory logging
    Train(RunArgs),
    /// Draw a synthetic dataset and write it in the dataset CSV format
    GenData(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file with `key = value` lines; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input dimension (restricts grid experiments to one dimension)
    #[arg(long)]
    d: Option<usize>,
    /// Hidden-layer width
    #[arg(long)]
    k: Option<usize>,
    /// Sample size
    #[arg(long)]
    n: Option<usize>,
    /// Gradient-descent step size
    #[arg(long)]
    eta: Option<f64>,
    /// Iteration budget
    #[arg(long)]
    iters: Option<usize>,
    /// Label-noise standard deviation
    #[arg(long)]
    nu: Option<f64>,
    /// Initializer: warm | random
    #[arg(long)]
    init: Option<String>,
    /// Warm-start radius as a multiple of the smallest teacher singular value
    #[arg(long = "warm-radius")]
    warm_radius: Option<f64>,
    /// Trials per grid cell
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; every run is a pure function of it
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot next to the output CSV (requires --out)
    #[arg(long)]
    plot: bool,
}

impl RunArgs {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::preset(experiment);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(d) = self.d {
            cfg.d = Some(d);
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(n) = self.n {
            cfg.n = Some(n);
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(iters) = self.iters {
            cfg.iters = iters;
        }
        if let Some(nu) = self.nu {
            cfg.nu = nu;
        }
        if let Some(init) = &self.init {
            cfg.init = InitKind::parse(init)?;
        }
        if let Some(r) = self.warm_radius {
            cfg.warm_radius = r;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(out) = self.out {
            cfg.out_path = Some(out);
        }
        cfg.plot = self.plot;
        if cfg.plot && cfg.out_path.is_none() {
            return Err(Error::InvalidArgument(
                "--plot requires --out (the SVG is written next to the CSV)".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_output(text: &str, cfg: &ExperimentConfig) -> Result<(), Error> {
    match &cfg.out_path {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_plot(table: &ResultTable, kind: PlotKind, cfg: &ExperimentConfig) -> Result<(), Error> {
    if !cfg.plot {
        return Ok(());
    }
    let svg = emit_plot(table, kind)?;
    let path = cfg.out_path.as_ref().unwrap().with_extension("svg");
    std::fs::write(path, svg).map_err(Error::from)
}

fn run(command: Command) -> Result<(), Error> {
    let (experiment, args) = match command {
        Command::Fig2a(a) => (Experiment::Fig2a, a),
        Command::Fig2b(a) => (Experiment::Fig2b, a),
        Command::Fig2c(a) => (Experiment::Fig2c, a),
        Command::CheckTheory(a) => (Experiment::CheckTheory, a),
        Command::Train(a) => (Experiment::Train, a),
        Command::GenData(a) => (Experiment::GenData, a),
    };
    let cfg = args.into_config(experiment)?;
    match experiment {
        Experiment::Fig2a => {
            let run = experiments::run_fig2a(&cfg)?;
            write_output(&run.table.to_csv_string(), &cfg)?;
            write_plot(&run.table, PlotKind::Line, &cfg)
        }
        Experiment::Fig2b => {
            let table = experiments::run_fig2b(&cfg)?;
            write_output(&table.to_csv_string(), &cfg)?;
            write_plot(&table, PlotKind::Line, &cfg)
        }
        Experiment::Fig2c => {
            let table = experiments::run_fig2c(&cfg)?;
            write_output(&table.to_csv_string(), &cfg)?;
            write_plot(&table, PlotKind::Line, &cfg)
        }
        Experiment::CheckTheory => {
            let table = experiments::run_check_theory(&cfg)?;
            write_output(&table.to_csv_string(), &cfg)?;
            write_plot(&table, PlotKind::Scatter, &cfg)
        }
        Experiment::Train => {
            let run = experiments::run_train(&cfg)?;
            write_output(&run.table.to_csv_string(), &cfg)?;
            write_plot(&run.table, PlotKind::Line, &cfg)
        }
        Experiment::GenData => {
            let dataset = experiments::run_gen_data(&cfg)?;
            write_output(&dataset.to_csv_string(), &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Diverged { .. } => 2,
                Error::Io(_) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
