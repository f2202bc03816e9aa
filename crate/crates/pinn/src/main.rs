//! Command-line driver for the physics-informed PDE experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pinn::error::Error;
use pinn::harness::{
    bench, config::CONFIG_KEYS, export_grid, export_points, save_checkpoint, BenchOptions,
    ExperimentConfig, Mode, Prediction, TableId,
};
use pinn::irk;
use pinn::oracle;

#[derive(Parser)]
#[command(
    name = "pinn",
    about = "Physics-informed neural networks for 1-D Burgers and KdV: \
             continuous/discrete-time solvers and coefficient identification",
    after_long_help = CONFIG_KEYS,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, prediction.csv, training_data.csv
    /// and model.ckpt.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write iterations.csv (iteration, loss, grad_norm, step_length)
    /// and print progress.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate oracle datasets without training.
    GenData(RunArgs),
    /// Data-driven solution, continuous-time formulation (Burgers).
    SolveCt(RunArgs),
    /// Data-driven solution, discrete-time Runge-Kutta formulation (Burgers).
    SolveDt(RunArgs),
    /// Coefficient identification from scattered data (Burgers).
    IdentifyCt(RunArgs),
    /// Coefficient identification from two snapshots (Burgers or KdV).
    IdentifyDt(RunArgs),
    /// Reproduce one of the systematic-study tables as CSV.
    Bench {
        /// Table id: ct_inf_1 ct_inf_2 dt_inf_1 dt_inf_2 ct_id_1 ct_id_2
        /// dt_id_1 dt_id_2
        #[arg(long)]
        table: String,
        /// Comma-separated row labels to keep (default: all).
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
        /// Comma-separated column labels to keep (default: all).
        #[arg(long, value_delimiter = ',')]
        cols: Vec<String>,
        /// Seeds per cell (median is reported).
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        /// Base seed for the per-cell seed sweep.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base config overriding the table defaults (row/column values are
        /// still applied on top).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Lift the desk-scale caps (q ≤ 100, max_iterations ≤ 20000).
        #[arg(long)]
        full_scale: bool,
        /// Override the per-run iteration budget.
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Export a Gauss–Legendre Butcher tableau as plain text.
    Tableau {
        #[arg(long)]
        q: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_config(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::new(mode),
    };
    cfg.mode = mode;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData(args) => {
            let cfg = match &args.config {
                Some(path) => ExperimentConfig::from_path(path)?,
                None => ExperimentConfig::new(Mode::SolveCt),
            };
            gen_data(&cfg, &args)
        }
        Command::SolveCt(args) => run_mode(load_config(&args, Mode::SolveCt)?, &args),
        Command::SolveDt(args) => run_mode(load_config(&args, Mode::SolveDt)?, &args),
        Command::IdentifyCt(args) => run_mode(load_config(&args, Mode::IdentifyCt)?, &args),
        Command::IdentifyDt(args) => run_mode(load_config(&args, Mode::IdentifyDt)?, &args),
        Command::Bench {
            table,
            rows,
            cols,
            seeds,
            seed,
            config,
            full_scale,
            max_iterations,
            out,
        } => {
            let id: TableId = table.parse()?;
            let mut opts = BenchOptions::new(id);
            opts.rows = rows;
            opts.cols = cols;
            opts.seeds = seeds.max(1);
            opts.base_seed = seed;
            opts.full_scale = full_scale;
            opts.max_iterations = max_iterations;
            let overrides = match config {
                Some(path) => Some(ExperimentConfig::from_path(&path)?),
                None => None,
            };
            let result = bench(&opts, overrides.as_ref())?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{table}.csv"));
            std::fs::write(&path, result.to_csv())?;
            print!("{}", result.to_csv());
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Tableau { q, out } => {
            let tableau = irk::gauss_legendre(q)?;
            let text = tableau.export();
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn gen_data(cfg: &ExperimentConfig, args: &RunArgs) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out)?;
    match cfg.equation {
        pinn::harness::Equation::Burgers => {
            let grid = oracle::burgers_grid(cfg.eval.nt, cfg.eval.nx, pinn::pde::BURGERS_NU)?;
            let path = args.out.join("burgers_grid.csv");
            export_grid(&grid, &path)?;
            eprintln!("wrote {}", path.display());
        }
        pinn::harness::Equation::Kdv => {
            let o = &cfg.oracle;
            let t1 = cfg.data.t_n + cfg.data.dt;
            let sim = oracle::kdv_simulate(
                o.kdv_lambda1,
                o.kdv_lambda2,
                o.kdv_modes,
                o.kdv_dt_sim,
                t1,
                &[cfg.data.t_n, t1],
            )?;
            let path = args.out.join("kdv_snapshots.csv");
            export_grid(&sim, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run_mode(cfg: ExperimentConfig, args: &RunArgs) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out)?;
    let mut log = if args.verbose {
        let f = std::fs::File::create(args.out.join("iterations.csv"))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["iteration", "loss", "grad_norm", "step_length"])
            .map_err(|e| Error::structural(format!("csv: {e}")))?;
        Some(w)
    } else {
        None
    };
    let verbose = args.verbose;
    let out = pinn::harness::run_observed(&cfg, &mut |info| {
        if let Some(w) = log.as_mut() {
            let _ = w.write_record([
                info.iteration.to_string(),
                format!("{:.16e}", info.loss),
                format!("{:.16e}", info.grad_norm),
                format!("{:.16e}", info.step_length),
            ]);
        }
        if verbose && info.iteration % 500 == 0 {
            eprintln!(
                "iter {:6}  loss {:.6e}  |g| {:.3e}",
                info.iteration, info.loss, info.grad_norm
            );
        }
    })?;
    if let Some(mut w) = log {
        w.flush()?;
    }

    let report_path = args.out.join("report.json");
    let json = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Error::structural(format!("report serialization: {e}")))?;
    std::fs::write(&report_path, json)?;

    match &out.prediction {
        Prediction::Grid(grid) | Prediction::Stages(grid) => {
            export_grid(grid, &args.out.join("prediction.csv"))?;
        }
    }
    export_points(&out.training_data, &args.out.join("training_data.csv"))?;
    save_checkpoint(&out.network, &out.params, &args.out.join("model.ckpt"))?;

    println!(
        "{} done: rel_l2 = {:.3e}{}  loss = {:.3e}  iters = {}  ({})",
        mode_name(cfg.mode),
        out.report.rel_l2,
        match out.report.pct_err {
            Some((e1, e2)) => format!("  pct_err = ({e1:.3}%, {e2:.3}%)"),
            None => String::new(),
        },
        out.report.loss_final,
        out.report.iterations,
        out.report.termination,
    );
    eprintln!("artifacts in {}", args.out.display());
    Ok(())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::SolveCt => "solve-ct",
        Mode::SolveDt => "solve-dt",
        Mode::IdentifyCt => "identify-ct",
        Mode::IdentifyDt => "identify-dt",
    }
}
