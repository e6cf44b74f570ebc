//! Batch command line for the library: seeded dataset generation and
//! config-driven experiment runs. Flags override config-file fields;
//! outputs are CSV tables, columnar plot data and metadata sidecars.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use momineq::experiment::{
    run_experiment, ExperimentConfig, ExperimentId, RawConfig, RawSampler, OUT_DIR_ENV,
};
use momineq::simulate::{gen_example_5_1, gen_example_5_2, gen_example_5_3};
use momineq::{Error, Result};

#[derive(Parser)]
#[command(
    name = "momineq",
    version,
    about = "Posterior inference and moment selection for moment inequality models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one simulated dataset and write it as CSV.
    Gen(GenArgs),
    /// Run any experiment end to end, emitting its tables and plot data.
    Run(RunArgs),
    /// Run the moment-selection experiment (ex53 configs).
    Select(RunArgs),
    /// Run an estimation experiment (ex51, ex52 or custom configs).
    Estimate(RunArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Experiment id: ex51, ex52 or ex53.
    #[arg(long)]
    experiment: String,
    /// Rows to generate.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; default <experiment>_n<n>_seed<seed>.csv in the
    /// output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment id: ex51, ex52, ex53 or custom.
    #[arg(long)]
    experiment: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated moment weights.
    #[arg(long, value_delimiter = ',')]
    psi: Option<Vec<f64>>,
    /// Retained draws per chain.
    #[arg(long)]
    b: Option<u64>,
    /// Discarded warm-up transitions per chain.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Output directory; the MOMINEQ_OUT_DIR environment variable
    /// overrides it.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => generate(args),
        Command::Run(args) => run(args, "run", None),
        Command::Select(args) => run(args, "select", Some(&[ExperimentId::Ex53])),
        Command::Estimate(args) => run(
            args,
            "estimate",
            Some(&[ExperimentId::Ex51, ExperimentId::Ex52, ExperimentId::Custom]),
        ),
    }
}

fn generate(args: GenArgs) -> Result<()> {
    let id = ExperimentId::parse(&args.experiment)?;
    let data = match id {
        ExperimentId::Ex51 => gen_example_5_1(args.n, args.seed)?,
        ExperimentId::Ex52 => gen_example_5_2(args.n, args.seed)?,
        ExperimentId::Ex53 => gen_example_5_3(args.n, args.seed)?,
        ExperimentId::Custom => {
            return Err(Error::Config(
                "gen draws simulated data; expected ex51, ex52 or ex53".into(),
            ))
        }
    };
    let out = match args.out {
        Some(path) => path,
        None => {
            let name = format!("{}_n{}_seed{}.csv", id.label(), args.n, args.seed);
            match std::env::var(OUT_DIR_ENV) {
                Ok(dir) if !dir.is_empty() => PathBuf::from(dir).join(name),
                _ => PathBuf::from(name),
            }
        }
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    data.write_csv(&out)?;
    println!("wrote {} rows to {}", data.n(), out.display());
    Ok(())
}

fn run(args: RunArgs, verb: &str, allowed: Option<&[ExperimentId]>) -> Result<()> {
    let file = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let sampler = if args.b.is_some() || args.burn_in.is_some() {
        Some(RawSampler { b: args.b, burn_in: args.burn_in, ..RawSampler::default() })
    } else {
        None
    };
    let flags = RawConfig {
        experiment: args.experiment,
        n: args.n,
        seed: args.seed,
        psi: args.psi,
        output_dir: args.out_dir,
        sampler,
        ..RawConfig::default()
    };
    let config = ExperimentConfig::resolve(file.overlaid(flags))?;
    if let Some(allowed) = allowed {
        if !allowed.contains(&config.experiment) {
            let labels: Vec<&str> = allowed.iter().map(|id| id.label()).collect();
            return Err(Error::Config(format!(
                "{verb} covers {}; got {} (use run)",
                labels.join(", "),
                config.experiment.label()
            )));
        }
    }
    let report = run_experiment(&config)?;
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
