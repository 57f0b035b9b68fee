//! Command-line front end: parse a manifest, run it, print the summary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flowens::config::{parse_config, RunMode};
use flowens::runner::execute;

#[derive(Parser)]
#[command(name = "flowens", about = "Ensemble flow simulations on a shared operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Advance one configuration on its mesh and write monitor CSVs.
    Run(RunArgs),
    /// Repeat a configuration over its mesh sequence and tabulate errors.
    Study(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a key = value configuration file.
    config: PathBuf,
    /// Directory for CSVs, summaries, and snapshots.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Advance members on one shared operator, or each one independently.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Dump final vertex fields per member.
    #[arg(long)]
    store_fields: bool,
    /// Write a VTK snapshot every N steps (0 disables).
    #[arg(long, value_name = "N")]
    vtk_every: Option<usize>,
    /// Assemble member right-hand sides on up to N worker threads.
    #[arg(long, value_name = "N")]
    parallel_members: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ensemble,
    Independent,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, as_study) = match &cli.command {
        Command::Run(args) => (args, false),
        Command::Study(args) => (args, true),
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: reading {}: {err}", args.config.display());
            return ExitCode::FAILURE;
        }
    };
    let mut manifest = match parse_config(&text) {
        Ok(manifest) => manifest,
        Err(err) => {
            eprintln!("error: {}: {err}", args.config.display());
            return ExitCode::FAILURE;
        }
    };

    if let Some(dir) = &args.output {
        manifest.output.dir = dir.clone();
    }
    if let Some(mode) = args.mode {
        manifest.mode = match mode {
            ModeArg::Ensemble => RunMode::Ensemble,
            ModeArg::Independent => RunMode::Independent,
        };
    }
    if args.store_fields {
        manifest.output.store_fields = true;
    }
    if let Some(every) = args.vtk_every {
        manifest.output.vtk_every = every;
    }

    match execute(&manifest, as_study, args.parallel_members.unwrap_or(1)) {
        Ok(report) => {
            print!("{}", report.summary);
            println!("outputs in {}", manifest.output.dir.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
