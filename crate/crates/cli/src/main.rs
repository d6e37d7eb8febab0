use std::path::PathBuf;
use std::process::ExitCode;

use attrprof::pipeline::{
    cmd_classify, cmd_eval, cmd_extract, cmd_reduce, describe_config, describe_file,
    PipelineConfig, PRESETS,
};
use attrprof::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attrprof", version, about = "Attribute profiles for raster classification")]
struct Cli {
    /// Pipeline configuration (TOML); overlays the preset when both are given.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in parameter set: reykjavik or pavia.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Overrides classifier.seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; 0 or unset uses all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured profile and write the feature stack.
    Extract,
    /// Fit PCA and write the component scores.
    Reduce,
    /// Train the forest, predict every pixel and score the test labels.
    Classify,
    /// Score an existing prediction against the test labels.
    Eval,
    /// Describe the resolved configuration, or the given files.
    Info { files: Vec<PathBuf> },
}

fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    if cli.config.is_none() && cli.preset.is_none() {
        return Err(Error::Validation(format!(
            "no configuration: pass --config PATH or --preset {}",
            PRESETS.join("|")
        )));
    }
    let mut config = PipelineConfig::load(cli.preset.as_deref(), cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.classifier.seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("--threads {n}: {e}")))?;
    }
    match &cli.command {
        Command::Info { files } if !files.is_empty() => {
            for f in files {
                print!("{}", describe_file(f)?);
            }
        }
        Command::Info { .. } => print!("{}", describe_config(&resolve(cli)?)?),
        Command::Reduce => {
            let r = cmd_reduce(&resolve(cli)?)?;
            let cached = if r.cached { " (cached)" } else { "" };
            println!("{}: {} components{cached}", r.path.display(), r.components);
            for (i, c) in r.cumulative.iter().enumerate() {
                println!("  pc{} cumulative variance {c:.6}", i + 1);
            }
        }
        Command::Extract => {
            let r = cmd_extract(&resolve(cli)?)?;
            let cached = if r.cached { " (cached)" } else { "" };
            println!("{}: {} layers{cached}", r.path.display(), r.depth);
        }
        Command::Classify => {
            let r = cmd_classify(&resolve(cli)?)?;
            println!("{}", r.labels.display());
            println!("{}", r.map.display());
            if let Some(oob) = r.oob_error {
                println!("oob error {oob:.4}");
            }
            print!("{}", r.metrics.to_table());
        }
        Command::Eval => print!("{}", cmd_eval(&resolve(cli)?)?.to_table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
