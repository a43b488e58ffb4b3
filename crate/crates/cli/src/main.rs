use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use signweave_cli::config::parse_overrides;
use signweave_cli::stages::{evaluate_files, Outcome, Pipeline, Stage};
use signweave_cli::{artifacts, fixture, CliError, Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "signweave",
    version,
    about = "Synthesize sentence-level sign language datasets from isolated-sign clips"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as `--key value` pairs.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the clip manifest.
    Ingest(ConfigArgs),
    /// Select the per-class vocabulary.
    Vocab(ConfigArgs),
    /// Generate sentences.
    Gen(ConfigArgs),
    /// Expand sentences into train and validation instances.
    Plan(ConfigArgs),
    /// Fill the feature cache for every clip the plan references.
    Extract(ConfigArgs),
    /// Nearest-centroid baseline over the validation sets.
    Translate(ConfigArgs),
    /// Score translations. With --refs/--hyps, scores those files instead.
    Eval {
        #[arg(long, requires = "hyps")]
        refs: Option<PathBuf>,
        #[arg(long, requires = "refs")]
        hyps: Option<PathBuf>,
        /// Synonym table for the file mode.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// Report path for the file mode; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Plan and cache report.
    Stats(ConfigArgs),
    /// Every stage in order.
    RunAll(ConfigArgs),
    /// Write a synthetic manifest, validation file and config.
    Fixture {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 13)]
        n_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve mock extraction requests on stdin/stdout.
    BridgeMock {
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
}

fn pipeline(args: &ConfigArgs) -> Result<Pipeline> {
    // `--config` may also appear among the trailing pairs.
    let mut config = args.config.clone();
    let mut rest = Vec::new();
    for (k, v) in parse_overrides(&args.overrides)? {
        if k == "config" && config.is_none() && v.is_string() {
            config = v.as_str().map(PathBuf::from);
        } else {
            rest.push((k, v));
        }
    }
    Pipeline::new(RunConfig::load(config.as_deref(), &rest)?)
}

fn report(stage: Stage, outcome: &Outcome) {
    match outcome {
        Outcome::Ran(msg) => println!("{stage}: {msg}"),
        Outcome::UpToDate => println!("{stage}: up to date"),
    }
}

fn print_stats(p: &Pipeline) -> Result<()> {
    let stats = p.stats()?;
    for (split, n) in &stats.per_split {
        println!("{split:?} instances: {n}");
    }
    println!("total instances: {}", stats.total);
    println!("clip slots: {}", stats.clip_slots);
    println!("cache entries: {}", stats.cache_entries);
    match (stats.hits, stats.misses) {
        (Some(h), Some(m)) => println!("last extract: {h} hits, {m} misses"),
        _ => println!("last extract: no counters"),
    }
    println!("dedup factor: {:.1}", stats.dedup_factor);
    for w in &stats.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stage = |s: Stage, args: &ConfigArgs| -> Result<()> {
        let p = pipeline(args)?;
        report(s, &p.run_stage(s)?);
        Ok(())
    };
    match cli.command {
        Command::Ingest(a) => stage(Stage::Ingest, &a),
        Command::Vocab(a) => stage(Stage::Vocab, &a),
        Command::Gen(a) => stage(Stage::Gen, &a),
        Command::Plan(a) => stage(Stage::Plan, &a),
        Command::Extract(a) => stage(Stage::Extract, &a),
        Command::Translate(a) => stage(Stage::Translate, &a),
        Command::Eval {
            refs: Some(refs),
            hyps: Some(hyps),
            synonyms,
            out,
            ..
        } => {
            let report = evaluate_files(&refs, &hyps, synonyms.as_deref(), None)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            match out {
                Some(path) => artifacts::write_atomic(&path, text.as_bytes()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Eval { args, .. } => stage(Stage::Eval, &args),
        Command::Stats(a) => print_stats(&pipeline(&a)?),
        Command::RunAll(a) => {
            let p = pipeline(&a)?;
            for s in Stage::ALL {
                report(s, &p.run_stage(s)?);
            }
            print_stats(&p)
        }
        Command::Fixture {
            dir,
            n_per_class,
            seed,
        } => {
            let path = fixture::write_fixture(&dir, n_per_class, seed)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::BridgeMock { noise_seed } => {
            let stdin = io::stdin().lock();
            let stdout = BufWriter::new(io::stdout().lock());
            signweave_core::features::bridge::serve_mock(stdin, stdout, noise_seed)
                .map_err(CliError::from)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
