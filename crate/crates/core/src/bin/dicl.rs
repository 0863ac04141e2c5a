use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dicl_core::commands;
use dicl_core::config::RunConfig;
use dicl_core::kv::KeyValues;

#[derive(Parser)]
#[command(name = "dicl", version, about = "Diversity-based in-context example selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset manifest and its split files.
    Prepare(Flags),
    /// Fit tf-idf and materialize dense embeddings.
    Vectorize(Flags),
    /// Evaluate one method/configuration.
    Run(Flags),
    /// Grid-search on validation, then evaluate the winners on test.
    Sweep(Flags),
    /// Rebuild report.md / sweep.csv from stored runs.
    Report(Flags),
}

/// Every flag maps onto the config key of the same name and wins over the
/// config file.
#[derive(Args, Default)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest path.
    #[arg(long)]
    dataset: Option<String>,
    /// zero_shot | tfidf | sbert | tfidf_mmr | sbert_mmr (comma-separated for sweep), or icl|mmr with --similarity.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Pool multiplier; the MMR pool holds n*k candidates.
    #[arg(long)]
    n: Option<String>,
    /// lexical | semantic
    #[arg(long)]
    similarity: Option<String>,
    /// Completion service base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Offline completions: `nearest` (default) or `vote`.
    #[arg(long, num_args = 0..=1, default_missing_value = "nearest")]
    mock: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Split to evaluate for `run` / `report`.
    #[arg(long)]
    split: Option<String>,
    /// Demonstration order: selection | reversed
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long)]
    embedding_model: Option<String>,
    #[arg(long)]
    max_in_flight: Option<String>,
    #[arg(long)]
    max_retries: Option<String>,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    k_grid: Option<String>,
}

impl Flags {
    fn overrides(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let pairs = [
            ("dataset", &self.dataset),
            ("method", &self.method),
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("n", &self.n),
            ("similarity", &self.similarity),
            ("endpoint", &self.endpoint),
            ("model", &self.model),
            ("mock", &self.mock),
            ("out", &self.out),
            ("split", &self.split),
            ("order", &self.order),
            ("embedding_endpoint", &self.embedding_endpoint),
            ("embedding_model", &self.embedding_model),
            ("max_in_flight", &self.max_in_flight),
            ("max_retries", &self.max_retries),
            ("alpha_grid", &self.alpha_grid),
            ("k_grid", &self.k_grid),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                kv.set(key, v.as_str());
            }
        }
        kv
    }
}

fn execute(command: Command) -> dicl_core::Result<()> {
    let (flags, name) = match &command {
        Command::Prepare(f) => (f, "prepare"),
        Command::Vectorize(f) => (f, "vectorize"),
        Command::Run(f) => (f, "run"),
        Command::Sweep(f) => (f, "sweep"),
        Command::Report(f) => (f, "report"),
    };
    if name == "report" {
        let out = PathBuf::from(flags.out.as_deref().unwrap_or("dicl-out"));
        let split = flags.split.as_deref().unwrap_or("test").parse()?;
        for path in commands::report(&out, split)? {
            println!("wrote {}", path.display());
        }
        return Ok(());
    }
    let (cfg, kv) = RunConfig::load(flags.config.as_deref(), &flags.overrides())?;
    match command {
        Command::Prepare(_) => print!("{}", commands::prepare(&cfg)?),
        Command::Vectorize(_) => print!("{}", commands::vectorize(&cfg)?),
        Command::Run(_) => {
            let out = commands::run(&cfg, &kv)?;
            println!(
                "{} k={} alpha={} F1={:.4} ({} instances) -> {}",
                out.spec.method,
                out.spec.k,
                out.spec.alpha.map_or("N/A".to_string(), |a| a.to_string()),
                out.result.f1,
                out.result.per_instance.len(),
                cfg.out.display()
            );
        }
        Command::Sweep(_) => {
            let record = commands::sweep(&cfg, &kv)?;
            for (method, grid) in &record.grids {
                println!(
                    "{method}: {} points, best k={} alpha={} validation F1={:.4}",
                    grid.scores.len(),
                    grid.best.k,
                    grid.best.alpha.map_or("N/A".to_string(), |a| a.to_string()),
                    grid.best_f1
                );
            }
            println!("report -> {}", cfg.out.join("report.md").display());
        }
        Command::Report(_) => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
