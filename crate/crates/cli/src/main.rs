use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tweetscope::corpus::{Granularity, InputFormat};
use tweetscope::pipeline::{self, PipelineConfig, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "tweetscope", version, about = "Spatio-temporal analytics for geotagged tweets")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cap on worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and tokenize the input.
    Ingest,
    /// Location x week volume grid, term cloud and case correlation.
    Volume,
    /// Train the sentiment classifier and report held-out metrics.
    SentimentTrain,
    /// Score every record and build positive-ratio grids.
    SentimentScore,
    /// Chained weekly topic models.
    Topics,
    /// Semantic Brand Score of the watchlist per week.
    Sbs,
    /// Summarize outputs already in the bundle.
    Report,
    /// Every stage.
    All,
    /// Print the effective config as TOML.
    PrintConfig,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<InputFormat>,
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    query_terms: Option<PathBuf>,
    /// First day of bucket 0 (YYYY-MM-DD).
    #[arg(long, global = true)]
    epoch: Option<chrono::NaiveDate>,
    #[arg(long, global = true)]
    granularity: Option<Granularity>,
    #[arg(long, global = true)]
    min_count: Option<u64>,
    /// `week,value` series to correlate with weekly volume.
    #[arg(long, global = true)]
    cases: Option<PathBuf>,
    #[arg(short, long = "output", global = true)]
    output: Option<PathBuf>,
    /// Directory of a previously trained sentiment model.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long = "topics-k", global = true)]
    topics_k: Option<usize>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    min_edge_weight: Option<u64>,
    /// Watchlist word; repeat to track several.
    #[arg(long = "watch", global = true)]
    watch: Vec<String>,
    #[arg(long, global = true)]
    by_location: bool,
}

impl Overrides {
    fn apply(self, c: &mut PipelineConfig) {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        set(&mut c.input, self.input);
        set(&mut c.format, self.format);
        set(&mut c.epoch, self.epoch);
        set(&mut c.granularity, self.granularity);
        set(&mut c.min_count, self.min_count);
        set(&mut c.output_dir, self.output);
        set(&mut c.sentiment.train.epochs, self.epochs);
        set(&mut c.topics.k, self.topics_k);
        set(&mut c.topics.iterations, self.iterations);
        set(&mut c.sbs.window, self.window);
        set(&mut c.sbs.min_edge_weight, self.min_edge_weight);
        if let Some(seed) = self.seed {
            c.topics.seed = seed;
            c.sentiment.train.seed = seed;
        }
        for (slot, v) in [
            (&mut c.gazetteer, self.gazetteer),
            (&mut c.stopwords, self.stopwords),
            (&mut c.query_terms, self.query_terms),
            (&mut c.cases, self.cases),
            (&mut c.sentiment.model, self.model),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        if !self.watch.is_empty() {
            c.sbs.watchlist = self.watch;
        }
        if self.by_location {
            c.sbs.by_location = true;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tweetscope: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut config);
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(PipelineError::Config("--threads must be at least 1".into()));
        }
        pipeline::set_threads(n)?;
    }

    let stages = match cli.command {
        Command::PrintConfig => {
            print!("{}", config.to_toml());
            return Ok(());
        }
        Command::All => Stage::all_for(&config),
        Command::Ingest => vec![Stage::Ingest],
        Command::Volume => vec![Stage::Volume],
        Command::SentimentTrain => vec![Stage::SentimentTrain],
        Command::SentimentScore => vec![Stage::SentimentScore],
        Command::Topics => vec![Stage::Topics],
        Command::Sbs => vec![Stage::Sbs],
        Command::Report => vec![Stage::Report],
    };
    let manifest = pipeline::run(&config, &stages)?;
    println!("run {} ({})", manifest.run_id, manifest.stages.join(", "));
    for t in &manifest.timings {
        println!("  {:<16} {:>7} ms", t.stage, t.millis);
    }
    println!(
        "{} files in {}, bundle digest {}",
        manifest.inventory.len(),
        config.output_dir.display(),
        manifest.bundle_digest
    );
    Ok(())
}
