use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use outbreak_cli::commands;
use outbreak_cli::config::parse_assignment;
use outbreak_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "outbreak", version, about = "Sentiment and emotion classification for epidemic surveillance text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic bilingual corpus to <output>/fixture.jsonl
    GenerateFixture {
        #[command(flatten)]
        common: Common,
        /// Number of samples
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        fixture_seed: Option<i64>,
        /// Skewed class mix with overlapping topic words
        #[arg(long)]
        imbalanced: bool,
    },
    /// Label sentiment and emotion; writes labeled.jsonl and distribution files
    Label {
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate over the seeded 70/30 splits
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a persisted split model on a labeled corpus
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// A split directory written by `train`
        #[arg(long)]
        model_dir: PathBuf,
    },
    /// One-vs-rest vs multiclass weighted precision/recall table
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy summary across every run in the output directory
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags take precedence
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set neural.epochs=5
    #[arg(long = "set", value_parser = parse_assignment)]
    set: Vec<(String, toml::Value)>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    resources: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    overrides: Option<PathBuf>,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long)]
    precision: Option<String>,
    /// Comma-separated split seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<i64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    stratify: bool,
    #[arg(long)]
    jobs: Option<i64>,
}

impl Common {
    fn overrides(&self) -> Vec<(String, toml::Value)> {
        use toml::Value as V;
        let path = |p: &PathBuf| V::String(p.display().to_string());
        let mut kv: Vec<(String, V)> = Vec::new();
        let mut put = |k: &str, v: Option<V>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        };
        put("task", self.task.clone().map(V::String));
        put("language", self.language.clone().map(V::String));
        put("model", self.model.clone().map(V::String));
        put("strategy", self.strategy.clone().map(V::String));
        put("corpus", self.corpus.as_ref().map(path));
        put("resources", self.resources.as_ref().map(path));
        put("vectors", self.vectors.as_ref().map(path));
        put("overrides", self.overrides.as_ref().map(path));
        put("output", self.output.as_ref().map(path));
        put("precision", self.precision.clone().map(V::String));
        put("split.seeds", (!self.seeds.is_empty()).then(|| V::Array(self.seeds.iter().map(|&s| V::Integer(s)).collect())));
        put("split.train_fraction", self.train_fraction.map(V::Float));
        put("split.stratify", self.stratify.then_some(V::Boolean(true)));
        put("jobs", self.jobs.map(V::Integer));
        kv.extend(self.set.iter().cloned());
        kv
    }

    fn resolve(&self, extra: Vec<(String, toml::Value)>) -> Result<RunConfig, CliError> {
        let mut kv = self.overrides();
        kv.extend(extra);
        let cfg = RunConfig::resolve(self.config.as_deref(), &kv)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateFixture {
            common,
            n,
            fixture_seed,
            imbalanced,
        } => {
            let mut extra = Vec::new();
            if imbalanced {
                let imb = outbreak_text::fixture::FixtureConfig::imbalanced();
                extra.push(("fixture.sentiment_weights".to_string(), toml::Value::try_from(imb.sentiment_weights).expect("array")));
                extra.push(("fixture.overlap".to_string(), toml::Value::Float(imb.overlap)));
            }
            if let Some(n) = n {
                extra.push(("fixture.n".to_string(), toml::Value::Integer(n)));
            }
            if let Some(s) = fixture_seed {
                extra.push(("fixture.seed".to_string(), toml::Value::Integer(s)));
            }
            let cfg = common.resolve(extra)?;
            for p in commands::cmd_generate_fixture(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Label { common } => {
            let out = commands::cmd_label(&common.resolve(Vec::new())?)?;
            for p in out.paths {
                println!("{}", p.display());
            }
            println!("unresolved emotions: {}", out.unresolved);
        }
        Command::Train { common } => {
            for run in commands::cmd_train(&common.resolve(Vec::new())?)? {
                println!("{}\taccuracy {:.4}", run.name, run.report.accuracy);
            }
        }
        Command::Evaluate { common, model_dir } => {
            let report = commands::cmd_evaluate(&common.resolve(Vec::new())?, &model_dir)?;
            print!("{}", report.to_markdown());
        }
        Command::Compare { common } => {
            let cfg = common.resolve(Vec::new())?;
            for (lang, rows) in commands::cmd_compare(&cfg)? {
                println!("{lang}");
                print!("{}", outbreak_text::eval::comparison_markdown(&rows));
            }
        }
        Command::Report { common } => {
            println!("{}", commands::cmd_report(&common.resolve(Vec::new())?)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
