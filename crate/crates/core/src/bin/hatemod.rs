use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hatemod::dataset::{self, corpus_stats, stratified_split, unify, write_splits, SplitSpec};
use hatemod::decision::{FailPolicy, Pipeline};
use hatemod::feedback::{export_training_batch, FeedbackFilter, SqliteFeedbackStore};
use hatemod::metrics::evaluate;
use hatemod::rules::CompiledRuleSet;
use hatemod::service::{self, build_scorer, AppState, ConfigLayer, ServiceConfig, VerdictView};

#[derive(Parser)]
#[command(name = "hatemod", version, about = "Hate-speech moderation pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Exported model directory; the bundled reference scorer is used otherwise.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// fail_open_allow | fail_closed_block
    #[arg(long, global = true)]
    fail_policy: Option<FailPolicy>,
    #[arg(long, global = true)]
    feedback_db: Option<PathBuf>,
    #[arg(long, global = true)]
    port: Option<u16>,
}

#[derive(Subcommand)]
enum Command {
    /// Print one JSON verdict per input.
    Moderate {
        text: Option<String>,
        /// One text per line; blank lines are skipped.
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
    },
    /// Evaluate the pipeline on a labelled CSV and print the report.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Stratified train/val/test split.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        seed: u64,
        /// train,val,test
        #[arg(long, value_delimiter = ',', default_values_t = [0.925, 0.057, 0.018])]
        fractions: Vec<f64>,
        #[arg(long, default_value = "splits")]
        out_dir: PathBuf,
    },
    /// Merge corpora, normalize, filter and dedup; prints statistics as JSON.
    Unify {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
    Feedback {
        #[command(subcommand)]
        command: FeedbackCommand,
    },
    /// Run the HTTP service. SIGHUP reloads the rules file.
    Serve,
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Compile a rules file, reporting the first error.
    Check { path: PathBuf },
}

#[derive(Subcommand)]
enum FeedbackCommand {
    /// Write reviewer labels as a training CSV.
    Export {
        #[arg(long)]
        disagreements_only: bool,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl GlobalOpts {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            port: self.port,
            rules_path: self.rules.clone(),
            model_path: self.model.clone(),
            threshold: self.threshold,
            fail_policy: self.fail_policy,
            feedback_store_path: self.feedback_db.clone(),
        }
    }

    /// Flags over environment over config file.
    fn merged(&self) -> Result<ConfigLayer> {
        let env = ConfigLayer::from_env(std::env::vars())?;
        let file = match &self.config {
            Some(p) => ConfigLayer::from_toml_file(p)?,
            None => ConfigLayer::default(),
        };
        Ok(self.layer().over(env).over(file))
    }

    fn resolve(&self) -> Result<ServiceConfig> {
        Ok(ServiceConfig::resolve(self.merged()?, ConfigLayer::default(), ConfigLayer::default())?)
    }
}

fn pipeline(cfg: &ServiceConfig) -> Result<Pipeline> {
    let rules = CompiledRuleSet::from_file(&cfg.rules_path)?;
    let scorer = build_scorer(cfg)?;
    Ok(Pipeline::new(cfg.pipeline_config(), Arc::new(rules), scorer))
}

fn moderate(cfg: &ServiceConfig, text: Option<String>, file: Option<PathBuf>) -> Result<()> {
    let pipeline = pipeline(cfg)?;
    let texts: Vec<String> = match (text, file) {
        (Some(t), None) => vec![t],
        (None, Some(path)) => {
            let f = std::fs::File::open(&path).with_context(|| path.display().to_string())?;
            std::io::BufReader::new(f)
                .lines()
                .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                .collect::<std::io::Result<_>>()?
        }
        _ => bail!("give a text or --file"),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0usize;
    for t in texts {
        if t.trim().is_empty() {
            bail!("text must not be empty");
        }
        let v = pipeline.decide(&t);
        if let Some(e) = &v.error {
            eprintln!("scorer error: {e}");
            failures += 1;
        }
        serde_json::to_writer(&mut out, &VerdictView::from_verdict(&v, None))?;
        writeln!(out)?;
    }
    if failures > 0 {
        bail!("{failures} input(s) were decided by the fail policy");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Moderate { text, file } => moderate(&g.resolve()?, text, file),
        Command::Eval { dataset } => {
            let cfg = g.resolve()?;
            let samples = dataset::ingest_csv(&dataset)?;
            let report = evaluate(&pipeline(&cfg)?, &samples)?;
            print!("{}", report.to_kv());
            Ok(())
        }
        Command::Split {
            dataset,
            seed,
            fractions,
            out_dir,
        } => {
            let [train, val, test] = fractions[..] else {
                bail!("--fractions takes exactly three values, got {}", fractions.len());
            };
            let samples = dataset::ingest_csv(&dataset)?;
            let spec = SplitSpec::new(train, val, test, seed)?;
            let splits = stratified_split(&samples, &spec)?;
            let manifest = write_splits(&out_dir, &samples, &splits, &spec)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(())
        }
        Command::Unify { inputs, out } => {
            let corpora = inputs.iter().map(dataset::ingest_csv).collect::<Result<Vec<_>, _>>()?;
            let unified = unify(&corpora);
            dataset::write_csv_file(&out, &unified.samples)?;
            let stats = corpus_stats(&unified.samples);
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "report": unified.report, "stats": stats }))?
            );
            Ok(())
        }
        Command::Rules {
            command: RulesCommand::Check { path },
        } => {
            let rules = CompiledRuleSet::from_file(&path)?;
            println!("ok: {} rules, version {}", rules.len(), rules.version());
            Ok(())
        }
        Command::Feedback {
            command: FeedbackCommand::Export { disagreements_only, out },
        } => {
            let db = g.merged()?.feedback_store_path.unwrap_or_else(|| service::DEFAULT_FEEDBACK_DB.into());
            if !Path::new(&db).exists() {
                bail!("feedback store {} does not exist", db.display());
            }
            let store = SqliteFeedbackStore::open(&db)?;
            let filter = if disagreements_only {
                FeedbackFilter::disagreements()
            } else {
                FeedbackFilter::default()
            };
            let batch = export_training_batch(&store, &filter)?;
            match out {
                Some(p) => dataset::write_csv_file(&p, &batch)?,
                None => dataset::write_csv(std::io::stdout().lock(), &batch)?,
            }
            Ok(())
        }
        Command::Serve => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let cfg = g.resolve()?;
            let state = Arc::new(AppState::from_config(&cfg)?);
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, cfg.port))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
