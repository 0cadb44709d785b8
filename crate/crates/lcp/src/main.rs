use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lcp::error::{LcpError, Result};
use lcp::pipeline::{self, PredictInput};
use lcp::RunConfig;

/// Lexical complexity prediction: features, training, prediction and
/// evaluation over CompLex-format datasets.
#[derive(Debug, Parser)]
#[command(name = "lcp", version)]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides any setting, e.g. `--set model.epochs=5`. Repeatable; later
    /// flags win.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the configured splits and write normalized copies plus rejects.
    Ingest,
    /// Compute the hand-crafted feature matrices and fit the n-gram vectorizer.
    Features,
    /// Fit a model and write its directory (checkpoint, vectorizer, graph).
    Train {
        /// nn, ridge, logistic or ensemble; overrides `run.kind`.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Score a dataset with a trained model.
    Predict {
        /// Configured split to score.
        #[arg(long, default_value = "test", conflicts_with = "input")]
        split: String,
        /// Dataset file to score instead of a configured split.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Model directory (default `<out_dir>/model`).
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Prediction file (default `<out_dir>/predictions/<name>.tsv`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold labels.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Labeled dataset; defaults to the configured split.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "trial", conflicts_with = "gold")]
        split: String,
        /// Second prediction file for a paired comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Print a saved JSON report as a table.
    Report { path: PathBuf },
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for s in &cli.set {
        let (k, v) = s.split_once('=').ok_or_else(|| LcpError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        out.push((k.trim().to_string(), v.to_string()));
    }
    if let Command::Train { kind: Some(k) } = &cli.command {
        out.push(("run.kind".into(), k.clone()));
    }
    if let Some(seed) = cli.seed {
        out.push(("run.seed".into(), seed.to_string()));
    }
    if let Some(dir) = &cli.out_dir {
        out.push(("paths.out_dir".into(), dir.display().to_string()));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides(&cli)?)?;
    print!("{}", pipeline::echo(&cfg));
    match cli.command {
        Command::Ingest => {
            for (split, ok, rejected) in pipeline::cmd_ingest(&cfg)?.splits {
                println!("{split}: {ok} entries, {rejected} rejected");
            }
        }
        Command::Features => {
            let s = pipeline::cmd_features(&cfg)?;
            for (split, rows) in s.rows {
                println!("{split}: {rows} rows x {} columns", s.columns);
            }
        }
        Command::Train { .. } => {
            let s = pipeline::cmd_train(&cfg)?;
            if let Some(h) = &s.history {
                for r in &h.epochs {
                    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                    println!("epoch {:>3}  loss {:.6}  trial pearson {}  mae {}", r.epoch, r.train_loss, opt(r.trial_pearson), opt(r.trial_mae));
                }
                println!("kept epoch {}", h.best_epoch);
            }
            for (l, r) in &s.lambda_scores {
                println!("lambda {l}: trial pearson {}", r.map_or("undefined".to_string(), |r| format!("{r:.4}")));
            }
            if let Some(l) = s.lambda {
                println!("selected lambda {l}");
            }
            println!("{} model written to {}", s.kind.as_str(), s.model_dir.display());
        }
        Command::Predict { split, input, model_dir, output } => {
            let model_dir = model_dir.unwrap_or_else(|| pipeline::model_dir(&cfg));
            let input = input.map_or(PredictInput::Split(split), PredictInput::File);
            let s = pipeline::cmd_predict(&cfg, &model_dir, &input, output.as_deref())?;
            println!("{} predictions written to {}", s.predicted, s.output.display());
            if !s.errors.is_empty() {
                for (id, reason) in &s.errors {
                    eprintln!("{id}: {reason}");
                }
                return Err(LcpError::Data(format!("{} entries could not be scored", s.errors.len())));
            }
        }
        Command::Evaluate { predictions, gold, split, compare } => {
            let gold = match gold {
                Some(g) => g,
                None => cfg.split_path(&split)?.to_path_buf(),
            };
            let s = pipeline::cmd_evaluate(&cfg, &predictions, &gold, compare.as_deref())?;
            print!("{}", s.table);
            println!("report written to {}", s.json_path.display());
        }
        Command::Report { path } => print!("{}", pipeline::cmd_report(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
