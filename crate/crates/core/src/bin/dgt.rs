use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dgt::corpus::{generate_synthetic, parse_jsonl, SyntheticConfig};
use dgt::eval::{
    evaluate_model, load_checkpoint, model_gradcheck, predict_file, save_checkpoint,
    train_with_progress, GradCheckOptions, TrainConfig,
};
use dgt::models::ModelKind;
use dgt::Error;

#[derive(Parser)]
#[command(name = "dgt", version, about = "Dependency-graph event trigger tagger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/dev/test corpus.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_dev: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        #[arg(long, default_value_t = 0.5)]
        ambiguity: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train a model and save the checkpoint with the best dev F1.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a labeled file.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Print the report as a single JSON object.
        #[arg(long)]
        json: bool,
    },
    /// Add predicted triggers to every line of a JSON Lines file.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on a fixed sentence.
    Gradcheck {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gcn,
    Moganed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: Kind,
    #[arg(long, value_enum)]
    gtn: Switch,
    /// Number of stacked layers (gcn).
    #[arg(long, conflicts_with = "t")]
    k: Option<usize>,
    /// Highest hop order (moganed).
    #[arg(long)]
    t: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self) -> dgt::Result<(ModelKind, bool)> {
        let kind = match (self.model, self.k, self.t) {
            (Kind::Gcn, k, None) => ModelKind::Gcn { layers: k.unwrap_or(1) },
            (Kind::Moganed, None, t) => ModelKind::Moganed { hops: t.unwrap_or(3) },
            (Kind::Gcn, _, Some(_)) => {
                return Err(Error::Config("--t applies to moganed; use --k for gcn".into()))
            }
            (Kind::Moganed, Some(_), _) => {
                return Err(Error::Config("--k applies to gcn; use --t for moganed".into()))
            }
        };
        Ok((kind, matches!(self.gtn, Switch::On)))
    }
}

fn run(command: Command) -> dgt::Result<ExitCode> {
    match command {
        Command::Gen { out, n_train, n_dev, n_test, ambiguity, seed } => {
            let config = SyntheticConfig { n_train, n_dev, n_test, ambiguity, seed };
            let corpus = generate_synthetic(&config)?;
            corpus.write(&out)?;
            for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
                println!(
                    "{name}: {} sentences, {} ambiguous pairs",
                    split.examples.len(),
                    split.pairs.len()
                );
            }
        }
        Command::Train { model, train, dev, epochs, seed, out } => {
            let (kind, gtn) = model.resolve()?;
            let mut config = TrainConfig::new(kind, gtn);
            config.epochs = epochs;
            config.seed = seed;
            config.validate()?;
            let train = parse_jsonl(&train)?;
            let dev = parse_jsonl(&dev)?;
            let outcome = train_with_progress(&config, &train, &dev, |log| {
                eprintln!(
                    "epoch {:>3}  loss {:.5}  dev P {:.4}  R {:.4}  F1 {:.4}",
                    log.epoch, log.mean_loss, log.dev.precision, log.dev.recall, log.dev.f1
                );
            })?;
            save_checkpoint(&outcome.model, &outcome.vocabs, &out)?;
            println!(
                "best dev F1 {:.4} at epoch {}; saved {}",
                outcome.best().dev.f1,
                outcome.best_epoch,
                out.display()
            );
        }
        Command::Eval { ckpt, data, json } => {
            let checkpoint = load_checkpoint(&ckpt)?;
            let examples = parse_jsonl(&data)?;
            let report = evaluate_model(&checkpoint.model, &checkpoint.vocabs, &examples)?;
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                print!("{}", report.table());
            }
        }
        Command::Predict { ckpt, input, out } => {
            let checkpoint = load_checkpoint(&ckpt)?;
            let n = predict_file(&checkpoint, &input, &out)?;
            eprintln!("annotated {n} sentences into {}", out.display());
        }
        Command::Gradcheck { model, corrupt_gradient } => {
            let (kind, gtn) = model.resolve()?;
            let options = GradCheckOptions { corrupt: corrupt_gradient, ..GradCheckOptions::default() };
            let report = model_gradcheck(kind, gtn, &options)?;
            for p in &report.params {
                let verdict = if p.max_rel_err < report.tolerance { "ok" } else { "FAIL" };
                println!("{:<28} {:>6} scalars  max rel err {:.3e}  {verdict}", p.name, p.scalars, p.max_rel_err);
            }
            if !report.passed() {
                eprintln!("gradient check failed (tolerance {:e})", report.tolerance);
                return Ok(ExitCode::from(2));
            }
            println!("all parameters within {:e}", report.tolerance);
        }
    }
    Ok(ExitCode::SUCCESS)
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
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
