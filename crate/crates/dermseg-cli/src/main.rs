use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dermseg_cli::commands::{cmd_evaluate, cmd_pipeline, cmd_segment, cmd_train};
use dermseg_cli::config::{default_config_json, load_config};
use dermseg_cli::CliError;

/// Skin lesion segmentation for dermoscopic images.
#[derive(Parser)]
#[command(name = "dermseg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. --set segment.kmeans.k=7 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the lesion color model from images with ground-truth masks.
    Train {
        /// Dataset directory (*.jpg plus <id>_segmentation.png masks).
        #[arg(long)]
        data: PathBuf,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Segment every image in a directory using a trained model.
    Segment {
        #[arg(long)]
        data: PathBuf,
        /// Trained model file from `train`.
        #[arg(long)]
        model: PathBuf,
        /// Output directory for masks, overlays, and the run manifest.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score predicted masks against ground-truth masks.
    Evaluate {
        /// Directory of <id>_pred.png predictions.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of <id>_segmentation.png ground truth.
        #[arg(long)]
        gt: PathBuf,
        /// Output directory for metrics.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, segment, and evaluate in one run.
    Pipeline {
        /// Training dataset directory.
        #[arg(long)]
        train: PathBuf,
        /// Evaluation dataset directory.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Inspect configuration.
    Config {
        /// Print the built-in defaults as JSON.
        #[arg(long)]
        print_defaults: bool,
    },
}

fn run() -> Result<usize, CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // let clap render help/version itself; everything else is usage
        if e.use_stderr() {
            CliError::Usage(e.to_string())
        } else {
            print!("{e}");
            CliError::Usage(String::new())
        }
    })?;

    match cli.command {
        Command::Train { data, out, config } => {
            let config = load_config(config.config.as_deref(), &config.set)?;
            cmd_train(&data, &out, &config)?;
            Ok(0)
        }
        Command::Segment {
            data,
            model,
            out,
            config,
        } => {
            let config = load_config(config.config.as_deref(), &config.set)?;
            let outcome = cmd_segment(&data, &model, &out, &config)?;
            Ok(outcome.failures)
        }
        Command::Evaluate { pred, gt, out } => {
            cmd_evaluate(&pred, &gt, &out)?;
            Ok(0)
        }
        Command::Pipeline {
            train,
            eval,
            out,
            config,
        } => {
            let config = load_config(config.config.as_deref(), &config.set)?;
            let outcome = cmd_pipeline(&train, &eval, &out, &config)?;
            Ok(outcome.failures)
        }
        Command::Config { print_defaults } => {
            if print_defaults {
                println!("{}", default_config_json());
                Ok(0)
            } else {
                Err(CliError::Usage("config requires --print-defaults".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::from(0),
        Ok(_failures) => ExitCode::from(3),
        Err(e) => {
            let code = match e {
                CliError::Usage(ref msg) => {
                    if !msg.is_empty() {
                        eprintln!("{e}");
                    }
                    1
                }
                _ => {
                    eprintln!("{e}");
                    2
                }
            };
            ExitCode::from(code)
        }
    }
}
