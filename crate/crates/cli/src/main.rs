//! `snapid`: design, simulate, fit and compare snap-fit force surrogates.
//!
//! Exit codes: 0 success, 2 bad flags or input, 3 I/O failure, 4 numerical
//! failure.

mod commands;
mod config;
mod error;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{DoeSource, EvaluateInputs, Figure};
use config::{LambdaChoice, PipelineConfig};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "snapid", version, about = "Surrogate identification for snap-fit assembly force profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags accepted by every command. Flags override the config file, which
/// overrides built-in defaults.
#[derive(Debug, Args)]
struct Common {
    /// Seed for noise, design order, data split and network initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory that receives the command's artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write runs.csv: the 17-run table or a two-level fractional factorial.
    Doe {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with_all = ["factors", "runs"])]
        table1: bool,
        /// JSON list of {name, low, center, high}.
        #[arg(long, requires = "runs")]
        factors: Option<PathBuf>,
        /// Number of runs, a power of two.
        #[arg(long, requires = "factors")]
        runs: Option<usize>,
    },
    /// Simulate force profiles for every run in runs.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        n_points: Option<usize>,
        /// Noise standard deviation relative to each run's force amplitude.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit P-splines per run plus the coefficient-response model.
    FitSpline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Interior knot count.
        #[arg(long)]
        knots: Option<usize>,
        /// Penalty weight, or `gcv`.
        #[arg(long)]
        lambda: Option<LambdaChoice>,
        #[arg(long)]
        split_fraction: Option<f64>,
    },
    /// Train the LSTM surrogate.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        runs: Option<PathBuf>,
        #[command(flatten)]
        net: NetFlags,
    },
    /// Score surrogate predictions against the simulated profiles.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Noise-free reference profiles for the smoothing check.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        spline: Option<PathBuf>,
        #[arg(long)]
        response: Option<PathBuf>,
        #[arg(long)]
        response_model: Option<PathBuf>,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        train_report: Option<PathBuf>,
    },
    /// Draw one SVG overlay per profiles CSV.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Comma-separated titles, one per input.
        #[arg(long, value_delimiter = ',')]
        titles: Vec<String>,
    },
    /// Run every stage on the 17-run table.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        knots: Option<usize>,
        #[arg(long)]
        lambda: Option<LambdaChoice>,
        #[command(flatten)]
        net: NetFlags,
    },
}

#[derive(Debug, Args)]
struct NetFlags {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    split_fraction: Option<f64>,
}

impl NetFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let net = &mut cfg.net;
        net.layers = self.layers.unwrap_or(net.layers);
        net.hidden = self.hidden.unwrap_or(net.hidden);
        net.max_epochs = self.epochs.unwrap_or(net.max_epochs);
        net.learning_rate = self.learning_rate.unwrap_or(net.learning_rate);
        net.split_fraction = self.split_fraction.unwrap_or(net.split_fraction);
    }
}

impl Common {
    fn resolve(&self) -> CliResult<(PipelineConfig, PathBuf)> {
        let mut cfg = PipelineConfig::resolve(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = Some(dir.clone());
        }
        let out = cfg.out_dir();
        Ok((cfg, out))
    }
}

fn or_default(flag: &Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
    flag.clone().unwrap_or_else(|| dir.join(name))
}

/// An explicit path is used as given; otherwise the conventional file in
/// `dir`, if it exists.
fn optional(flag: &Option<PathBuf>, dir: &Path, name: &str) -> Option<PathBuf> {
    flag.clone().or_else(|| Some(dir.join(name)).filter(|p| p.exists()))
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Doe {
            common,
            table1,
            factors,
            runs,
        } => {
            let (cfg, out) = common.resolve()?;
            let source = match (table1, factors, runs) {
                (true, _, _) => DoeSource::Table1,
                (false, Some(path), Some(n_runs)) => DoeSource::Factors {
                    specs: commands::load_factor_specs(&path)?,
                    n_runs,
                },
                _ => return Err(CliError::Usage("doe needs --table1 or --factors <json> --runs <N>".into())),
            };
            commands::run_doe(&source, cfg.seed, &out)
        }
        Command::Simulate {
            common,
            runs,
            n_points,
            noise,
        } => {
            let (mut cfg, out) = common.resolve()?;
            cfg.n_points = n_points.unwrap_or(cfg.n_points);
            cfg.noise_sigma_rel = noise.unwrap_or(cfg.noise_sigma_rel);
            cfg.validate()?;
            commands::run_simulate(&or_default(&runs, &out, commands::RUNS_CSV), &cfg, &out)
        }
        Command::FitSpline {
            common,
            profiles,
            runs,
            knots,
            lambda,
            split_fraction,
        } => {
            let (mut cfg, out) = common.resolve()?;
            cfg.spline.interior_knots = knots.unwrap_or(cfg.spline.interior_knots);
            cfg.spline.lambda = lambda.unwrap_or(cfg.spline.lambda);
            cfg.net.split_fraction = split_fraction.unwrap_or(cfg.net.split_fraction);
            cfg.validate()?;
            commands::run_fit_spline(
                &or_default(&profiles, &out, commands::PROFILES_CSV),
                &or_default(&runs, &out, commands::RUNS_CSV),
                &cfg,
                &out,
            )
        }
        Command::Train {
            common,
            profiles,
            runs,
            net,
        } => {
            let (mut cfg, out) = common.resolve()?;
            net.apply(&mut cfg);
            cfg.validate()?;
            let profiles = or_default(&profiles, &out, commands::PROFILES_CSV);
            // runs.csv normally sits next to the profiles it produced
            let runs = runs.unwrap_or_else(|| {
                profiles
                    .parent()
                    .map_or_else(|| PathBuf::from(commands::RUNS_CSV), |d| d.join(commands::RUNS_CSV))
            });
            commands::run_train(&profiles, &runs, &cfg, &out)
        }
        Command::Evaluate {
            common,
            profiles,
            clean,
            spline,
            response,
            response_model,
            net,
            train_report,
        } => {
            let (_, out) = common.resolve()?;
            let inputs = EvaluateInputs {
                profiles: or_default(&profiles, &out, commands::PROFILES_CSV),
                clean: optional(&clean, &out, commands::CLEAN_PROFILES_CSV),
                spline: optional(&spline, &out, commands::SPLINE_PROFILES_CSV),
                response: optional(&response, &out, commands::RESPONSE_PROFILES_CSV),
                response_model: optional(&response_model, &out, commands::RESPONSE_JSON),
                net: optional(&net, &out, commands::NET_PROFILES_CSV),
                train_report: optional(&train_report, &out, commands::REPORT_JSON),
            };
            commands::run_evaluate(&inputs, &out)
        }
        Command::Plot { common, inputs, titles } => {
            let (_, out) = common.resolve()?;
            if !titles.is_empty() && titles.len() != inputs.len() {
                return Err(CliError::Usage(format!(
                    "{} titles given for {} inputs",
                    titles.len(),
                    inputs.len()
                )));
            }
            let figures: Vec<Figure> = inputs
                .iter()
                .enumerate()
                .map(|(i, input)| {
                    let stem = input
                        .file_stem()
                        .map_or_else(|| format!("figure{i}"), |s| s.to_string_lossy().into_owned());
                    Figure {
                        input: input.clone(),
                        title: titles.get(i).cloned().unwrap_or_else(|| stem.clone()),
                        output: out.join(format!("{stem}.svg")),
                    }
                })
                .collect();
            commands::run_plot(&figures)
        }
        Command::Pipeline {
            common,
            n_points,
            noise,
            knots,
            lambda,
            net,
        } => {
            let (mut cfg, out) = common.resolve()?;
            cfg.n_points = n_points.unwrap_or(cfg.n_points);
            cfg.noise_sigma_rel = noise.unwrap_or(cfg.noise_sigma_rel);
            cfg.spline.interior_knots = knots.unwrap_or(cfg.spline.interior_knots);
            cfg.spline.lambda = lambda.unwrap_or(cfg.spline.lambda);
            net.apply(&mut cfg);
            commands::run_pipeline(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
