//! The pipeline stages. Each returns the one-line summary it prints.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snapid_core::doe::{
    encode, fractional_factorial, read_runs_csv, table1_factor_specs, table1_runs, write_design_csv, write_runs_csv,
    CodedRun, FactorSpec, RunConfig, FACTOR_NAMES,
};
use snapid_core::eval::{compare_methods, MetricsReport, Scope, SurrogateOutput};
use snapid_core::oracle::{batch_simulate, read_profiles_csv, write_profiles_csv, ForceProfile, OracleParams};
use snapid_core::pspline::{
    default_lambda_grid, fit, fit_response, select_lambda_pooled, to_piecewise, CoeffResponseModel, SplineModel,
};
use snapid_core::seqnet::{init_with, split_indices, train, NetConfig, TrainReport};

use crate::config::{LambdaChoice, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::plot::render_svg;

pub const RUNS_CSV: &str = "runs.csv";
pub const PROFILES_CSV: &str = "profiles.csv";
pub const CLEAN_PROFILES_CSV: &str = "profiles_clean.csv";
pub const SPLINE_DIR: &str = "spline_models";
pub const PIECEWISE_DIR: &str = "piecewise";
pub const RESPONSE_JSON: &str = "response_model.json";
pub const SPLINE_PROFILES_CSV: &str = "spline_profiles.csv";
pub const RESPONSE_PROFILES_CSV: &str = "response_profiles.csv";
pub const NET_JSON: &str = "net_model.json";
pub const REPORT_JSON: &str = "train_report.json";
pub const NET_PROFILES_CSV: &str = "net_profiles.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const NOISE_JSON: &str = "noise_check.json";
pub const FIGURES_DIR: &str = "figures";

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e.into()))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(snapid_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

pub fn read_profiles(path: &Path) -> CliResult<Vec<ForceProfile>> {
    let profiles = read_profiles_csv(open(path)?).map_err(|e| CliError::input(path, e))?;
    if profiles.is_empty() {
        return Err(CliError::Usage(format!("{} contains no profiles", path.display())));
    }
    Ok(profiles)
}

fn write_profiles(path: &Path, profiles: &[ForceProfile]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_profiles_csv(profiles, &mut buf)?;
    write_file(path, buf)
}

pub fn read_runs(path: &Path) -> CliResult<Vec<RunConfig>> {
    let runs = read_runs_csv(open(path)?).map_err(|e| CliError::input(path, e))?;
    if runs.is_empty() {
        return Err(CliError::Usage(format!("{} contains no runs", path.display())));
    }
    Ok(runs)
}

/// Run ids are used as file names; anything unusual becomes `_`.
fn file_stem_for(run_id: &str) -> String {
    run_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Coded factor settings for each profile, looked up by run id.
fn coded_for(profiles: &[ForceProfile], runs: &[RunConfig], runs_path: &Path) -> CliResult<Vec<CodedRun>> {
    let specs = table1_factor_specs();
    profiles
        .iter()
        .map(|p| {
            let run = runs.iter().find(|r| r.run_id == p.run_id).ok_or_else(|| {
                CliError::Usage(format!("run `{}` of the profiles is missing from {}", p.run_id, runs_path.display()))
            })?;
            encode(run, &specs).map_err(|e| CliError::input(runs_path, e))
        })
        .collect()
}

fn check_shared_grid(profiles: &[ForceProfile], path: &Path) -> CliResult<()> {
    let first = &profiles[0].displacement;
    if let Some(p) = profiles.iter().find(|p| &p.displacement != first) {
        return Err(CliError::Usage(format!(
            "{}: run `{}` is sampled on a different displacement grid",
            path.display(),
            p.run_id
        )));
    }
    Ok(())
}

pub enum DoeSource {
    Table1,
    Factors { specs: Vec<FactorSpec>, n_runs: usize },
}

pub fn load_factor_specs(path: &Path) -> CliResult<Vec<FactorSpec>> {
    let specs: Vec<FactorSpec> = read_json(path)?;
    for s in &specs {
        s.validate().map_err(|e| CliError::input(path, e))?;
    }
    Ok(specs)
}

pub fn run_doe(source: &DoeSource, seed: u64, out_dir: &Path) -> CliResult<String> {
    let path = out_dir.join(RUNS_CSV);
    let mut buf = Vec::new();
    let n = match source {
        DoeSource::Table1 => {
            let runs = table1_runs();
            write_runs_csv(&runs, &mut buf)?;
            runs.len()
        }
        DoeSource::Factors { specs, n_runs } => {
            let design = fractional_factorial(specs, *n_runs, seed)?;
            write_design_csv(&design, specs, &mut buf)?;
            design.len()
        }
    };
    write_file(&path, buf)?;
    Ok(format!("doe: wrote {n} runs to {}", path.display()))
}

pub fn run_simulate(runs_path: &Path, cfg: &PipelineConfig, out_dir: &Path) -> CliResult<String> {
    let runs = read_runs(runs_path)?;
    let oracle = OracleParams {
        noise_sigma_rel: cfg.noise_sigma_rel,
        seed: cfg.seed,
        ..OracleParams::default()
    };
    let noisy = batch_simulate(&runs, cfg.n_points, &oracle)?;
    let clean = batch_simulate(
        &runs,
        cfg.n_points,
        &OracleParams {
            noise_sigma_rel: 0.0,
            ..oracle
        },
    )?;
    write_profiles(&out_dir.join(PROFILES_CSV), &noisy)?;
    write_profiles(&out_dir.join(CLEAN_PROFILES_CSV), &clean)?;
    Ok(format!(
        "simulate: {} profiles x {} points, mean peak force {:.4}, noise {} of amplitude",
        noisy.len(),
        cfg.n_points,
        mean(clean.iter().map(ForceProfile::peak)),
        cfg.noise_sigma_rel
    ))
}

/// response_model.json: the fitted model plus the runs it was fitted on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseModelFile {
    #[serde(flatten)]
    pub model: CoeffResponseModel,
    pub train_run_ids: Vec<String>,
    pub test_run_ids: Vec<String>,
}

fn evaluated(model: &SplineModel, like: &ForceProfile) -> CliResult<ForceProfile> {
    Ok(ForceProfile {
        run_id: like.run_id.clone(),
        displacement: like.displacement.clone(),
        force: model.eval_many(&like.displacement)?,
    })
}

pub fn run_fit_spline(profiles_path: &Path, runs_path: &Path, cfg: &PipelineConfig, out_dir: &Path) -> CliResult<String> {
    let profiles = read_profiles(profiles_path)?;
    let runs = read_runs(runs_path)?;
    let coded = coded_for(&profiles, &runs, runs_path)?;
    check_shared_grid(&profiles, profiles_path)?;

    let knots = cfg.spline.interior_knots;
    let lambda = match cfg.spline.lambda {
        LambdaChoice::Fixed(v) => v,
        LambdaChoice::Gcv => select_lambda_pooled(&profiles, knots, &default_lambda_grid())?,
    };
    let models = profiles
        .iter()
        .map(|p| fit(p, knots, lambda))
        .collect::<snapid_core::Result<Vec<_>>>()?;

    let mut reconstructions = Vec::with_capacity(models.len());
    for (p, m) in profiles.iter().zip(&models) {
        let stem = file_stem_for(&p.run_id);
        write_file(&out_dir.join(SPLINE_DIR).join(format!("{stem}.json")), to_json(m)?)?;
        write_file(&out_dir.join(PIECEWISE_DIR).join(format!("{stem}.json")), to_json(&to_piecewise(m)?)?)?;
        reconstructions.push(evaluated(m, p)?);
    }

    let (train_idx, test_idx) = split_indices(profiles.len(), cfg.net.split_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| coded[i].clone()).collect::<Vec<_>>();
    let train_models: Vec<_> = train_idx.iter().map(|&i| models[i].clone()).collect();
    let names: Vec<String> = FACTOR_NAMES.iter().map(|s| s.to_string()).collect();
    let crm = fit_response(&pick(&train_idx), &train_models, &names)?;
    let predictions = profiles
        .iter()
        .zip(&coded)
        .map(|(p, run)| evaluated(&crm.predict_spline(run)?, p))
        .collect::<CliResult<Vec<_>>>()?;

    let ids = |idx: &[usize]| idx.iter().map(|&i| profiles[i].run_id.clone()).collect::<Vec<_>>();
    let file = ResponseModelFile {
        model: crm,
        train_run_ids: ids(&train_idx),
        test_run_ids: ids(&test_idx),
    };
    write_file(&out_dir.join(RESPONSE_JSON), to_json(&file)?)?;
    write_profiles(&out_dir.join(SPLINE_PROFILES_CSV), &reconstructions)?;
    write_profiles(&out_dir.join(RESPONSE_PROFILES_CSV), &predictions)?;

    let recon_mae = mean(
        reconstructions
            .iter()
            .zip(&profiles)
            .map(|(r, p)| snapid_core::eval::mae(r, p).unwrap_or(f64::NAN)),
    );
    let test_mae = mean(
        test_idx
            .iter()
            .map(|&i| snapid_core::eval::mae(&predictions[i], &profiles[i]).unwrap_or(f64::NAN)),
    );
    Ok(format!(
        "fit-spline: {} runs, {} interior knots, lambda {lambda}, reconstruction MAE {recon_mae:.4}, held-out response MAE {test_mae:.4}",
        profiles.len(),
        knots
    ))
}

pub fn run_train(profiles_path: &Path, runs_path: &Path, cfg: &PipelineConfig, out_dir: &Path) -> CliResult<String> {
    let profiles = read_profiles(profiles_path)?;
    let runs = read_runs(runs_path)?;
    let coded = coded_for(&profiles, &runs, runs_path)?;
    check_shared_grid(&profiles, profiles_path)?;

    let net = NetConfig {
        layers: cfg.net.layers,
        hidden: cfg.net.hidden,
        head_out: profiles[0].len(),
    };
    let initial = init_with(net, cfg.seed)?;
    let dataset: Vec<_> = coded.iter().cloned().zip(profiles.iter().cloned()).collect();
    let (model, report) = train(&initial, &dataset, &cfg.net.train_config(cfg.seed))?;

    let predictions = coded
        .iter()
        .zip(&profiles)
        .map(|(run, p)| {
            let mut pred = model.forward(run)?;
            pred.displacement = p.displacement.clone();
            Ok(pred)
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_file(&out_dir.join(NET_JSON), model.to_json()? + "\n")?;
    write_file(&out_dir.join(REPORT_JSON), to_json(&report)?)?;
    write_profiles(&out_dir.join(NET_PROFILES_CSV), &predictions)?;
    Ok(format!(
        "train: {}/{} split, {} epochs{}, final train loss {:.3e}, held-out MAE {:.4}",
        report.n_train,
        report.n_test,
        report.epochs_run,
        if report.stopped_early { " (early stop)" } else { "" },
        report.final_train_loss,
        report.test_mae
    ))
}

/// Inputs of `evaluate`; absent surrogate files are skipped.
#[derive(Debug, Clone, Default)]
pub struct EvaluateInputs {
    pub profiles: PathBuf,
    pub clean: Option<PathBuf>,
    pub spline: Option<PathBuf>,
    pub response: Option<PathBuf>,
    pub response_model: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub train_report: Option<PathBuf>,
}

impl EvaluateInputs {
    /// Every input at its conventional name in `dir`, if present.
    pub fn in_dir(dir: &Path) -> Self {
        let found = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        EvaluateInputs {
            profiles: dir.join(PROFILES_CSV),
            clean: found(CLEAN_PROFILES_CSV),
            spline: found(SPLINE_PROFILES_CSV),
            response: found(RESPONSE_PROFILES_CSV),
            response_model: found(RESPONSE_JSON),
            net: found(NET_PROFILES_CSV),
            train_report: found(REPORT_JSON),
        }
    }
}

fn scopes_for(truth: &[ForceProfile], train_ids: &[String], test_ids: &[String], source: &Path) -> CliResult<Vec<Scope>> {
    truth
        .iter()
        .map(|p| {
            if train_ids.contains(&p.run_id) {
                Ok(Scope::Train)
            } else if test_ids.contains(&p.run_id) {
                Ok(Scope::Test)
            } else {
                Err(CliError::Usage(format!(
                    "run `{}` is in neither split recorded in {}",
                    p.run_id,
                    source.display()
                )))
            }
        })
        .collect()
}

/// Spline smoothing against the noise it is meant to remove.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseCheck {
    pub n_profiles: usize,
    /// Mean per-profile MAE of the noisy simulation to the noise-free one.
    pub data_mae_to_clean: f64,
    /// Mean per-profile MAE of the spline reconstructions to the noise-free one.
    pub spline_mae_to_clean: f64,
    pub spline_reduces_noise: bool,
}

pub fn run_evaluate(inputs: &EvaluateInputs, out_dir: &Path) -> CliResult<String> {
    let truth = read_profiles(&inputs.profiles)?;
    let mut outputs = Vec::new();
    if let Some(path) = &inputs.spline {
        outputs.push(SurrogateOutput {
            method: "spline".into(),
            profiles: read_profiles(path)?,
            scopes: None,
        });
    }
    if let Some(path) = &inputs.response {
        let scopes = match &inputs.response_model {
            Some(m) => {
                let file: ResponseModelFile = read_json(m)?;
                Some(scopes_for(&truth, &file.train_run_ids, &file.test_run_ids, m)?)
            }
            None => None,
        };
        outputs.push(SurrogateOutput {
            method: "spline_response".into(),
            profiles: read_profiles(path)?,
            scopes,
        });
    }
    if let Some(path) = &inputs.net {
        let scopes = match &inputs.train_report {
            Some(r) => {
                let report: TrainReport = read_json(r)?;
                Some(scopes_for(&truth, &report.train_run_ids, &report.test_run_ids, r)?)
            }
            None => None,
        };
        outputs.push(SurrogateOutput {
            method: "lstm".into(),
            profiles: read_profiles(path)?,
            scopes,
        });
    }
    if outputs.is_empty() {
        return Err(CliError::Usage("no surrogate predictions to evaluate".into()));
    }
    let report = compare_methods(&truth, &outputs)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out_dir.join(METRICS_CSV), csv)?;
    write_file(&out_dir.join(METRICS_JSON), report.to_json()? + "\n")?;

    if let (Some(clean_path), Some(spline)) = (&inputs.clean, outputs.iter().find(|o| o.method == "spline")) {
        let clean = read_profiles(clean_path)?;
        let against_clean = compare_methods(
            &clean,
            &[
                SurrogateOutput {
                    method: "data".into(),
                    profiles: truth.clone(),
                    scopes: None,
                },
                SurrogateOutput {
                    method: "spline".into(),
                    profiles: spline.profiles.clone(),
                    scopes: None,
                },
            ],
        )?;
        let data = against_clean.row("data", Scope::All).map_or(f64::NAN, |r| r.mae);
        let fitted = against_clean.row("spline", Scope::All).map_or(f64::NAN, |r| r.mae);
        let check = NoiseCheck {
            n_profiles: clean.len(),
            data_mae_to_clean: data,
            spline_mae_to_clean: fitted,
            spline_reduces_noise: fitted < data,
        };
        write_file(&out_dir.join(NOISE_JSON), to_json(&check)?)?;
    }
    Ok(format!("evaluate: {}", summarize(&report)))
}

fn summarize(report: &MetricsReport) -> String {
    report
        .rows
        .iter()
        .filter(|r| r.scope == Scope::All)
        .map(|r| format!("{} MAE {:.4}", r.method, r.mae))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One figure to draw: profiles CSV, title, SVG destination.
#[derive(Debug, Clone)]
pub struct Figure {
    pub input: PathBuf,
    pub title: String,
    pub output: PathBuf,
}

pub fn run_plot(figures: &[Figure]) -> CliResult<String> {
    let mut counts = Vec::with_capacity(figures.len());
    for f in figures {
        let profiles = read_profiles(&f.input)?;
        write_file(&f.output, render_svg(&f.title, &profiles))?;
        counts.push(format!("{} ({} curves)", f.output.display(), profiles.len()));
    }
    Ok(format!("plot: wrote {}", counts.join(", ")))
}

/// The three overlays of simulated, spline-generated and network-generated
/// profiles.
pub fn pipeline_figures(out_dir: &Path) -> Vec<Figure> {
    let fig = |input: &str, title: &str, name: &str| Figure {
        input: out_dir.join(input),
        title: title.to_string(),
        output: out_dir.join(FIGURES_DIR).join(name),
    };
    vec![
        fig(PROFILES_CSV, "Simulation", "simulation.svg"),
        fig(RESPONSE_PROFILES_CSV, "Spline surrogate", "spline.svg"),
        fig(NET_PROFILES_CSV, "LSTM surrogate", "network.svg"),
    ]
}

/// doe, simulate, fit-spline, train, evaluate and plot in sequence, printing
/// each stage's summary as it completes.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> CliResult<String> {
    cfg.validate()?;
    let stored = PipelineConfig {
        output_dir: None,
        ..cfg.clone()
    };
    write_file(&out_dir.join("pipeline_config.json"), to_json(&stored)?)?;
    let runs = out_dir.join(RUNS_CSV);
    let profiles = out_dir.join(PROFILES_CSV);
    let stages: [&dyn Fn() -> CliResult<String>; 6] = [
        &|| run_doe(&DoeSource::Table1, cfg.seed, out_dir),
        &|| run_simulate(&runs, cfg, out_dir),
        &|| run_fit_spline(&profiles, &runs, cfg, out_dir),
        &|| run_train(&profiles, &runs, cfg, out_dir),
        &|| run_evaluate(&EvaluateInputs::in_dir(out_dir), out_dir),
        &|| run_plot(&pipeline_figures(out_dir)),
    ];
    for stage in stages {
        println!("{}", stage()?);
    }
    Ok(format!("pipeline: artifacts written to {}", out_dir.display()))
}
