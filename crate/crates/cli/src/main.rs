//! Command-line surface: forward / inverse training runs, the standalone
//! Gaussian regression, ground-truth field generation, and field comparison.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 training or
//! evaluation failure, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pinnbeam::{
    absolute_error_field, analytical_deflection, forward as net_forward, load_checkpoint,
    load_config, read_field_csv, read_sensor_csv, relative_error_percent, save_checkpoint,
    solve_reference, standard_grid, train, train_with_data, write_field_csv, BeamConfig,
    DataSource, DeltaModel, Error, ExperimentConfigFile, GridField, Result, RunReport,
    TrainConfig, TrainMode, DEFAULT_N_TERMS, DEFAULT_RESONANCE_EPS,
};

#[derive(Parser)]
#[command(
    name = "pinnbeam",
    version,
    about = "Physics-informed neural solver for a simply supported beam under a moving load"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the deflection surrogate; writes field CSV, report JSON, checkpoint
    Forward(ForwardArgs),
    /// Recover the load magnitude from sensor observations
    Inverse(InverseArgs),
    /// Regress the narrow Gaussian bump directly
    DeltaFit(DeltaFitArgs),
    /// Evaluate a ground-truth solver onto the standard grid
    Oracle(OracleArgs),
    /// Compare two field CSVs and print the relative error percent
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; omitted fields fall back to the standard
    /// forward preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output.dir)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// RNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch count override
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate override
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Load magnitude override (beam.p)
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaKind {
    /// Gaussian bump with the standard width
    Gaussian,
    /// Pointwise indicator; demonstrates why training needs the bump
    Discrete,
}

#[derive(Args)]
struct ForwardArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Load regularization override
    #[arg(long, value_enum)]
    delta: Option<DeltaKind>,
}

#[derive(Args)]
struct InverseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sensor observations as a CSV with header x,t,u
    #[arg(long, conflicts_with = "from_forward")]
    data: Option<PathBuf>,
    /// Sample observations from a saved forward run's network
    /// (path to its report JSON; the checkpoint must sit next to it)
    #[arg(long)]
    from_forward: Option<PathBuf>,
    /// Initial guess for the load magnitude
    #[arg(long)]
    p_init: Option<f64>,
}

#[derive(Args)]
struct DeltaFitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Width of the Gaussian target
    #[arg(long)]
    sigma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    /// Closed-form modal series
    Series,
    /// Independent modal-projection time stepper
    Modal,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = Engine::Series)]
    engine: Engine,
    /// Series truncation (series engine)
    #[arg(long)]
    n_terms: Option<usize>,
    /// Mode count (modal engine)
    #[arg(long)]
    n_modes: Option<usize>,
    /// Macro time step (modal engine)
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted field CSV
    #[arg(long)]
    pred: PathBuf,
    /// Reference field CSV
    #[arg(long)]
    truth: PathBuf,
    /// Also write the pointwise absolute error surface here
    #[arg(long)]
    emit_abs_err: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Forward(a) => run_forward(a),
        Cmd::Inverse(a) => run_inverse(a),
        Cmd::DeltaFit(a) => run_delta_fit(a),
        Cmd::Oracle(a) => run_oracle(a),
        Cmd::Eval(a) => run_eval(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Usage(_) | Error::Metric(_) | Error::Format(_) => 2,
                Error::Training { .. } | Error::Evaluation(_) => 3,
                Error::Io { .. } => 4,
            })
        }
    }
}

/// Load the config file (or defaults) and apply command-line overrides.
fn load_file(common: &CommonArgs) -> Result<ExperimentConfigFile> {
    let mut file = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfigFile::default(),
    };
    if let Some(dir) = &common.out_dir {
        file.output.dir = dir.display().to_string();
    }
    if let Some(seed) = common.seed {
        file.train.seed = seed;
    }
    if let Some(epochs) = common.epochs {
        file.train.epochs = epochs;
    }
    if let Some(lr) = common.learning_rate {
        file.train.learning_rate = lr;
    }
    if let Some(p) = common.p {
        file.beam.p = p;
    }
    Ok(file)
}

fn ensure_dir(file: &ExperimentConfigFile) -> Result<PathBuf> {
    let dir = PathBuf::from(&file.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(dir)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_report(path: &Path) -> Result<RunReport> {
    let body =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&body).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn series_oracle(beam: BeamConfig) -> impl Fn(f64, f64) -> Result<f64> {
    move |x, t| Ok(analytical_deflection(x, t, &beam, DEFAULT_N_TERMS, DEFAULT_RESONANCE_EPS))
}

fn run_forward(a: ForwardArgs) -> Result<()> {
    let mut file = load_file(&a.common)?;
    if let Some(kind) = a.delta {
        file.delta = match kind {
            DeltaKind::Gaussian => DeltaModel::default(),
            DeltaKind::Discrete => DeltaModel::Discrete {
                tol: pinnbeam::beam::DEFAULT_DISCRETE_TOL,
            },
        };
    }
    let cfg = TrainConfig::from_file(&file, TrainMode::Forward)?;
    let beam = file.beam;
    let dir = ensure_dir(&file)?;
    let oracle = series_oracle(beam);
    let mut out = train(&beam, &cfg, &oracle)?;
    out.report.config.output = file.output.clone();
    write_field_csv(&dir.join("forward_field.csv"), &out.field)?;
    save_checkpoint(&out.params, &dir.join("forward.ckpt"))?;
    write_json(&dir.join("forward_report.json"), &out.report)?;
    write_json(&dir.join("forward_config.json"), &out.report.config)?;
    println!(
        "forward: final loss {:.6e}, R {:.4}% at final time ({} epochs, seed {})",
        out.report.final_loss, out.report.relative_error_percent, cfg.epochs, cfg.seed
    );
    println!("wrote {}", dir.join("forward_report.json").display());
    Ok(())
}

/// Derive `<stem>.ckpt` from `<stem>_report.json`.
fn checkpoint_for_report(report_path: &Path) -> Result<PathBuf> {
    let name = report_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Usage(format!("bad report path {}", report_path.display())))?;
    let stem = name.strip_suffix("_report.json").ok_or_else(|| {
        Error::Usage(format!(
            "{name}: expected a *_report.json file to locate the matching checkpoint"
        ))
    })?;
    Ok(report_path.with_file_name(format!("{stem}.ckpt")))
}

fn run_inverse(a: InverseArgs) -> Result<()> {
    let mut file = load_file(&a.common)?;
    if a.common.config.is_none() {
        // the load-recovery experiment uses the deeper net and uniform
        // weights unless a config says otherwise
        let preset = TrainConfig::inverse_preset();
        file.train.hidden_layers = preset.arch.hidden_layers;
        file.train.neurons_per_layer = preset.arch.neurons_per_layer;
        file.train.epochs = preset.epochs;
        file.train.lambda_pde = preset.lambda_pde;
        file.train.lambda_ic = preset.lambda_ic;
        file.train.lambda_bc = preset.lambda_bc;
        if let Some(epochs) = a.common.epochs {
            file.train.epochs = epochs;
        }
    }
    if let Some(p_init) = a.p_init {
        file.train.p_init = p_init;
    }
    let cfg = TrainConfig::from_file(&file, TrainMode::Inverse)?;
    let beam = file.beam;
    let dir = ensure_dir(&file)?;

    let mut out;
    let provenance;
    if let Some(report_path) = &a.from_forward {
        let fwd_report = read_report(report_path)?;
        let ckpt = checkpoint_for_report(report_path)?;
        let net = load_checkpoint(&ckpt)?;
        let truth = move |x: f64, t: f64| -> Result<f64> { Ok(net_forward(&net, x, t)) };
        out = train_with_data(&beam, &cfg, &truth, DataSource::Sampled(&truth))?;
        provenance = format!(
            "sampled-from-forward-prediction ({}, seed {})",
            report_path.display(),
            fwd_report.seed
        );
    } else if let Some(data_path) = &a.data {
        let data = read_sensor_csv(data_path)?;
        let oracle = series_oracle(beam);
        out = train_with_data(&beam, &cfg, &oracle, DataSource::Provided(data))?;
        provenance = format!("provided ({})", data_path.display());
    } else {
        let oracle = series_oracle(beam);
        out = train_with_data(&beam, &cfg, &oracle, DataSource::Sampled(&oracle))?;
        provenance = "sampled-from-analytic-oracle".to_string();
    }
    out.report.data_provenance = provenance;
    out.report.config.output = file.output.clone();
    write_field_csv(&dir.join("inverse_field.csv"), &out.field)?;
    save_checkpoint(&out.params, &dir.join("inverse.ckpt"))?;
    write_json(&dir.join("inverse_report.json"), &out.report)?;
    write_json(&dir.join("inverse_config.json"), &out.report.config)?;
    let p_hat = out
        .report
        .predicted_p
        .ok_or_else(|| Error::Evaluation("inverse run produced no load estimate".into()))?;
    println!(
        "inverse: recovered p = {:.6} (started {:.3}), final loss {:.6e}, seed {}",
        p_hat, cfg.p_init, out.report.final_loss, cfg.seed
    );
    println!("wrote {}", dir.join("inverse_report.json").display());
    Ok(())
}

fn run_delta_fit(a: DeltaFitArgs) -> Result<()> {
    let mut file = load_file(&a.common)?;
    if a.common.config.is_none() {
        let preset = TrainConfig::delta_fit_preset();
        file.train.hidden_layers = preset.arch.hidden_layers;
        file.train.neurons_per_layer = preset.arch.neurons_per_layer;
        file.train.epochs = preset.epochs;
        if let Some(epochs) = a.common.epochs {
            file.train.epochs = epochs;
        }
    }
    let cfg = TrainConfig::from_file(&file, TrainMode::Forward)?;
    let dir = ensure_dir(&file)?;
    let mut out = pinnbeam::fit_delta_dnn(a.sigma, &cfg)?;
    out.report.config.output = file.output.clone();
    write_field_csv(&dir.join("delta_fit_field.csv"), &out.field)?;
    write_json(&dir.join("delta_fit_report.json"), &out.report)?;
    write_json(&dir.join("delta_fit_config.json"), &out.report.config)?;
    println!(
        "delta-fit: sigma {}, R {:.4}% on held-out points ({} epochs, seed {})",
        a.sigma, out.report.relative_error_percent, cfg.epochs, cfg.seed
    );
    println!("wrote {}", dir.join("delta_fit_report.json").display());
    Ok(())
}

fn run_oracle(a: OracleArgs) -> Result<()> {
    let file = load_file(&a.common)?;
    file.validate()?;
    let beam = file.beam;
    let dir = ensure_dir(&file)?;
    let (xs, ts) = standard_grid(&beam);
    let (name, values) = match a.engine {
        Engine::Series => {
            let n_terms = a.n_terms.unwrap_or(DEFAULT_N_TERMS);
            let mut values = Vec::with_capacity(xs.len() * ts.len());
            for &t in &ts {
                for &x in &xs {
                    values.push(analytical_deflection(x, t, &beam, n_terms, DEFAULT_RESONANCE_EPS));
                }
            }
            ("oracle_series_field.csv", values)
        }
        Engine::Modal => {
            let n_modes = a.n_modes.unwrap_or(200);
            let dt = a.dt.unwrap_or(1e-4);
            let sol = solve_reference(&beam, &file.delta, n_modes, dt)?;
            let mut values = Vec::with_capacity(xs.len() * ts.len());
            for &t in &ts {
                for &x in &xs {
                    values.push(sol.eval(x, t)?);
                }
            }
            ("oracle_modal_field.csv", values)
        }
    };
    let field = GridField::new(xs, ts, values)?;
    let path = dir.join(name);
    write_field_csv(&path, &field)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let pred = read_field_csv(&a.pred)?;
    let truth = read_field_csv(&a.truth)?;
    // validates matching grids as a side effect
    let abs_err = absolute_error_field(&pred, &truth)?;
    let r = relative_error_percent(&pred.values, &truth.values)?;
    if let Some(path) = &a.emit_abs_err {
        write_field_csv(path, &abs_err)?;
        println!("wrote {}", path.display());
    }
    println!("R_percent = {r}");
    Ok(())
}
