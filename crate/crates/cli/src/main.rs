//! `polyode`: generate data, train, extract equations, predict, export
//! vector fields and run the benchmark matrix.

mod svg;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use polyode::bench::{standard_suite, run_suite, BenchOptions};
use polyode::models::{parse_widths, Activation, Arch, Dynamics, Network};
use polyode::ode::{integrate_adaptive, linspace, AdaptiveOptions, Trajectory};
use polyode::poly::{default_var_names, expand_pinet};
use polyode::systems::{
    coefficient_report, generate_dataset_with, vector_field_grid, AnalyticSystem,
    ExperimentSpec, Region, SystemId, LIMIT_CYCLE_BAND,
};
use polyode::train::{EarlyStop, Optimizer, TrainConfig, TrainMode};

#[derive(Parser)]
#[command(name = "polyode", version, about = "Polynomial neural ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a benchmark system and write the trajectory CSV.
    Generate(GenerateArgs),
    /// Train a π-net or MLP on a trajectory CSV.
    Train(TrainArgs),
    /// Expand a trained π-net checkpoint into polynomials.
    Extract(ExtractArgs),
    /// Roll out a trained model from an initial state.
    Predict(PredictArgs),
    /// Sample a model's vector field on a grid.
    Field(FieldArgs),
    /// Run the benchmark matrix.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    system: String,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = AdaptiveOptions::default().rtol)]
    rtol: f64,
    #[arg(long, default_value_t = AdaptiveOptions::default().atol)]
    atol: f64,
    /// Output CSV; defaults to `<system>.csv`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    data: PathBuf,
    #[arg(long, default_value = "pinet")]
    arch: String,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    hidden_width: Option<usize>,
    /// MLP layer widths such as `2x50x50x50x2`.
    #[arg(long)]
    widths: Option<String>,
    #[arg(long, default_value = "tanh")]
    activation: String,
    /// Training config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long, env = "POLYODE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Regress the network output directly on `(x, f)` columns.
    #[arg(long = "static")]
    static_mode: bool,
    /// Checkpoint path; loss history and manifest are written beside it.
    #[arg(long, short, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 6)]
    sigfigs: usize,
    /// Relative threshold below which terms are listed as dropped.
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    #[arg(long, value_delimiter = ',')]
    vars: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Equation JSON; defaults to `<checkpoint stem>.poly.json`.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Compare against a benchmark system's true coefficients.
    #[arg(long)]
    truth: Option<String>,
    /// Where to write the coefficient report JSON (with `--truth`).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    y0: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    t_start: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[arg(long, default_value_t = AdaptiveOptions::default().rtol)]
    rtol: f64,
    #[arg(long, default_value_t = AdaptiveOptions::default().atol)]
    atol: f64,
    #[arg(long, short, default_value = "prediction.csv")]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct FieldArgs {
    /// A checkpoint path or a benchmark system name.
    model: String,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    x_range: (f64, f64),
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    y_range: (f64, f64),
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Also report the RMS difference to this system's field.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, short, default_value = "field.csv")]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "standard")]
    suite: String,
    /// Restrict to these systems.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    mlp_epochs: Option<usize>,
    #[arg(long)]
    no_mlp: bool,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, env = "POLYODE_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "bench_out")]
    out_dir: PathBuf,
}

/// Exit codes: 1 benchmark failures, 2 usage or input errors, 3 numeric
/// failures.
#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<polyode::Error> for CliError {
    fn from(e: polyode::Error) -> Self {
        use polyode::Error as E;
        match e {
            E::NonFiniteStage { .. } | E::StepUnderflow { .. } | E::MaxSteps(_) | E::Diverged { .. } => {
                CliError::numeric(e.to_string())
            }
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `lo:hi`, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(hi > lo) {
        return Err(format!("range `{s}` must be increasing"));
    }
    Ok((lo, hi))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn to_json_pretty<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load_network(path: &Path) -> CliResult<Network> {
    Ok(Network::from_json(&read(path)?)?)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DatasetSidecar<'a> {
    system: SystemId,
    y0: &'a [f64],
    t_span: (f64, f64),
    num_points: usize,
    mu: Option<f64>,
    rtol: f64,
    atol: f64,
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let id: SystemId = a.system.parse()?;
    let mut spec = ExperimentSpec::standard(id);
    if let Some(p) = a.points {
        spec.num_points = p;
    }
    if let Some(t) = a.tmin {
        spec.t_span.0 = t;
    }
    if let Some(t) = a.tmax {
        spec.t_span.1 = t;
    }
    if let Some(y0) = a.y0 {
        if id.is_static() {
            return Err(CliError::usage("the static quartic takes no initial state"));
        }
        spec.y0 = y0;
    }
    let mut sys = AnalyticSystem::new(id);
    if let Some(mu) = a.mu {
        if id != SystemId::VanDerPol {
            return Err(CliError::usage("--mu only applies to van_der_pol"));
        }
        sys = sys.with_mu(mu);
    }
    spec.validate()?;
    let opts = AdaptiveOptions {
        rtol: a.rtol,
        atol: a.atol,
        ..AdaptiveOptions::default()
    };
    let traj = generate_dataset_with(&spec, &sys, opts)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", id.name())));
    write(&out, &traj.to_csv(&spec.csv_header())?)?;
    let sidecar = DatasetSidecar {
        system: id,
        y0: &spec.y0,
        t_span: spec.t_span,
        num_points: spec.num_points,
        mu: (id == SystemId::VanDerPol).then_some(sys.mu),
        rtol: opts.rtol,
        atol: opts.atol,
    };
    write(&sibling(&out, "spec.json"), &to_json_pretty(&sidecar)?)?;
    println!("wrote {} rows to {}", traj.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Metrics {
    best_loss: f64,
    best_epoch: usize,
    final_loss: f64,
    epochs_run: usize,
    stopped_early: bool,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    arch: Arch,
    config: TrainConfig,
    seed: u64,
    restarts: usize,
    dataset_path: String,
    dataset_sha256: String,
    checkpoint_path: String,
    loss_history_path: String,
    metrics: Metrics,
}

fn build_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = &a.optimizer {
        cfg.optimizer = v.parse::<Optimizer>()?;
    }
    if a.init_std.is_some() {
        cfg.init_std = a.init_std;
    }
    if let Some(v) = a.substeps {
        cfg.substeps = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.log_every {
        cfg.loss_log_every = v;
    }
    if let Some(p) = a.patience {
        cfg.early_stop = (p > 0).then(|| EarlyStop {
            patience: p,
            min_delta: cfg.early_stop.map_or(1e-12, |e| e.min_delta),
        });
    }
    if a.static_mode {
        cfg.mode = TrainMode::Static;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_arch(a: &TrainArgs, data_dim: usize, mode: TrainMode) -> CliResult<Arch> {
    let input_dim = match mode {
        TrainMode::Ode => data_dim,
        TrainMode::Static => 1,
    };
    match a.arch.to_ascii_lowercase().as_str() {
        "pinet" => {
            let degree = a
                .degree
                .ok_or_else(|| CliError::usage("--degree is required for --arch pinet"))?;
            if degree == 0 {
                return Err(CliError::usage("--degree must be at least 1"));
            }
            Ok(Arch::PiNet {
                input_dim,
                output_dim: data_dim,
                degree,
                hidden_width: a.hidden_width,
            })
        }
        "mlp" => {
            let widths = match &a.widths {
                Some(w) => parse_widths(w)?,
                None => vec![input_dim, 50, 50, 50, data_dim],
            };
            if widths.first() != Some(&input_dim) || widths.last() != Some(&data_dim) {
                return Err(CliError::usage(format!(
                    "MLP widths must start at {input_dim} and end at {data_dim}"
                )));
            }
            let activation: Activation = a.activation.parse()?;
            Ok(Arch::Mlp { widths, activation })
        }
        other => Err(CliError::usage(format!(
            "unknown architecture `{other}` (expected pinet or mlp)"
        ))),
    }
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let cfg = build_config(&a)?;
    let raw = fs::read(&a.data).map_err(|e| CliError::usage(format!("{}: {e}", a.data.display())))?;
    let text = String::from_utf8(raw.clone()).map_err(|e| CliError::usage(e.to_string()))?;
    let (traj, _) = Trajectory::from_csv(&text)?;
    let arch = build_arch(&a, traj.dim(), cfg.mode)?;
    let restarts = a.restarts.unwrap_or(1).max(1);
    let start = Instant::now();
    let (outcome, seed) = polyode::bench::train_best_of(&arch, &traj, &cfg, restarts).map_err(|e| {
        let mut err = CliError::from(e);
        if err.code == 3 {
            err.message.push_str("\nhint: lower --lr or increase --substeps");
        }
        err
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let loss_path = sibling(&a.out, "loss.csv");
    let manifest_path = sibling(&a.out, "manifest.json");
    write(&a.out, &outcome.network.to_json()?)?;
    write(&loss_path, &outcome.history.to_csv())?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        arch,
        config: TrainConfig { seed, ..cfg },
        seed,
        restarts,
        dataset_path: a.data.display().to_string(),
        dataset_sha256: hex::encode(Sha256::digest(&raw)),
        checkpoint_path: a.out.display().to_string(),
        loss_history_path: loss_path.display().to_string(),
        metrics: Metrics {
            best_loss: outcome.best_loss,
            best_epoch: outcome.best_epoch,
            final_loss: outcome.final_loss,
            epochs_run: outcome.epochs_run,
            stopped_early: outcome.stopped_early,
        },
    };
    write(&manifest_path, &to_json_pretty(&manifest)?)?;
    println!(
        "final loss {:e} (best at epoch {}, {} epochs, seed {seed})",
        outcome.best_loss, outcome.best_epoch, outcome.epochs_run
    );
    println!("wall time {elapsed:.2} s");
    println!("checkpoint {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

fn cmd_extract(a: ExtractArgs) -> CliResult<()> {
    let net = load_network(&a.checkpoint)?;
    let Network::PiNet(pinet) = &net else {
        return Err(CliError::usage("architecture is not symbolically expandable"));
    };
    if !(1..=17).contains(&a.sigfigs) {
        return Err(CliError::usage("--sigfigs must be between 1 and 17"));
    }
    if !(a.threshold >= 0.0) {
        return Err(CliError::usage("--threshold must be non-negative"));
    }
    let truth_sys = a.truth.as_deref().map(AnalyticSystem::from_name).transpose()?;
    let vars = match (&a.vars, &truth_sys) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) if s.dim() == net.input_dim() => s.var_names(),
        _ => default_var_names(net.input_dim()),
    };
    let mut pv = expand_pinet(pinet, &vars)?;
    if let Some(labels) = &a.labels {
        if labels.len() != net.output_dim() {
            return Err(CliError::usage(format!("--labels needs {} entries", net.output_dim())));
        }
        pv = pv.with_labels(labels.clone());
    } else if let Some(s) = &truth_sys {
        if s.dim() == net.output_dim() {
            pv = pv.with_labels(s.output_labels());
        }
    }
    print!("{}", pv.format(a.sigfigs, a.threshold));
    let json_path = a.json.unwrap_or_else(|| sibling(&a.checkpoint, "poly.json"));
    write(&json_path, &pv.to_json()?)?;
    if let Some(sys) = truth_sys {
        let truth = sys
            .truth_poly()
            .ok_or_else(|| CliError::usage(format!("{} has no polynomial form", sys.id)))?;
        let rep = coefficient_report(&pv, &truth)?;
        println!();
        print!("{}", rep.to_table());
        println!("min significant digits {}", rep.min_digits());
        let path = a.report.unwrap_or_else(|| sibling(&a.checkpoint, "report.json"));
        write(&path, &rep.to_json())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

fn cmd_predict(a: PredictArgs) -> CliResult<()> {
    let net = load_network(&a.checkpoint)?;
    let d = net.input_dim();
    if a.y0.len() != d || net.output_dim() != d {
        return Err(CliError::usage(format!(
            "model is not an ODE right-hand side over {} states",
            a.y0.len()
        )));
    }
    if !(a.t_end >= a.t_start) {
        return Err(CliError::usage("--t-end must not precede --t-start"));
    }
    let grid = if a.t_end == a.t_start {
        vec![a.t_start]
    } else {
        if a.points < 2 {
            return Err(CliError::usage("--points must be at least 2"));
        }
        linspace(a.t_start, a.t_end, a.points)
    };
    let model = Dynamics::Network(net);
    let opts = AdaptiveOptions {
        rtol: a.rtol,
        atol: a.atol,
        ..AdaptiveOptions::default()
    };
    let traj = integrate_adaptive(|t, y: &[f64]| model.rhs(t, y), (a.t_start, a.t_end), &a.y0, opts, &grid)
        .map_err(|e| {
            let mut err = CliError::from(e);
            if err.code == 3 {
                err.message
                    .push_str("\nthe learned dynamics blew up; this is expected for MLP extrapolation");
            }
            err
        })?;
    let names = default_var_names(d);
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    write(&a.out, &traj.to_csv(&header)?)?;
    if let Some(p) = &a.plot {
        write(p, &svg::trajectory_plot(&traj, &names))?;
    }
    let end = traj.state(traj.len() - 1);
    println!("final state at t = {}: {:?}", a.t_end, end);
    if d == 2 && a.t_end > a.t_start {
        let cutoff = a.t_start + 0.75 * (a.t_end - a.t_start);
        let amp = traj
            .times()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= cutoff)
            .map(|(i, _)| traj.state(i)[0].abs())
            .fold(0.0, f64::max);
        let verdict = if (LIMIT_CYCLE_BAND.0..=LIMIT_CYCLE_BAND.1).contains(&amp) {
            "converged"
        } else {
            "absent"
        };
        println!("limit cycle: {verdict} (max |x| over the last quarter = {amp:.6})");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// field
// ---------------------------------------------------------------------------

fn load_dynamics(spec: &str) -> CliResult<Dynamics> {
    match spec.parse::<SystemId>() {
        Ok(id) => Ok(Dynamics::System(AnalyticSystem::new(id))),
        Err(_) => Ok(Dynamics::Network(load_network(Path::new(spec))?)),
    }
}

fn cmd_field(a: FieldArgs) -> CliResult<()> {
    let model = load_dynamics(&a.model)?;
    let region = Region::new(a.x_range, a.y_range)?;
    let field = vector_field_grid(&model, region, a.n)?;
    write(&a.out, &field.to_csv())?;
    if let Some(p) = &a.plot {
        write(p, &svg::quiver_plot(&field))?;
    }
    if let Some(t) = &a.truth {
        let truth = Dynamics::System(AnalyticSystem::from_name(t)?);
        let rms = field.rms_error(&vector_field_grid(&truth, region, a.n)?)?;
        println!("field RMS error vs {t}: {rms:e}");
    }
    println!("wrote {}x{} grid to {}", a.n, a.n, a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn cmd_bench(a: BenchArgs) -> CliResult<ExitCode> {
    if a.suite != "standard" {
        return Err(CliError::usage(format!("unknown suite `{}` (expected standard)", a.suite)));
    }
    let mut specs = standard_suite();
    if let Some(only) = &a.only {
        let ids = only
            .iter()
            .map(|s| s.parse::<SystemId>())
            .collect::<Result<Vec<_>, _>>()?;
        specs.retain(|s| ids.contains(&s.system));
    }
    let mut opts = BenchOptions {
        include_mlp: !a.no_mlp,
        restarts: a.restarts,
        degrees: a.degrees.clone(),
        ..BenchOptions::default()
    };
    if let Some(e) = a.epochs {
        opts.pinet_epochs = e;
        opts.mlp_epochs = e;
    }
    if let Some(e) = a.mlp_epochs {
        opts.mlp_epochs = e;
    }
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let report = run_suite(&specs, &opts);
    fs::create_dir_all(&a.out_dir)?;
    write(&a.out_dir.join("report.json"), &report.to_json()?)?;
    let md = report.to_markdown();
    write(&a.out_dir.join("report.md"), &md)?;
    for e in &report.experiments {
        for m in &e.models {
            if let Some(net) = &m.network {
                let stem = format!("{}_{}", e.system, m.model);
                write(&a.out_dir.join(format!("{stem}.json")), &net.to_json()?)?;
                if let Some(eq) = &m.equations {
                    write(&a.out_dir.join(format!("{stem}.txt")), eq)?;
                }
            }
        }
    }
    print!("{md}");
    if report.any_failed() {
        eprintln!("some experiments failed; see {}", a.out_dir.join("report.md").display());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => cmd_train(a).map(|_| ExitCode::SUCCESS),
        Command::Extract(a) => cmd_extract(a).map(|_| ExitCode::SUCCESS),
        Command::Predict(a) => cmd_predict(a).map(|_| ExitCode::SUCCESS),
        Command::Field(a) => cmd_field(a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
