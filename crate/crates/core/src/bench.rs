//! The benchmark matrix: generate each dataset, train the π-nets and the
//! MLP baseline, and collect recovery and extrapolation metrics.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::models::{Activation, Arch, Dynamics, Network};
use crate::ode::{integrate_adaptive, linspace, AdaptiveOptions, Trajectory};
use crate::poly::expand_pinet;
use crate::systems::{
    coefficient_report, field_rms_error, generate_dataset, limit_cycle_check, max_abs_diff,
    ExperimentSpec, LimitCycleVerdict, Region, SystemId,
};
use crate::train::{init_network, train, TrainConfig, TrainMode, TrainOutcome};

/// Grid resolution for vector-field metrics.
pub const FIELD_GRID: usize = 30;
/// Start of the limit-cycle rollout.
pub const LIMIT_CYCLE_Y0: [f64; 2] = [4.0, 4.0];
/// Adam epsilon for MLP baselines. With the tiny default init the
/// first-moment ratio stalls at 1e-8.
pub const MLP_ADAM_EPS: f64 = 1e-12;
/// Default MLP epoch budget.
pub const MLP_EPOCHS: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ModelPlan {
    PiNet { degree: usize },
    Mlp,
}

impl ModelPlan {
    pub fn label(&self) -> String {
        match self {
            ModelPlan::PiNet { degree } => format!("pinet-{degree}"),
            ModelPlan::Mlp => "mlp".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    /// Epochs for π-net models.
    pub pinet_epochs: usize,
    /// Epochs for MLP baselines.
    pub mlp_epochs: usize,
    /// Restarts per model; `None` means 5 for the static quartic and 1
    /// elsewhere.
    pub restarts: Option<usize>,
    pub seed: u64,
    pub learning_rate: f64,
    pub include_mlp: bool,
    /// Override the spec's degree list.
    pub degrees: Option<Vec<usize>>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        let d = TrainConfig::default();
        BenchOptions {
            pinet_epochs: d.epochs,
            mlp_epochs: MLP_EPOCHS,
            restarts: None,
            seed: d.seed,
            learning_rate: d.learning_rate,
            include_mlp: true,
            degrees: None,
        }
    }
}

impl BenchOptions {
    pub fn restarts_for(&self, spec: &ExperimentSpec) -> usize {
        self.restarts
            .unwrap_or(if spec.system.is_static() { 5 } else { 1 })
            .max(1)
    }

    pub fn plans_for(&self, spec: &ExperimentSpec) -> Vec<ModelPlan> {
        let degrees = self.degrees.clone().unwrap_or_else(|| spec.degrees.clone());
        let mut plans: Vec<ModelPlan> = degrees
            .into_iter()
            .map(|degree| ModelPlan::PiNet { degree })
            .collect();
        if self.include_mlp {
            plans.push(ModelPlan::Mlp);
        }
        plans
    }

    pub fn train_config(&self, spec: &ExperimentSpec, plan: ModelPlan) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: match plan {
                ModelPlan::PiNet { .. } => self.pinet_epochs,
                ModelPlan::Mlp => self.mlp_epochs,
            },
            learning_rate: self.learning_rate,
            substeps: spec.substeps,
            seed: self.seed,
            mode: if spec.system.is_static() {
                TrainMode::Static
            } else {
                TrainMode::Ode
            },
            adam_eps: match plan {
                ModelPlan::PiNet { .. } => d.adam_eps,
                ModelPlan::Mlp => MLP_ADAM_EPS,
            },
            ..d
        }
    }
}

pub fn arch_for(spec: &ExperimentSpec, plan: ModelPlan) -> Arch {
    let d = spec.system().dim();
    match plan {
        ModelPlan::PiNet { degree } => Arch::PiNet {
            input_dim: d,
            output_dim: d,
            degree,
            hidden_width: None,
        },
        ModelPlan::Mlp => Arch::Mlp {
            widths: spec.mlp_widths.clone(),
            activation: Activation::Tanh,
        },
    }
}

/// Runs `restarts` seeds starting at `config.seed` and keeps the run with
/// the lowest training loss.
pub fn train_best_of(
    arch: &Arch,
    data: &Trajectory,
    config: &TrainConfig,
    restarts: usize,
) -> Result<(TrainOutcome, u64)> {
    let mut best: Option<(TrainOutcome, u64)> = None;
    let mut last_err = None;
    for r in 0..restarts.max(1) as u64 {
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(r),
            ..config.clone()
        };
        let net = init_network(arch, &cfg)?;
        match train(&net, data, &cfg) {
            Ok(out) => {
                if best.as_ref().is_none_or(|(b, _)| out.best_loss < b.best_loss) {
                    best = Some((out, cfg.seed));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(invalid("no restarts ran")),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitCycleSummary {
    pub verdict: LimitCycleVerdict,
    pub amplitude: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelResult {
    pub model: String,
    pub plan: ModelPlan,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_loss: Option<f64>,
    #[serde(skip)]
    pub runtime_s: f64,
    pub equations: Option<String>,
    pub coefficients: Option<serde_json::Value>,
    pub min_digits: Option<u32>,
    pub max_spurious: Option<f64>,
    pub field_rms_train: Option<f64>,
    pub field_rms_expanded: Option<f64>,
    pub field_rms_wide: Option<f64>,
    /// Max absolute deviation from the truth rollout over the horizon.
    pub rollout_max_error: Option<f64>,
    pub limit_cycle: Option<LimitCycleSummary>,
    pub error: Option<String>,
    #[serde(skip)]
    pub network: Option<Network>,
}

impl ModelResult {
    fn failed(plan: ModelPlan, seed: u64, runtime_s: f64, err: String) -> Self {
        ModelResult {
            model: plan.label(),
            plan,
            seed,
            epochs_run: 0,
            best_loss: None,
            runtime_s,
            equations: None,
            coefficients: None,
            min_digits: None,
            max_spurious: None,
            field_rms_train: None,
            field_rms_expanded: None,
            field_rms_wide: None,
            rollout_max_error: None,
            limit_cycle: None,
            error: Some(err),
            network: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub system: SystemId,
    pub spec: ExperimentSpec,
    pub dataset_rows: usize,
    pub models: Vec<ModelResult>,
    pub error: Option<String>,
}

impl ExperimentResult {
    pub fn model(&self, label: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.model == label)
    }

    pub fn failed(&self) -> bool {
        self.error.is_some() || self.models.iter().any(|m| m.error.is_some())
    }
}

/// Rollout of `model` and of the truth from the spec's initial state to its
/// horizon, compared on a uniform grid.
pub fn rollout_error(spec: &ExperimentSpec, model: &Dynamics) -> Result<f64> {
    let truth = Dynamics::System(spec.system());
    let points = (spec.horizon * 10.0).round() as usize + 1;
    let grid = linspace(spec.t_span.0, spec.horizon, points);
    let run = |m: &Dynamics| {
        integrate_adaptive(
            |t, y: &[f64]| m.rhs(t, y),
            (spec.t_span.0, spec.horizon),
            &spec.y0,
            AdaptiveOptions::default(),
            &grid,
        )
    };
    max_abs_diff(&run(model)?, &run(&truth)?)
}

fn evaluate_model(
    spec: &ExperimentSpec,
    data: &Trajectory,
    plan: ModelPlan,
    outcome: TrainOutcome,
    seed: u64,
    runtime_s: f64,
) -> ModelResult {
    let sys = spec.system();
    let mut r = ModelResult::failed(plan, seed, runtime_s, String::new());
    r.error = None;
    r.epochs_run = outcome.epochs_run;
    r.best_loss = Some(outcome.best_loss);
    let net = outcome.network;
    if let Network::PiNet(p) = &net {
        if let Ok(pv) = expand_pinet(p, &sys.var_names()) {
            let pv = pv.with_labels(sys.output_labels());
            r.equations = Some(pv.format(8, 1e-2));
            if let Some(truth) = sys.truth_poly() {
                if let Ok(rep) = coefficient_report(&pv, &truth) {
                    r.min_digits = Some(rep.min_digits());
                    r.max_spurious = Some(rep.max_spurious());
                    r.coefficients = Some(rep.to_value());
                }
            }
        }
    }
    if !spec.system.is_static() {
        let model = Dynamics::Network(net.clone());
        let truth = Dynamics::System(sys.clone());
        if let Ok(region) = Region::bounding_box(data) {
            r.field_rms_train = field_rms_error(&model, &truth, region, FIELD_GRID).ok();
            r.field_rms_expanded =
                field_rms_error(&model, &truth, region.expand(3.0), FIELD_GRID).ok();
        }
        if spec.system == SystemId::DampedOscillator {
            r.field_rms_wide = field_rms_error(&model, &truth, Region::square(1000.0), FIELD_GRID).ok();
        }
        r.rollout_max_error = rollout_error(spec, &model).ok();
        if spec.system == SystemId::VanDerPol {
            r.limit_cycle = limit_cycle_check(&model, LIMIT_CYCLE_Y0, spec.horizon)
                .ok()
                .map(|lc| LimitCycleSummary {
                    verdict: lc.verdict,
                    amplitude: lc.amplitude,
                });
        }
    }
    r.network = Some(net);
    r
}

/// Trains and evaluates one model of an experiment.
pub fn run_model(
    spec: &ExperimentSpec,
    data: &Trajectory,
    plan: ModelPlan,
    opts: &BenchOptions,
) -> ModelResult {
    let start = Instant::now();
    let arch = arch_for(spec, plan);
    let cfg = opts.train_config(spec, plan);
    match train_best_of(&arch, data, &cfg, opts.restarts_for(spec)) {
        Ok((outcome, seed)) => {
            let secs = start.elapsed().as_secs_f64();
            evaluate_model(spec, data, plan, outcome, seed, secs)
        }
        Err(e) => ModelResult::failed(plan, cfg.seed, start.elapsed().as_secs_f64(), e.to_string()),
    }
}

pub fn run_experiment(spec: &ExperimentSpec, opts: &BenchOptions) -> ExperimentResult {
    let data = match generate_dataset(spec) {
        Ok(d) => d,
        Err(e) => {
            return ExperimentResult {
                system: spec.system,
                spec: spec.clone(),
                dataset_rows: 0,
                models: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    };
    let models = opts
        .plans_for(spec)
        .into_iter()
        .map(|plan| run_model(spec, &data, plan, opts))
        .collect();
    ExperimentResult {
        system: spec.system,
        spec: spec.clone(),
        dataset_rows: data.len(),
        models,
        error: None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub experiments: Vec<ExperimentResult>,
}

impl BenchReport {
    pub fn any_failed(&self) -> bool {
        self.experiments.iter().any(ExperimentResult::failed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_markdown(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        let mut s = String::from(
            "| system | model | loss | min digits | max spurious | field RMS (train) | field RMS (3x) | rollout error | limit cycle | runtime (s) | error |\n\
             |---|---|---|---|---|---|---|---|---|---|---|\n",
        );
        for e in &self.experiments {
            if let Some(err) = &e.error {
                let _ = writeln!(s, "| {} | - | - | - | - | - | - | - | - | - | {err} |", e.system);
            }
            for m in &e.models {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {:.1} | {} |",
                    e.system,
                    m.model,
                    opt(m.best_loss),
                    m.min_digits.map_or_else(|| "-".to_string(), |d| d.to_string()),
                    opt(m.max_spurious),
                    opt(m.field_rms_train),
                    opt(m.field_rms_expanded),
                    opt(m.rollout_max_error),
                    m.limit_cycle
                        .as_ref()
                        .map_or_else(|| "-".to_string(), |l| l.verdict.to_string()),
                    m.runtime_s,
                    m.error.as_deref().unwrap_or(""),
                );
            }
        }
        s
    }
}

/// The full matrix of experiments.
pub fn standard_suite() -> Vec<ExperimentSpec> {
    SystemId::ALL.iter().map(|&id| ExperimentSpec::standard(id)).collect()
}

pub fn run_suite(specs: &[ExperimentSpec], opts: &BenchOptions) -> BenchReport {
    BenchReport {
        experiments: specs.iter().map(|s| run_experiment(s, opts)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_and_restarts() {
        let opts = BenchOptions::default();
        let lv = ExperimentSpec::standard(SystemId::LotkaVolterra);
        assert_eq!(
            opts.plans_for(&lv),
            vec![
                ModelPlan::PiNet { degree: 2 },
                ModelPlan::PiNet { degree: 3 },
                ModelPlan::PiNet { degree: 4 },
                ModelPlan::Mlp
            ]
        );
        assert_eq!(opts.restarts_for(&lv), 1);
        assert_eq!(opts.restarts_for(&ExperimentSpec::standard(SystemId::QuarticStatic)), 5);
        let only = BenchOptions {
            degrees: Some(vec![2]),
            include_mlp: false,
            ..opts
        };
        assert_eq!(only.plans_for(&lv), vec![ModelPlan::PiNet { degree: 2 }]);
    }

    #[test]
    fn short_run_produces_a_row() {
        let spec = ExperimentSpec::standard(SystemId::LotkaVolterra);
        let opts = BenchOptions {
            pinet_epochs: 3,
            degrees: Some(vec![2]),
            include_mlp: false,
            ..BenchOptions::default()
        };
        let rep = run_suite(&[spec], &opts);
        assert!(!rep.any_failed());
        let m = rep.experiments[0].model("pinet-2").unwrap();
        assert!(m.coefficients.is_some());
        assert!(m.field_rms_expanded.is_some());
        assert!(rep.to_markdown().contains("| lotka_volterra | pinet-2 |"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["experiments"][0]["dataset_rows"], 200);
    }
}
