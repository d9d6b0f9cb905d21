//! Full-batch training on adjacent observation pairs.
//!
//! Each epoch advances every observation to the next one with a few fixed
//! RKF45 steps on a fresh tape, scores the predictions with a per-dimension
//! normalized MSE and takes one optimizer step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::Network;
use crate::ode::{batched_pair_step, fmt_f64, ButcherTableau, Trajectory};
use crate::tensor::{Gradients, ParamSet, Tape, Tensor, TensorLike};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            _ => Err(invalid(format!("unknown optimizer `{s}`"))),
        }
    }
}

/// `Ode` fits an ODE right-hand side to a trajectory; `Static` regresses
/// the network output directly on `(x, f(x))` samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Ode,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// `None` uses the architecture default.
    pub init_std: Option<f64>,
    pub substeps: usize,
    pub seed: u64,
    pub loss_log_every: usize,
    pub early_stop: Option<EarlyStop>,
    #[serde(default)]
    pub mode: TrainMode,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

fn default_adam_eps() -> f64 {
    ADAM_EPS
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20_000,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            init_std: None,
            substeps: 2,
            seed: 0,
            loss_log_every: 100,
            early_stop: Some(EarlyStop {
                patience: 2000,
                min_delta: 1e-12,
            }),
            mode: TrainMode::Ode,
            adam_eps: ADAM_EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(invalid("adam_eps must be positive"));
        }
        if let Some(s) = self.init_std {
            if !(s > 0.0) {
                return Err(invalid("init_std must be positive"));
            }
        }
        Ok(())
    }
}

/// Adjacent observation pairs of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBatch {
    pub spans: Vec<(f64, f64)>,
    /// `[T−1, d]`
    pub y_start: Tensor,
    /// `[T−1, d]`
    pub y_target: Tensor,
    pub y_scale: Vec<f64>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// `|max − min|` per state dimension.
pub fn y_scale(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.bounds()
        .into_iter()
        .enumerate()
        .map(|(j, (lo, hi))| {
            let s = (hi - lo).abs();
            if s < 1e-12 {
                Err(Error::ConstantDimension(j))
            } else {
                Ok(s)
            }
        })
        .collect()
}

pub fn make_pair_batch(traj: &Trajectory) -> Result<PairBatch> {
    let t = traj.len();
    if t < 2 {
        return Err(invalid("training needs at least two observations"));
    }
    let d = traj.dim();
    let scale = y_scale(traj)?;
    let times = traj.times();
    let states = traj.states();
    Ok(PairBatch {
        spans: times.windows(2).map(|w| (w[0], w[1])).collect(),
        y_start: Tensor::matrix(t - 1, d, states[..(t - 1) * d].to_vec())?,
        y_target: Tensor::matrix(t - 1, d, states[d..].to_vec())?,
        y_scale: scale,
    })
}

/// `mean(((pred − obs) / y_scale)²)` with `y_scale` applied per column.
pub fn normalized_mse<T: TensorLike>(pred: &T, obs: &T, y_scale: &[f64]) -> Result<T> {
    let shape = pred.shape();
    let cols = *shape.last().unwrap_or(&1);
    if y_scale.len() != cols {
        return Err(Error::ShapeMismatch {
            op: "normalized_mse",
            lhs: shape,
            rhs: vec![y_scale.len()],
        });
    }
    let n: usize = shape.iter().product();
    let inv: Vec<f64> = (0..n).map(|i| 1.0 / y_scale[i % cols]).collect();
    let inv = pred.lift(Tensor::new(shape, inv)?);
    Ok(pred.sub(obs)?.hadamard(&inv)?.square().mean())
}

/// Loss of a right-hand side `f` on every pair of `batch`. `anchor` only
/// decides where constants live (plain tensors or a particular tape).
pub fn pair_loss<T, F>(f: &F, batch: &PairBatch, substeps: usize, anchor: &T) -> Result<T>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    let tab = ButcherTableau::fehlberg45();
    let start = anchor.lift(batch.y_start.clone());
    let target = anchor.lift(batch.y_target.clone());
    let pred = batched_pair_step(f, &batch.spans, &start, substeps, &tab)?;
    normalized_mse(&pred, &target, &batch.y_scale)
}

/// Training data in the form the loss needs.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainData {
    Pairs(PairBatch),
    Static { x: Tensor, f: Tensor, scale: Vec<f64> },
}

impl TrainData {
    pub fn new(traj: &Trajectory, mode: TrainMode) -> Result<Self> {
        match mode {
            TrainMode::Ode => Ok(TrainData::Pairs(make_pair_batch(traj)?)),
            TrainMode::Static => {
                let n = traj.len();
                if n < 2 {
                    return Err(invalid("static regression needs at least two samples"));
                }
                let d = traj.dim();
                Ok(TrainData::Static {
                    x: Tensor::matrix(n, 1, traj.times().to_vec())?,
                    f: Tensor::matrix(n, d, traj.states().to_vec())?,
                    scale: y_scale(traj)?,
                })
            }
        }
    }

    fn loss<T: TensorLike>(&self, net: &Network, params: &[T], substeps: usize) -> Result<T> {
        let anchor = &params[0];
        match self {
            TrainData::Pairs(batch) => {
                let f = |_t: f64, y: &T| net.forward_with(params, y);
                pair_loss(&f, batch, substeps, anchor)
            }
            TrainData::Static { x, f, scale } => {
                let pred = net.forward_with(params, &anchor.lift(x.clone()))?;
                normalized_mse(&pred, &anchor.lift(f.clone()), scale)
            }
        }
    }
}

/// Loss of `net` on `data` without recording gradients.
pub fn evaluate_loss(net: &Network, data: &TrainData, substeps: usize) -> Result<f64> {
    data.loss(net, net.params().values(), substeps)?.item()
}

/// Loss and gradients with respect to every parameter of `net`.
pub fn loss_and_grad(net: &Network, data: &TrainData, substeps: usize) -> Result<(f64, Gradients)> {
    let tape = Tape::new();
    let vars = tape.params(net.params());
    let loss = data.loss(net, &vars, substeps)?;
    let value = loss.value().item()?;
    Ok((value, tape.backward(loss)?))
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.values().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

fn check_grads(params: &ParamSet, grads: &Gradients) -> Result<()> {
    let g = grads.as_params();
    if g.names() != params.names() {
        return Err(invalid("gradient names do not match parameters"));
    }
    for (p, gt) in params.values().iter().zip(g.values()) {
        if p.shape() != gt.shape() {
            return Err(Error::ShapeMismatch {
                op: "optimizer",
                lhs: p.shape().to_vec(),
                rhs: gt.shape().to_vec(),
            });
        }
    }
    Ok(())
}

/// Adam with bias correction.
pub fn adam_update(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    check_grads(params, grads)?;
    if state.m.len() != params.len()
        || state.m.iter().zip(params.values()).any(|(m, p)| m.len() != p.len())
    {
        return Err(invalid("optimizer state does not match parameters"));
    }
    state.step += 1;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for (i, (p, g)) in params
        .values_mut()
        .iter_mut()
        .zip(grads.as_params().values())
        .enumerate()
    {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (pj, gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            *pj -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// `p ← p − lr·g`.
pub fn sgd_update(params: &mut ParamSet, grads: &Gradients, lr: f64) -> Result<()> {
    check_grads(params, grads)?;
    for (p, g) in params.values_mut().iter_mut().zip(grads.as_params().values()) {
        for (pj, gj) in p.data_mut().iter_mut().zip(g.data()) {
            *pj -= lr * gj;
        }
    }
    Ok(())
}

/// `(epoch, loss)` rows; the loss is measured before that epoch's update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory(pub Vec<(usize, f64)>);

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in &self.0 {
            let _ = writeln!(s, "{e},{}", fmt_f64(*l));
        }
        s
    }

    pub fn last(&self) -> Option<(usize, f64)> {
        self.0.last().copied()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest training loss seen.
    pub network: Network,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub history: LossHistory,
}

/// Initial network for `arch` using `config.init_std` (or the architecture
/// default) and `config.seed`.
pub fn init_network(arch: &crate::models::Arch, config: &TrainConfig) -> Result<Network> {
    let std = config.init_std.unwrap_or_else(|| arch.default_init_std());
    Network::init(arch, std, config.seed)
}

/// Trains `net` in place of a copy and returns the best parameters found.
pub fn train(net: &Network, traj: &Trajectory, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let expected_out = traj.dim();
    let expected_in = match config.mode {
        TrainMode::Ode => traj.dim(),
        TrainMode::Static => 1,
    };
    if net.output_dim() != expected_out || net.input_dim() != expected_in {
        return Err(invalid(format!(
            "model maps {} -> {} but the data needs {} -> {}",
            net.input_dim(),
            net.output_dim(),
            expected_in,
            expected_out
        )));
    }
    let data = TrainData::new(traj, config.mode)?;
    train_on(net.clone(), &data, config)
}

/// Training loop over prepared data.
pub fn train_on(mut net: Network, data: &TrainData, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let log_every = config.loss_log_every.max(1);
    let mut history = LossHistory::default();
    let mut adam = AdamState::new(net.params());
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = net.params().clone();
    let mut last_finite = f64::NAN;
    let mut since_improvement = 0usize;
    let mut plateau_ref = f64::INFINITY;
    let mut stopped_early = false;
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        let (loss, grads) = match loss_and_grad(&net, data, config.substeps) {
            Ok(v) => v,
            Err(Error::NonFiniteStage { .. }) => {
                return Err(Error::Diverged { epoch, last_finite })
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, last_finite });
        }
        last_finite = loss;
        if epoch % log_every == 0 {
            history.0.push((epoch, loss));
        }
        if loss < best_loss {
            best_loss = loss;
            best_epoch = epoch;
            best_params.clone_from(net.params());
        }
        if let Some(es) = config.early_stop {
            if loss < plateau_ref - es.min_delta {
                plateau_ref = loss;
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if since_improvement >= es.patience {
                    stopped_early = true;
                    epochs_run = epoch + 1;
                    break;
                }
            }
        }
        match config.optimizer {
            Optimizer::Adam => adam_update(
                net.params_mut(),
                &grads,
                &mut adam,
                config.learning_rate,
                ADAM_BETA1,
                ADAM_BETA2,
                config.adam_eps,
            )?,
            Optimizer::Sgd => sgd_update(net.params_mut(), &grads, config.learning_rate)?,
        }
        epochs_run = epoch + 1;
    }

    // The parameters after the last update have not been scored yet.
    let final_loss = match evaluate_loss(&net, data, config.substeps) {
        Ok(l) if l.is_finite() => l,
        Ok(_) | Err(Error::NonFiniteStage { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    if !stopped_early {
        history.0.push((epochs_run, final_loss));
        if final_loss < best_loss {
            best_loss = final_loss;
            best_epoch = epochs_run;
            best_params.clone_from(net.params());
        }
    }
    net.set_params(best_params)?;
    Ok(TrainOutcome {
        network: net,
        best_loss,
        best_epoch,
        final_loss,
        epochs_run,
        stopped_early,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Arch;

    fn line(n: usize) -> Trajectory {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let s: Vec<f64> = t.iter().flat_map(|&t| [t, 2.0 - t]).collect();
        Trajectory::new(t, s, 2).unwrap()
    }

    #[test]
    fn pair_batch_shapes() {
        let b = make_pair_batch(&line(5)).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.y_start.shape(), &[4, 2]);
        assert_eq!(b.y_start.row(1), &[0.1, 1.9]);
        assert_eq!(b.y_target.row(0), &[0.1, 1.9]);
        assert!((b.y_scale[0] - 0.4).abs() < 1e-15);
        assert_eq!(make_pair_batch(&line(2)).unwrap().len(), 1);
        let flat = Trajectory::new(vec![0.0, 1.0], vec![1.0, 5.0, 2.0, 5.0], 2).unwrap();
        assert!(matches!(make_pair_batch(&flat), Err(Error::ConstantDimension(1))));
    }

    #[test]
    fn normalized_mse_examples() {
        let s = [2.0];
        let a = Tensor::vector(vec![3.0]);
        assert_eq!(normalized_mse(&a, &a, &s).unwrap().item().unwrap(), 0.0);
        let b = Tensor::vector(vec![1.0]);
        assert_eq!(normalized_mse(&a, &b, &s).unwrap().item().unwrap(), 1.0);
        let p = Tensor::matrix(2, 1, vec![4.0, 0.0]).unwrap();
        let o = Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(normalized_mse(&p, &o, &s).unwrap().item().unwrap(), 2.0);
        assert!(normalized_mse(&p, &o, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = ParamSet::new();
        p.push("w", Tensor::vector(vec![1.0, -2.0, 0.5])).unwrap();
        // loss = c·w has gradient c.
        let tape = Tape::new();
        let w = tape.params(&p);
        let c = tape.constant(Tensor::vector(vec![0.3, -40.0, 0.0]));
        let g = tape.backward(w[0].hadamard(&c).unwrap().sum()).unwrap();
        let mut st = AdamState::new(&p);
        adam_update(&mut p, &g, &mut st, 1e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS).unwrap();
        let w = p.get("w").unwrap().data();
        assert!((w[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((w[1] - (-2.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn sgd_step_on_quadratic() {
        // loss = Σ p², gradient 2p.
        let mut p = ParamSet::new();
        p.push("w", Tensor::vector(vec![3.0, -1.0])).unwrap();
        let tape = Tape::new();
        let v = tape.params(&p);
        let loss = v[0].square().sum();
        let g = tape.backward(loss).unwrap();
        sgd_update(&mut p, &g, 0.1).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[3.0 - 0.1 * 6.0, -1.0 + 0.1 * 2.0]);
    }

    #[test]
    fn one_epoch_runs_one_update() {
        let arch = Arch::PiNet {
            input_dim: 2,
            output_dim: 2,
            degree: 2,
            hidden_width: None,
        };
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let net = init_network(&arch, &cfg).unwrap();
        let out = train(&net, &line(6), &cfg).unwrap();
        assert_eq!(out.epochs_run, 1);
        assert_eq!(out.history.0.len(), 2);
        assert!(out.best_loss <= out.history.0[0].1);
        assert!(train(&net, &line(6), &TrainConfig { epochs: 0, ..cfg.clone() }).is_err());
    }

    #[test]
    fn config_json_field_names() {
        let v = serde_json::to_value(TrainConfig::default()).unwrap();
        for key in ["epochs", "learning_rate", "optimizer", "init_std", "substeps", "seed", "loss_log_every", "early_stop"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["optimizer"], "adam");
    }
}
