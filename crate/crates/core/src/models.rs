//! Network architectures used as ODE right-hand sides.
//!
//! [`PiNetV1`] chains affine stages with Hadamard products and skip
//! connections, so its output is an exact polynomial of its input:
//!
//! ```text
//! h₁ = W₁x + b₁
//! hₙ = (Wₙx + bₙ) ∘ hₙ₋₁ + hₙ₋₁      n = 2..N
//! y  = C·h_N + β
//! ```
//!
//! [`MlpNet`] is the conventional baseline: affine layers with tanh or relu
//! between them and an affine output layer.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::systems::AnalyticSystem;
use crate::tensor::{ParamSet, Tensor, TensorLike};

/// Initialization std for π-net weights and biases.
pub const PINET_INIT_STD: f64 = 0.01;
/// Initialization std for MLP weights and biases.
pub const MLP_INIT_STD: f64 = 0.00005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Architecture description, enough to allocate a parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    PiNet {
        input_dim: usize,
        output_dim: usize,
        degree: usize,
        /// `None` selects [`PiNetV1::default_width`].
        hidden_width: Option<usize>,
    },
    Mlp {
        widths: Vec<usize>,
        activation: Activation,
    },
}

impl Arch {
    pub fn default_init_std(&self) -> f64 {
        match self {
            Arch::PiNet { .. } => PINET_INIT_STD,
            Arch::Mlp { .. } => MLP_INIT_STD,
        }
    }
}

/// Parses `"2x50x50x50x2"`.
pub fn parse_widths(s: &str) -> Result<Vec<usize>> {
    let widths = s
        .split(['x', 'X'])
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| invalid(format!("bad layer widths `{s}`")))?;
    if widths.len() < 2 || widths.contains(&0) {
        return Err(invalid(format!("bad layer widths `{s}`")));
    }
    Ok(widths)
}

pub fn format_widths(widths: &[usize]) -> String {
    widths
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

fn check_input(shape: &[usize], dim: usize, op: &'static str) -> Result<()> {
    match shape {
        [_, d] if *d == dim => Ok(()),
        _ => Err(Error::ShapeMismatch {
            op,
            lhs: shape.to_vec(),
            rhs: vec![dim],
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiNetV1 {
    input_dim: usize,
    output_dim: usize,
    degree: usize,
    hidden_width: usize,
    params: ParamSet,
}

impl PiNetV1 {
    pub fn default_width(input_dim: usize, degree: usize) -> usize {
        (input_dim * (degree + 1)).max(8)
    }

    /// All-zero network.
    pub fn zeros(
        input_dim: usize,
        output_dim: usize,
        degree: usize,
        hidden_width: Option<usize>,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(invalid("π-net dimensions must be positive"));
        }
        if degree == 0 {
            return Err(invalid("π-net degree must be at least 1"));
        }
        let k = hidden_width.unwrap_or_else(|| Self::default_width(input_dim, degree));
        if k == 0 {
            return Err(invalid("π-net hidden width must be positive"));
        }
        let mut params = ParamSet::new();
        for n in 1..=degree {
            params.push(format!("stage{n}.weight"), Tensor::zeros(&[k, input_dim]))?;
            params.push(format!("stage{n}.bias"), Tensor::zeros(&[k]))?;
        }
        params.push("output.weight", Tensor::zeros(&[output_dim, k]))?;
        params.push("output.bias", Tensor::zeros(&[output_dim]))?;
        Ok(PiNetV1 {
            input_dim,
            output_dim,
            degree,
            hidden_width: k,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn hidden_width(&self) -> usize {
        self.hidden_width
    }
    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Stage `n` (1-based) weight `[k, d]` and bias `[k]`.
    pub fn stage(&self, n: usize) -> (&Tensor, &Tensor) {
        let v = self.params.values();
        (&v[2 * (n - 1)], &v[2 * (n - 1) + 1])
    }

    /// Output weight `[m, k]` and bias `[m]`.
    pub fn output(&self) -> (&Tensor, &Tensor) {
        let v = self.params.values();
        (&v[2 * self.degree], &v[2 * self.degree + 1])
    }

    /// Forward pass on a batch `x: [B, d]` with parameters in
    /// [`ParamSet`] order.
    pub fn forward_with<T: TensorLike>(&self, params: &[T], x: &T) -> Result<T> {
        check_input(&x.shape(), self.input_dim, "pinet_forward")?;
        let mut h = x.affine(&params[0], &params[1])?;
        for n in 2..=self.degree {
            let lin = x.affine(&params[2 * (n - 1)], &params[2 * (n - 1) + 1])?;
            let prod = lin.hadamard(&h)?;
            h = prod.add(&h)?;
        }
        h.affine(&params[2 * self.degree], &params[2 * self.degree + 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet {
    widths: Vec<usize>,
    activation: Activation,
    params: ParamSet,
}

impl MlpNet {
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid("an MLP needs at least two positive layer widths"));
        }
        let mut params = ParamSet::new();
        for (i, pair) in widths.windows(2).enumerate() {
            params.push(format!("layer{}.weight", i + 1), Tensor::zeros(&[pair[1], pair[0]]))?;
            params.push(format!("layer{}.bias", i + 1), Tensor::zeros(&[pair[1]]))?;
        }
        Ok(MlpNet {
            widths: widths.to_vec(),
            activation,
            params,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn forward_with<T: TensorLike>(&self, params: &[T], x: &T) -> Result<T> {
        check_input(&x.shape(), self.widths[0], "mlp_forward")?;
        let layers = self.widths.len() - 1;
        let mut h = x.affine(&params[0], &params[1])?;
        for l in 1..layers {
            h = match self.activation {
                Activation::Tanh => h.tanh(),
                Activation::Relu => h.relu(),
            };
            h = h.affine(&params[2 * l], &params[2 * l + 1])?;
        }
        Ok(h)
    }
}

/// A trainable network of either architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    PiNet(PiNetV1),
    Mlp(MlpNet),
}

impl Network {
    /// All-zero parameters for `arch`.
    pub fn zeros(arch: &Arch) -> Result<Self> {
        match arch {
            Arch::PiNet {
                input_dim,
                output_dim,
                degree,
                hidden_width,
            } => Ok(Network::PiNet(PiNetV1::zeros(
                *input_dim,
                *output_dim,
                *degree,
                *hidden_width,
            )?)),
            Arch::Mlp { widths, activation } => {
                Ok(Network::Mlp(MlpNet::zeros(widths, *activation)?))
            }
        }
    }

    /// Every weight and bias drawn from `Normal(0, std²)`, seeded.
    pub fn init(arch: &Arch, std: f64, seed: u64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(invalid("init std must be positive"));
        }
        let mut net = Network::zeros(arch)?;
        let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in net.params_mut().values_mut() {
            for v in t.data_mut() {
                *v = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    pub fn arch(&self) -> Arch {
        match self {
            Network::PiNet(p) => Arch::PiNet {
                input_dim: p.input_dim,
                output_dim: p.output_dim,
                degree: p.degree,
                hidden_width: Some(p.hidden_width),
            },
            Network::Mlp(m) => Arch::Mlp {
                widths: m.widths.clone(),
                activation: m.activation,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Network::PiNet(_) => "pinet",
            Network::Mlp(_) => "mlp",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Network::PiNet(p) => p.input_dim,
            Network::Mlp(m) => m.widths[0],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::PiNet(p) => p.output_dim,
            Network::Mlp(m) => *m.widths.last().unwrap(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Network::PiNet(p) => &p.params,
            Network::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Network::PiNet(p) => &mut p.params,
            Network::Mlp(m) => &mut m.params,
        }
    }

    /// Replaces the parameters; names and shapes must match.
    pub fn set_params(&mut self, params: ParamSet) -> Result<()> {
        let current = self.params();
        let same = current.len() == params.len()
            && current
                .iter()
                .zip(params.iter())
                .all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape());
        if !same {
            return Err(invalid("parameter set does not match the architecture"));
        }
        *self.params_mut() = params;
        Ok(())
    }

    pub fn forward_with<T: TensorLike>(&self, params: &[T], x: &T) -> Result<T> {
        match self {
            Network::PiNet(p) => p.forward_with(params, x),
            Network::Mlp(m) => m.forward_with(params, x),
        }
    }

    /// Untracked forward pass. Accepts a single input `[d]` or a batch
    /// `[B, d]` and returns the matching shape.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() == 1 {
            let d = x.len();
            let out = self.forward_with(self.params().values(), &x.clone().reshape(vec![1, d])?)?;
            let m = out.len();
            out.reshape(vec![m])
        } else {
            self.forward_with(self.params().values(), x)
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut params = BTreeMap::new();
        for (name, t) in self.params().iter() {
            if !t.all_finite() {
                return Err(invalid(format!("parameter `{name}` is not finite")));
            }
            params.insert(
                name.to_string(),
                ParamEntry {
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                },
            );
        }
        Ok(match self {
            Network::PiNet(p) => Checkpoint {
                arch_kind: "pinet".into(),
                input_dim: p.input_dim,
                output_dim: p.output_dim,
                degree: Some(p.degree),
                widths: None,
                activation: None,
                hidden_width: Some(p.hidden_width),
                params,
            },
            Network::Mlp(m) => Checkpoint {
                arch_kind: "mlp".into(),
                input_dim: m.widths[0],
                output_dim: *m.widths.last().unwrap(),
                degree: None,
                widths: Some(m.widths.clone()),
                activation: Some(m.activation),
                hidden_width: None,
                params,
            },
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch = match ck.arch_kind.as_str() {
            "pinet" => Arch::PiNet {
                input_dim: ck.input_dim,
                output_dim: ck.output_dim,
                degree: ck
                    .degree
                    .ok_or_else(|| Error::Parse("pinet checkpoint without degree".into()))?,
                hidden_width: ck.hidden_width,
            },
            "mlp" => {
                let widths = ck
                    .widths
                    .clone()
                    .ok_or_else(|| Error::Parse("mlp checkpoint without widths".into()))?;
                if widths.first() != Some(&ck.input_dim) || widths.last() != Some(&ck.output_dim)
                {
                    return Err(Error::Parse("mlp widths disagree with input/output dims".into()));
                }
                Arch::Mlp {
                    widths,
                    activation: ck.activation.unwrap_or(Activation::Tanh),
                }
            }
            other => return Err(Error::Parse(format!("unknown arch_kind `{other}`"))),
        };
        let mut net = Network::zeros(&arch)?;
        let mut loaded = ParamSet::new();
        for (name, t) in net.params().iter() {
            let entry = ck
                .params
                .get(name)
                .ok_or_else(|| Error::Parse(format!("checkpoint is missing `{name}`")))?;
            if entry.shape != t.shape() {
                return Err(Error::Parse(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    entry.shape,
                    t.shape()
                )));
            }
            loaded.push(name, Tensor::new(entry.shape.clone(), entry.data.clone())?)?;
        }
        if ck.params.len() != loaded.len() {
            return Err(Error::Parse("checkpoint has unexpected parameters".into()));
        }
        net.set_params(loaded)?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_checkpoint()?)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Network::from_checkpoint(&serde_json::from_str(s)?)
    }
}

/// On-disk model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arch_kind: String,
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_width: Option<usize>,
    pub params: BTreeMap<String, ParamEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Anything that can serve as an autonomous ODE right-hand side.
#[derive(Clone, Debug)]
pub enum Dynamics {
    Network(Network),
    System(AnalyticSystem),
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Network(n) => n.input_dim(),
            Dynamics::System(s) => s.dim(),
        }
    }

    /// `dy/dt` at a single state. `t` is accepted for interface symmetry;
    /// every model here is autonomous.
    pub fn rhs(&self, _t: f64, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Dynamics::Network(n) => Ok(n.forward(&Tensor::vector(y.to_vec()))?.into_data()),
            Dynamics::System(s) => s.rhs(y),
        }
    }

    /// `dy/dt` for a batch of states `[B, d]` (or a single state `[d]`).
    pub fn rhs_tensor(&self, _t: f64, y: &Tensor) -> Result<Tensor> {
        match self {
            Dynamics::Network(n) => n.forward(y),
            Dynamics::System(s) => {
                if y.shape().len() == 1 {
                    return Ok(Tensor::vector(s.rhs(y.data())?));
                }
                let d = s.dim();
                if y.shape()[1] != d {
                    return Err(Error::ShapeMismatch {
                        op: "rhs",
                        lhs: y.shape().to_vec(),
                        rhs: vec![d],
                    });
                }
                let mut out = Vec::with_capacity(y.len());
                for row in y.data().chunks_exact(d) {
                    out.extend(s.rhs(row)?);
                }
                Tensor::new(y.shape().to_vec(), out)
            }
        }
    }
}
