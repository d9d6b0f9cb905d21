#![allow(dead_code)]

use polyode::models::{Activation, Arch, Network};
use polyode::ode::{integrate_fixed, rk_step_solution, ButcherTableau};
use polyode::poly::{expand_pinet, default_var_names, MultiPoly};
use polyode::tensor::{finite_diff_check, ParamSet, Tape, Tensor, TensorLike, Var};
use polyode::train::{normalized_mse, train, TrainConfig};
use polyode::ode::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Degree-2 π-net with hidden units `x·y + x`, `x`, `y` that reproduces
/// Lotka-Volterra exactly.
pub fn exact_lv_net() -> Network {
    let arch = Arch::PiNet {
        input_dim: 2,
        output_dim: 2,
        degree: 2,
        hidden_width: Some(3),
    };
    let mut net = Network::zeros(&arch).unwrap();
    let set = |net: &mut Network, name: &str, data: Vec<f64>| {
        let p = net.params_mut();
        let i = p.names().iter().position(|n| n == name).unwrap();
        p.values_mut()[i].data_mut().copy_from_slice(&data);
    };
    set(&mut net, "stage1.weight", vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    set(&mut net, "stage2.weight", vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    set(&mut net, "output.weight", vec![-1.0, 2.5, 0.0, 1.0, -1.0, -3.0]);
    net
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Largest finite-difference relative error over π-net and MLP forward
/// losses.
pub fn model_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let archs = [
        Arch::PiNet {
            input_dim: 2,
            output_dim: 2,
            degree: 4,
            hidden_width: Some(5),
        },
        Arch::Mlp {
            widths: vec![2, 6, 5, 2],
            activation: Activation::Tanh,
        },
        Arch::Mlp {
            widths: vec![2, 6, 2],
            activation: Activation::Relu,
        },
    ];
    let mut worst: f64 = 0.0;
    for (i, arch) in archs.iter().enumerate() {
        let net = Network::init(arch, 0.5, 11 + i as u64).unwrap();
        let x = random_tensor(&mut rng, &[4, 2], 1.0);
        let target = random_tensor(&mut rng, &[4, 2], 1.0);
        let err = finite_diff_check(
            |tape: &Tape, p: &[Var]| {
                let out = net.forward_with(p, &tape.constant(x.clone()))?;
                let diff = out.sub(&tape.constant(target.clone()))?;
                Ok(diff.square().mean())
            },
            net.params(),
            1e-5,
        )
        .unwrap();
        worst = worst.max(err);
    }
    worst
}

/// Finite-difference check through three fixed RKF45 steps of a π-net
/// right-hand side.
pub fn rollout_gradient_error() -> f64 {
    let arch = Arch::PiNet {
        input_dim: 2,
        output_dim: 2,
        degree: 3,
        hidden_width: Some(4),
    };
    let net = Network::init(&arch, 0.3, 5).unwrap();
    let y0 = Tensor::matrix(2, 2, vec![0.5, -0.3, 1.0, 0.2]).unwrap();
    let target = Tensor::matrix(2, 2, vec![0.4, -0.1, 0.9, 0.5]).unwrap();
    let tab = ButcherTableau::fehlberg45();
    finite_diff_check(
        |tape: &Tape, p: &[Var]| {
            let y = three_steps(&net, p, tape.constant(y0.clone()), &tab)?;
            normalized_mse(&y, &tape.constant(target.clone()), &[1.5, 0.7])
        },
        net.params(),
        1e-5,
    )
    .unwrap()
}

fn three_steps<'t>(
    net: &Network,
    p: &[Var<'t>],
    mut y: Var<'t>,
    tab: &ButcherTableau,
) -> polyode::Result<Var<'t>> {
    let f = |_t: f64, y: &Var<'t>| net.forward_with(p, y);
    for s in 0..3 {
        y = rk_step_solution(&f, s as f64 * 0.1, &y, 0.1, tab)?;
    }
    Ok(y)
}

/// Smallest `log₂(e(h)/e(h/2))` of the fixed-step path on `dy/dt = −y`
/// over `h ∈ {0.2, 0.1, 0.05}` integrated to `t = 1`.
pub fn rkf45_observed_order() -> f64 {
    let f = |_t: f64, y: &Tensor| Ok(y.scale(-1.0));
    let err = |h: f64| {
        let steps = (1.0 / h).round() as usize;
        let traj = integrate_fixed(&f, &[0.0, 1.0], &[1.0], steps).unwrap();
        (traj.state(1)[0] - (-1.0f64).exp()).abs()
    };
    let e: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| err(h)).collect();
    e.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min)
}

pub fn tableau_consistency() -> f64 {
    ButcherTableau::fehlberg45()
        .consistency_error()
        .max(ButcherTableau::dopri5().consistency_error())
}

/// Largest mismatch between π-net forward and its expansion over random
/// nets with `d, k ≤ 3`, `N ≤ 6`, relative to `Σ|terms|`.
pub fn expansion_error(seed: u64, d: usize, k: usize, degree: usize) -> f64 {
    let arch = Arch::PiNet {
        input_dim: d,
        output_dim: d,
        degree,
        hidden_width: Some(k),
    };
    let net = Network::init(&arch, 0.8, seed).unwrap();
    let Network::PiNet(p) = &net else { unreachable!() };
    let pv = expand_pinet(p, &default_var_names(d)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fwd = net.forward(&Tensor::vector(x.clone())).unwrap();
        for (c, comp) in pv.components().iter().enumerate() {
            let e = comp.eval(&x).unwrap();
            let scale = comp.abs_eval(&x).max(fwd.data()[c].abs()).max(1e-300);
            worst = worst.max((e - fwd.data()[c]).abs() / scale);
        }
    }
    worst
}

pub fn expansion_error_sweep() -> f64 {
    let mut worst: f64 = 0.0;
    let mut seed = 0;
    for d in 1..=3 {
        for k in 1..=3 {
            for n in 1..=6 {
                seed += 1;
                worst = worst.max(expansion_error(seed, d, k, n));
            }
        }
    }
    worst
}

pub fn random_poly(rng: &mut ChaCha8Rng, d: usize, terms: usize, max_deg: u32) -> MultiPoly {
    let t: Vec<(Vec<u32>, f64)> = (0..terms)
        .map(|_| {
            let e = (0..d).map(|_| rng.random_range(0..=max_deg)).collect();
            (e, rng.random_range(-3.0..3.0))
        })
        .collect();
    MultiPoly::from_terms(d, t).unwrap()
}

/// Largest coefficient mismatch of `ab − ba` and `(ab)c − a(bc)`.
pub fn poly_law_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=3);
    let a = random_poly(&mut rng, d, 4, 3);
    let b = random_poly(&mut rng, d, 4, 3);
    let c = random_poly(&mut rng, d, 3, 2);
    let diff = |p: &MultiPoly, q: &MultiPoly| -> f64 {
        let scale = p.max_abs_coeff().max(q.max_abs_coeff()).max(1.0);
        p.sub(q).unwrap().max_abs_coeff() / scale
    };
    let comm = diff(&a.mul(&b).unwrap(), &b.mul(&a).unwrap());
    let assoc = diff(
        &a.mul(&b).unwrap().mul(&c).unwrap(),
        &a.mul(&b.mul(&c).unwrap()).unwrap(),
    );
    comm.max(assoc)
}

/// Prune is idempotent and raising the threshold never adds terms.
pub fn prune_laws_hold(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_poly(&mut rng, 2, 8, 4);
    let t1 = rng.random_range(0.0..2.0);
    let t2 = t1 + rng.random_range(0.0..2.0);
    let once = p.prune(t1);
    once.prune(t1) == once && p.prune(t2).terms().all(|(m, _)| once.coeff(m) != 0.0)
}

/// The defining examples of the normalized MSE plus non-negativity.
pub fn loss_identities_hold() -> bool {
    let s = [2.0, 0.5];
    let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let val = |p: &Tensor, o: &Tensor| normalized_mse(p, o, &s).unwrap().item().unwrap();
    let zero = val(&a, &a) == 0.0;
    // Entry (0,0) off by one scale, entry (1,1) off by two.
    let b = Tensor::matrix(2, 2, vec![3.0, 2.0, 3.0, 5.0]).unwrap();
    let mixed = (val(&b, &a) - (1.0 + 4.0) / 4.0).abs() < 1e-15;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nonneg = (0..50).all(|_| {
        let p = random_tensor(&mut rng, &[3, 2], 5.0);
        let o = random_tensor(&mut rng, &[3, 2], 5.0);
        val(&p, &o) >= 0.0
    });
    zero && mixed && nonneg
}

/// Two identical short training runs produce identical loss histories.
pub fn seed_determinism_holds() -> bool {
    let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
    let s: Vec<f64> = t.iter().flat_map(|&t| [t.cos(), t.sin()]).collect();
    let traj = Trajectory::new(t, s, 2).unwrap();
    let arch = Arch::PiNet {
        input_dim: 2,
        output_dim: 2,
        degree: 3,
        hidden_width: None,
    };
    let cfg = TrainConfig {
        epochs: 25,
        loss_log_every: 1,
        seed: 42,
        ..TrainConfig::default()
    };
    let run = || {
        let net = polyode::train::init_network(&arch, &cfg).unwrap();
        let out = train(&net, &traj, &cfg).unwrap();
        let bits: Vec<(usize, u64)> = out.history.0.iter().map(|(e, l)| (*e, l.to_bits())).collect();
        (bits, out.network.to_json().unwrap())
    };
    run() == run()
}

pub fn params_bits(p: &ParamSet) -> Vec<u64> {
    p.values().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
}
