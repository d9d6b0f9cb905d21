//! Explicit Runge–Kutta integration.
//!
//! The fixed-step path ([`rk_step`], [`integrate_fixed_with`],
//! [`batched_pair_step`]) is generic over [`TensorLike`] so the same code
//! runs untracked or on a tape for backpropagation through the steps.
//! [`integrate_adaptive`] is a plain DOPRI5 integrator with step-size
//! control and dense output, used for data generation and rollouts.

use crate::error::{invalid, Error, Result};
use crate::tensor::{Tensor, TensorLike};

/// Explicit Runge–Kutta coefficients. `a` is strictly lower triangular and
/// stored by rows (`a[i]` has `i` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    /// Weights of the propagated solution.
    pub b: Vec<f64>,
    /// Embedded weights used only for the error estimate.
    pub b_hat: Option<Vec<f64>>,
}

impl ButcherTableau {
    /// Fehlberg's 4(5) pair, propagating the fourth-order solution.
    pub fn fehlberg45() -> Self {
        ButcherTableau {
            name: "rkf45",
            c: vec![0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0],
            a: vec![
                vec![],
                vec![1.0 / 4.0],
                vec![3.0 / 32.0, 9.0 / 32.0],
                vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
                vec![-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
            ],
            b: vec![25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0],
            b_hat: Some(vec![
                16.0 / 135.0,
                0.0,
                6656.0 / 12825.0,
                28561.0 / 56430.0,
                -9.0 / 50.0,
                2.0 / 55.0,
            ]),
        }
    }

    /// Dormand–Prince 5(4), propagating the fifth-order solution. The last
    /// stage is evaluated at the new point (first-same-as-last).
    pub fn dopri5() -> Self {
        ButcherTableau {
            name: "dopri5",
            c: vec![0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
            a: vec![
                vec![],
                vec![1.0 / 5.0],
                vec![3.0 / 40.0, 9.0 / 40.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
                vec![19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
                vec![
                    9017.0 / 3168.0,
                    -355.0 / 33.0,
                    46732.0 / 5247.0,
                    49.0 / 176.0,
                    -5103.0 / 18656.0,
                ],
                vec![
                    35.0 / 384.0,
                    0.0,
                    500.0 / 1113.0,
                    125.0 / 192.0,
                    -2187.0 / 6784.0,
                    11.0 / 84.0,
                ],
            ],
            b: vec![
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
                0.0,
            ],
            b_hat: Some(vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ]),
        }
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    /// Largest violation of `Σb = 1`, `Σb̂ = 1` and `cᵢ = Σⱼ aᵢⱼ`.
    pub fn consistency_error(&self) -> f64 {
        let mut worst = (self.b.iter().sum::<f64>() - 1.0).abs();
        if let Some(bh) = &self.b_hat {
            worst = worst.max((bh.iter().sum::<f64>() - 1.0).abs());
        }
        for (ci, row) in self.c.iter().zip(&self.a) {
            worst = worst.max((ci - row.iter().sum::<f64>()).abs());
        }
        worst
    }

    /// Stages needed for the propagated solution alone.
    fn solution_stages(&self) -> usize {
        self.b.iter().rposition(|&w| w != 0.0).map_or(0, |i| i + 1)
    }
}

fn check_finite<T: TensorLike>(k: &T, t: f64) -> Result<()> {
    let shape = k.shape();
    let width = *shape.last().unwrap_or(&1);
    k.with_data(|d| match d.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFiniteStage {
            t,
            component: i % width.max(1),
        }),
        None => Ok(()),
    })
}

/// Evaluates the first `count` stage derivatives.
fn rk_stages<T, F>(f: &F, t: f64, y: &T, h: f64, tab: &ButcherTableau, count: usize) -> Result<Vec<T>>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    let mut ks: Vec<T> = Vec::with_capacity(count);
    for i in 0..count {
        let ti = t + tab.c[i] * h;
        let k = if i == 0 {
            f(ti, y)?
        } else {
            let terms: Vec<(f64, &T)> = tab.a[i]
                .iter()
                .zip(&ks)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, k)| (h * a, k))
                .collect();
            f(ti, &y.lincomb(&terms)?)?
        };
        check_finite(&k, ti)?;
        ks.push(k);
    }
    Ok(ks)
}

fn combine<T: TensorLike>(y: &T, h: f64, weights: &[f64], ks: &[T]) -> Result<T> {
    let terms: Vec<(f64, &T)> = weights
        .iter()
        .zip(ks)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, k)| (h * w, k))
        .collect();
    y.lincomb(&terms)
}

/// One explicit step. When the tableau has embedded weights the second
/// element is `|h·Σ(bⱼ − b̂ⱼ)kⱼ|` per entry.
pub fn rk_step<T, F>(
    f: &F,
    t: f64,
    y: &T,
    h: f64,
    tab: &ButcherTableau,
) -> Result<(T, Option<Vec<f64>>)>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    if !(h > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    let count = if tab.b_hat.is_some() {
        tab.stages()
    } else {
        tab.solution_stages()
    };
    let ks = rk_stages(f, t, y, h, tab, count)?;
    let y_next = combine(y, h, &tab.b, &ks)?;
    let err = tab.b_hat.as_ref().map(|bh| {
        let n = y.with_data(<[f64]>::len);
        let mut e = vec![0.0; n];
        for ((k, b), bh) in ks.iter().zip(&tab.b).zip(bh) {
            let w = h * (b - bh);
            if w != 0.0 {
                k.with_data(|kd| {
                    for (ei, ki) in e.iter_mut().zip(kd) {
                        *ei += w * ki;
                    }
                });
            }
        }
        e.iter().map(|v| v.abs()).collect()
    });
    Ok((y_next, err))
}

/// One step computing only the propagated solution (skips stages that only
/// feed the error estimate).
pub fn rk_step_solution<T, F>(f: &F, t: f64, y: &T, h: f64, tab: &ButcherTableau) -> Result<T>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    if !(h > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    let ks = rk_stages(f, t, y, h, tab, tab.solution_stages())?;
    combine(y, h, &tab.b, &ks)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// States at every grid point, taking `substeps` equal steps per interval.
pub fn integrate_fixed_with<T, F>(
    f: &F,
    t_grid: &[f64],
    y0: T,
    substeps: usize,
    tab: &ButcherTableau,
) -> Result<Vec<T>>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    check_grid(t_grid)?;
    if substeps == 0 {
        return Err(invalid("substeps must be at least 1"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0);
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        let mut y = out.last().unwrap().clone();
        for s in 0..substeps {
            y = rk_step_solution(f, w[0] + s as f64 * h, &y, h, tab)?;
        }
        out.push(y);
    }
    Ok(out)
}

/// Untracked fixed-step integration with the Fehlberg fourth-order weights.
pub fn integrate_fixed<F>(f: &F, t_grid: &[f64], y0: &[f64], substeps: usize) -> Result<Trajectory>
where
    F: Fn(f64, &Tensor) -> Result<Tensor>,
{
    let tab = ButcherTableau::fehlberg45();
    let states = integrate_fixed_with(f, t_grid, Tensor::vector(y0.to_vec()), substeps, &tab)?;
    let data = states.into_iter().flat_map(Tensor::into_data).collect();
    Trajectory::new(t_grid.to_vec(), data, y0.len())
}

/// Advances every row of `y_start: [B, d]` from `spans[i].0` to
/// `spans[i].1` in one batch. Rows with different interval lengths are
/// handled by rescaling each row's time to the unit interval, which assumes
/// autonomous dynamics.
pub fn batched_pair_step<T, F>(
    f: &F,
    spans: &[(f64, f64)],
    y_start: &T,
    substeps: usize,
    tab: &ButcherTableau,
) -> Result<T>
where
    T: TensorLike,
    F: Fn(f64, &T) -> Result<T>,
{
    let shape = y_start.shape();
    if shape.len() != 2 || shape[0] != spans.len() {
        return Err(Error::ShapeMismatch {
            op: "batched_pair_step",
            lhs: shape,
            rhs: vec![spans.len()],
        });
    }
    if substeps == 0 {
        return Err(invalid("substeps must be at least 1"));
    }
    if spans.iter().any(|(a, b)| !(b > a)) {
        return Err(invalid("every pair needs t_end > t_start"));
    }
    let Some(&(t0, t1)) = spans.first() else {
        return Ok(y_start.clone());
    };
    let dt0 = t1 - t0;
    let uniform = spans.iter().all(|(a, b)| ((b - a) - dt0).abs() <= 1e-12 * dt0);

    let mut y = y_start.clone();
    if uniform {
        let h = dt0 / substeps as f64;
        for s in 0..substeps {
            y = rk_step_solution(f, t0 + s as f64 * h, &y, h, tab)?;
        }
    } else {
        let d = shape[1];
        let mut scale = Vec::with_capacity(spans.len() * d);
        for (a, b) in spans {
            scale.extend(std::iter::repeat_n(b - a, d));
        }
        let scale = y_start.lift(Tensor::new(shape, scale)?);
        let g = |t: f64, y: &T| f(t, y)?.hadamard(&scale);
        let h = 1.0 / substeps as f64;
        for s in 0..substeps {
            y = rk_step_solution(&g, s as f64 * h, &y, h, tab)?;
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Adaptive DOPRI5
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    /// Tolerances used for data generation and rollouts.
    fn default() -> Self {
        AdaptiveOptions {
            rtol: 1e-7,
            atol: 1e-9,
            max_steps: 1_000_000,
        }
    }
}

// Dense-output coefficients of the DOPRI5 continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn rms_norm(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n.max(1) as f64).sqrt()
}

/// DOPRI5 with the standard controller: a step is accepted when the
/// weighted RMS error is ≤ 1; the next step is scaled by
/// `0.9·err^(−1/5)` clamped to `[0.2, 10]`. States at `t_eval` come from
/// the fourth-order continuous extension of the accepted steps.
pub fn integrate_adaptive<F>(
    mut f: F,
    t_span: (f64, f64),
    y0: &[f64],
    opts: AdaptiveOptions,
    t_eval: &[f64],
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let (t0, t1) = t_span;
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(invalid("rtol and atol must be positive"));
    }
    if !(t1 >= t0) {
        return Err(invalid("t_span must be increasing"));
    }
    check_grid(t_eval)?;
    if t_eval[0] < t0 || *t_eval.last().unwrap() > t1 {
        return Err(invalid("t_eval must lie within t_span"));
    }
    let n = y0.len();
    let tab = ButcherTableau::dopri5();
    let b_hat = tab.b_hat.as_ref().unwrap();
    let span = t1 - t0;

    let mut out = Vec::with_capacity(t_eval.len() * n);
    let mut next_eval = 0;
    while next_eval < t_eval.len() && t_eval[next_eval] == t0 {
        out.extend_from_slice(y0);
        next_eval += 1;
    }
    if next_eval == t_eval.len() {
        return Trajectory::new(t_eval.to_vec(), out, n);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    let mut h = initial_step(&mut f, t, &y, &k1, opts, span)?;
    let mut steps = 0usize;

    let mut ks: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage_y = vec![0.0; n];
    while next_eval < t_eval.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::MaxSteps(opts.max_steps));
        }
        if h < 1e-14 * span {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        ks[0].copy_from_slice(&k1);
        let mut finite = true;
        for i in 1..7 {
            stage_y.copy_from_slice(&y);
            for (j, &a) in tab.a[i].iter().enumerate() {
                if a != 0.0 {
                    for (s, k) in stage_y.iter_mut().zip(&ks[j]) {
                        *s += h * a * k;
                    }
                }
            }
            let k = f(t + tab.c[i] * h, &stage_y)?;
            finite &= k.iter().all(|v| v.is_finite());
            ks[i] = k;
        }
        // The seventh stage input is the fifth-order solution.
        let y_new = stage_y.clone();

        let err = if finite && y_new.iter().all(|v| v.is_finite()) {
            rms_norm(
                (0..n).map(|c| {
                    let e: f64 = (0..7).map(|j| h * (tab.b[j] - b_hat[j]) * ks[j][c]).sum();
                    e / (opts.atol + opts.rtol * y[c].abs().max(y_new[c].abs()))
                }),
                n,
            )
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            // Continuous extension coefficients for this step.
            let mut r = vec![[0.0; 5]; n];
            for c in 0..n {
                let dy = y_new[c] - y[c];
                let bspl = h * ks[0][c] - dy;
                r[c] = [
                    y[c],
                    dy,
                    bspl,
                    dy - h * ks[6][c] - bspl,
                    h * (D1 * ks[0][c]
                        + D3 * ks[2][c]
                        + D4 * ks[3][c]
                        + D5 * ks[4][c]
                        + D6 * ks[5][c]
                        + D7 * ks[6][c]),
                ];
            }
            while next_eval < t_eval.len() && t_eval[next_eval] <= t_new {
                let te = t_eval[next_eval];
                if te == t_new {
                    out.extend_from_slice(&y_new);
                } else {
                    let th = (te - t) / h;
                    let th1 = 1.0 - th;
                    out.extend(
                        r.iter()
                            .map(|r| r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))),
                    );
                }
                next_eval += 1;
            }
            t = t_new;
            y = y_new;
            k1 = ks[6].clone();
            let factor = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
            };
            h *= factor;
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= factor;
        }
    }
    Trajectory::new(t_eval.to_vec(), out, n)
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: AdaptiveOptions,
    span: f64,
) -> Result<f64>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let d0 = rms_norm(y0.iter().zip(&sc).map(|(y, s)| y / s), n);
    let d1 = rms_norm(f0.iter().zip(&sc).map(|(v, s)| v / s), n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 || !d1.is_finite() {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, v)| y + h0 * v).collect();
    let f1 = f(t0 + h0, &y1)?;
    let d2 = rms_norm(
        f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| (a - b) / s),
        n,
    ) / h0;
    let h1 = if !d2.is_finite() {
        h0 * 1e-3
    } else if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).max(f64::MIN_POSITIVE))
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| a + i as f64 * step).collect();
            v[n - 1] = b;
            v
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

/// Time grid with one state row per time point.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    dim: usize,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<f64>, dim: usize) -> Result<Self> {
        if states.len() != times.len() * dim {
            return Err(Error::ShapeMismatch {
                op: "Trajectory::new",
                lhs: vec![times.len(), dim],
                rhs: vec![states.len()],
            });
        }
        check_grid(&times)?;
        if let Some(i) = states.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStage {
                t: times[i / dim.max(1)],
                component: i % dim.max(1),
            });
        }
        Ok(Trajectory { times, dim, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// All states as a `[T, d]` tensor.
    pub fn states_tensor(&self) -> Tensor {
        Tensor::matrix(self.len(), self.dim, self.states.clone()).expect("consistent shape")
    }

    /// Per-dimension `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|j| {
                self.column(j)
                    .into_iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect()
    }

    /// CSV with header `header[0],header[1],…`; floats in shortest
    /// round-trip form.
    pub fn to_csv(&self, header: &[String]) -> Result<String> {
        if header.len() != self.dim + 1 {
            return Err(invalid(format!(
                "CSV header needs {} columns, got {}",
                self.dim + 1,
                header.len()
            )));
        }
        let mut s = header.join(",");
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&fmt_f64(self.times[i]));
            for v in self.state(i) {
                s.push(',');
                s.push_str(&fmt_f64(*v));
            }
            s.push('\n');
        }
        Ok(s)
    }

    /// Parses CSV written by [`Trajectory::to_csv`], returning the header.
    pub fn from_csv(text: &str) -> Result<(Trajectory, Vec<String>)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        if header.len() < 2 {
            return Err(Error::Parse("CSV needs a time column and at least one state".into()));
        }
        let dim = header.len() - 1;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 1)))?;
            if vals.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} columns, expected {}",
                    lineno + 1,
                    vals.len(),
                    dim + 1
                )));
            }
            times.push(vals[0]);
            states.extend_from_slice(&vals[1..]);
        }
        Ok((Trajectory::new(times, states, dim)?, header))
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &Tensor) -> Result<Tensor> {
        Ok(y.scale(-1.0))
    }

    #[test]
    fn tableaus_are_consistent() {
        for tab in [ButcherTableau::fehlberg45(), ButcherTableau::dopri5()] {
            assert!(tab.consistency_error() < 1e-14, "{}", tab.name);
            for (i, row) in tab.a.iter().enumerate() {
                assert_eq!(row.len(), i);
            }
        }
    }

    #[test]
    fn zero_field_step() {
        let y = Tensor::vector(vec![1.0, -2.0]);
        let zero = |_t: f64, y: &Tensor| Ok(y.scale(0.0));
        let (next, err) = rk_step(&zero, 0.0, &y, 0.3, &ButcherTableau::fehlberg45()).unwrap();
        assert_eq!(next, y);
        assert_eq!(err.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_field_step_is_exact() {
        let y = Tensor::vector(vec![0.5]);
        let one = |_t: f64, _y: &Tensor| Ok(Tensor::vector(vec![1.0]));
        for tab in [ButcherTableau::fehlberg45(), ButcherTableau::dopri5()] {
            let (next, _) = rk_step(&one, 0.0, &y, 0.25, &tab).unwrap();
            assert!((next.data()[0] - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn fehlberg_fourth_order_single_step() {
        let y = Tensor::vector(vec![1.0]);
        let next = rk_step_solution(&decay, 0.0, &y, 0.1, &ButcherTableau::fehlberg45()).unwrap();
        assert!((next.data()[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn non_finite_stage_reports_component() {
        let y = Tensor::vector(vec![1.0, 2.0]);
        let bad = |_t: f64, _y: &Tensor| Ok(Tensor::vector(vec![0.0, f64::NAN]));
        let err = rk_step_solution(&bad, 0.5, &y, 0.1, &ButcherTableau::fehlberg45()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteStage { t, component: 1 } if t == 0.5));
    }

    #[test]
    fn fixed_zero_field_is_constant() {
        let zero = |_t: f64, y: &Tensor| Ok(y.scale(0.0));
        let traj = integrate_fixed(&zero, &linspace(0.0, 1.0, 5), &[3.0, 4.0], 2).unwrap();
        for i in 0..traj.len() {
            assert_eq!(traj.state(i), &[3.0, 4.0]);
        }
        assert!(integrate_fixed(&zero, &[0.0, 0.0], &[1.0], 1).is_err());
        assert!(integrate_fixed(&zero, &[0.0, 1.0], &[1.0], 0).is_err());
    }

    #[test]
    fn linear_system_matches_matrix_exponential() {
        // A = [[−0.5, 1], [−1, −0.5]]: exp(tA) = e^{−t/2}·rotation(t).
        let a = Tensor::matrix(2, 2, vec![-0.5, 1.0, -1.0, -0.5]).unwrap();
        let f = |_t: f64, y: &Tensor| a.matmul(y);
        let truth = |t: f64| {
            let e = (-0.5 * t).exp();
            [e * (t.cos() + t.sin()), e * (t.cos() - t.sin())]
        };
        let err = |substeps: usize| {
            let traj = integrate_fixed(&f, &[0.0, 1.0], &[1.0, 1.0], substeps).unwrap();
            let want = truth(1.0);
            traj.state(1)
                .iter()
                .zip(want)
                .map(|(g, w)| (g - w).abs())
                .fold(0.0, f64::max)
        };
        let (e10, e20) = (err(10), err(20));
        assert!(e10 < 1e-5, "{e10}");
        let ratio = e10 / e20;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn adaptive_exponential_decay() {
        let traj = integrate_adaptive(
            |_t, y: &[f64]| Ok(vec![-y[0]]),
            (0.0, 1.0),
            &[1.0],
            AdaptiveOptions::default(),
            &linspace(0.0, 1.0, 11),
        )
        .unwrap();
        for (i, &t) in traj.times().iter().enumerate() {
            assert!((traj.state(i)[0] - (-t).exp()).abs() < 1e-6);
        }
        assert!((traj.state(10)[0] - 0.36787944).abs() < 1e-6);
    }

    #[test]
    fn adaptive_harmonic_period() {
        let period = 2.0 * std::f64::consts::PI;
        let traj = integrate_adaptive(
            |_t, y: &[f64]| Ok(vec![y[1], -y[0]]),
            (0.0, period),
            &[1.0, 0.0],
            AdaptiveOptions::default(),
            &linspace(0.0, period, 50),
        )
        .unwrap();
        let end = traj.state(49);
        assert!((end[0] - 1.0).abs() < 1e-5 && end[1].abs() < 1e-5, "{end:?}");
        // Dense output between accepted steps.
        for (i, &t) in traj.times().iter().enumerate() {
            assert!((traj.state(i)[0] - t.cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn adaptive_reports_blow_up() {
        // dy/dt = y² from y = 1 blows up at t = 1.
        let err = integrate_adaptive(
            |_t, y: &[f64]| Ok(vec![y[0] * y[0]]),
            (0.0, 2.0),
            &[1.0],
            AdaptiveOptions::default(),
            &[0.0, 2.0],
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::StepUnderflow { .. } | Error::MaxSteps(_)),
            "{err}"
        );
    }

    #[test]
    fn adaptive_validates_inputs() {
        let f = |_t: f64, y: &[f64]| Ok(y.to_vec());
        let o = AdaptiveOptions::default();
        assert!(integrate_adaptive(f, (0.0, 1.0), &[1.0], o, &[0.0, 2.0]).is_err());
        assert!(integrate_adaptive(f, (0.0, 1.0), &[1.0], o, &[0.5, 0.2]).is_err());
        let bad = AdaptiveOptions { rtol: 0.0, ..o };
        assert!(integrate_adaptive(f, (0.0, 1.0), &[1.0], bad, &[0.0]).is_err());
        // Zero-length span echoes the initial state.
        let traj = integrate_adaptive(f, (2.0, 2.0), &[7.0], o, &[2.0]).unwrap();
        assert_eq!(traj.state(0), &[7.0]);
    }

    #[test]
    fn batched_equals_sequential() {
        let f = |_t: f64, y: &Tensor| -> Result<Tensor> {
            // Lotka-Volterra on a batch.
            let d = y.data();
            let mut out = Vec::with_capacity(d.len());
            for r in d.chunks(2) {
                out.extend([1.5 * r[0] - r[0] * r[1], -3.0 * r[1] + r[0] * r[1]]);
            }
            Tensor::new(y.shape().to_vec(), out)
        };
        let tab = ButcherTableau::fehlberg45();
        let starts = [[1.0, 1.0], [2.0, 0.5], [0.3, 3.0]];
        let spans = [(0.0, 0.05), (0.05, 0.1), (0.1, 0.15)];
        let batch = Tensor::from_rows(&starts).unwrap();
        let got = batched_pair_step(&f, &spans, &batch, 2, &tab).unwrap();
        for (i, (s, span)) in starts.iter().zip(&spans).enumerate() {
            let single = Tensor::from_rows(&[*s]).unwrap();
            let seq = integrate_fixed_with(&f, &[span.0, span.1], single, 2, &tab).unwrap();
            for (g, w) in got.row(i).iter().zip(seq[1].data()) {
                assert!((g - w).abs() <= 1e-14 * w.abs().max(1.0));
            }
        }
        // Non-uniform intervals go through time rescaling.
        let spans = [(0.0, 0.05), (0.05, 0.2), (0.2, 0.21)];
        let got = batched_pair_step(&f, &spans, &batch, 3, &tab).unwrap();
        for (i, (s, span)) in starts.iter().zip(&spans).enumerate() {
            let single = Tensor::from_rows(&[*s]).unwrap();
            let seq = integrate_fixed_with(&f, &[span.0, span.1], single, 3, &tab).unwrap();
            for (g, w) in got.row(i).iter().zip(seq[1].data()) {
                assert!((g - w).abs() <= 1e-14 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
        let zero = |_t: f64, y: &Tensor| Ok(y.scale(0.0));
        assert_eq!(batched_pair_step(&zero, &spans, &batch, 2, &tab).unwrap(), batch);
    }

    #[test]
    fn csv_round_trip() {
        let traj = Trajectory::new(vec![0.0, 0.1, 0.2], vec![1.0, 2.0, 1e-7, 3.5, 0.1, -2.0], 2).unwrap();
        let header = vec!["t".to_string(), "x".to_string(), "y".to_string()];
        let csv = traj.to_csv(&header).unwrap();
        assert!(csv.starts_with("t,x,y\n0.0,1.0,2.0\n"));
        let (back, h) = Trajectory::from_csv(&csv).unwrap();
        assert_eq!(back, traj);
        assert_eq!(h, header);
        assert!(Trajectory::from_csv("t,x\n0,1\n1\n").is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![1.0, 1.0], 1).is_err());
        assert!(Trajectory::new(vec![0.0], vec![f64::NAN], 1).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 10.0, 200);
        assert_eq!(v.len(), 200);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[199], 10.0);
    }
}
