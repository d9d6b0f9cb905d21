//! Benchmark systems, dataset generation and evaluation metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::Dynamics;
use crate::ode::{fmt_f64, integrate_adaptive, linspace, AdaptiveOptions, Trajectory};
use crate::poly::{Monomial, MultiPoly, PolyVector};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    QuarticStatic,
    LotkaVolterra,
    DampedOscillator,
    VanDerPol,
    Sincos,
}

impl SystemId {
    pub const ALL: [SystemId; 5] = [
        SystemId::QuarticStatic,
        SystemId::LotkaVolterra,
        SystemId::DampedOscillator,
        SystemId::VanDerPol,
        SystemId::Sincos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::QuarticStatic => "quartic_static",
            SystemId::LotkaVolterra => "lotka_volterra",
            SystemId::DampedOscillator => "damped_oscillator",
            SystemId::VanDerPol => "van_der_pol",
            SystemId::Sincos => "sincos",
        }
    }

    /// A static function sampled at points rather than an ODE.
    pub fn is_static(self) -> bool {
        self == SystemId::QuarticStatic
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "quartic" | "quartic_static" => Ok(SystemId::QuarticStatic),
            "lotka_volterra" | "lv" => Ok(SystemId::LotkaVolterra),
            "damped_oscillator" | "damped" => Ok(SystemId::DampedOscillator),
            "van_der_pol" | "vdp" => Ok(SystemId::VanDerPol),
            "sincos" => Ok(SystemId::Sincos),
            _ => Err(Error::UnknownSystem(s.to_string())),
        }
    }
}

/// A ground-truth right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSystem {
    pub id: SystemId,
    /// Van der Pol damping; ignored by the other systems.
    pub mu: f64,
}

impl AnalyticSystem {
    pub fn new(id: SystemId) -> Self {
        AnalyticSystem { id, mu: 5.0 }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(AnalyticSystem::new(name.parse()?))
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn dim(&self) -> usize {
        if self.id.is_static() {
            1
        } else {
            2
        }
    }

    pub fn var_names(&self) -> Vec<String> {
        if self.id.is_static() {
            vec!["x".into()]
        } else {
            vec!["x".into(), "y".into()]
        }
    }

    /// Output labels: `f` for the static quartic, `dx/dt, dy/dt` otherwise.
    pub fn output_labels(&self) -> Vec<String> {
        if self.id.is_static() {
            vec!["f".into()]
        } else {
            vec!["dx/dt".into(), "dy/dt".into()]
        }
    }

    // The polynomial right-hand sides are written term by term in graded
    // order so they agree bit-for-bit with evaluating `truth_poly`.
    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                op: "rhs",
                lhs: vec![y.len()],
                rhs: vec![self.dim()],
            });
        }
        let x = y[0];
        Ok(match self.id {
            SystemId::QuarticStatic => {
                vec![5.0 * x.powi(2) + 16.0 * x.powi(3) + 3.0 * x.powi(4)]
            }
            SystemId::LotkaVolterra => {
                let y = y[1];
                vec![1.5 * x - x * y, -3.0 * y + x * y]
            }
            SystemId::DampedOscillator => {
                let y = y[1];
                vec![
                    -0.1 * x.powi(3) - 2.0 * y.powi(3),
                    2.0 * x.powi(3) - 0.1 * y.powi(3),
                ]
            }
            SystemId::VanDerPol => {
                let (y, mu) = (y[1], self.mu);
                vec![y, -x + mu * y - mu * (x.powi(2) * y)]
            }
            SystemId::Sincos => vec![y[1].cos(), -x.sin()],
        })
    }

    /// The exact polynomial form, or `None` for sincos.
    pub fn truth_poly(&self) -> Option<PolyVector> {
        let terms: Vec<Vec<(Vec<u32>, f64)>> = match self.id {
            SystemId::QuarticStatic => vec![vec![(vec![2], 5.0), (vec![3], 16.0), (vec![4], 3.0)]],
            SystemId::LotkaVolterra => vec![
                vec![(vec![1, 0], 1.5), (vec![1, 1], -1.0)],
                vec![(vec![0, 1], -3.0), (vec![1, 1], 1.0)],
            ],
            SystemId::DampedOscillator => vec![
                vec![(vec![3, 0], -0.1), (vec![0, 3], -2.0)],
                vec![(vec![3, 0], 2.0), (vec![0, 3], -0.1)],
            ],
            SystemId::VanDerPol => vec![
                vec![(vec![0, 1], 1.0)],
                vec![(vec![1, 0], -1.0), (vec![0, 1], self.mu), (vec![2, 1], -self.mu)],
            ],
            SystemId::Sincos => return None,
        };
        let d = self.dim();
        let comps = terms
            .into_iter()
            .map(|t| MultiPoly::from_terms(d, t))
            .collect::<Result<Vec<_>>>()
            .expect("well-formed truth terms");
        Some(
            PolyVector::new(comps, self.var_names())
                .expect("consistent variables")
                .with_labels(self.output_labels()),
        )
    }
}

/// One experiment of the benchmark matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub system: SystemId,
    /// Initial state; empty for the static quartic.
    pub y0: Vec<f64>,
    /// Time span, or the sampled `x` range for the static quartic.
    pub t_span: (f64, f64),
    pub num_points: usize,
    pub degrees: Vec<usize>,
    pub mlp_widths: Vec<usize>,
    /// Rollout horizon used for extrapolation checks.
    pub horizon: f64,
    /// Fixed RKF45 steps per observation interval during training.
    pub substeps: usize,
}

impl ExperimentSpec {
    pub fn standard(id: SystemId) -> Self {
        let two_d = vec![2, 50, 50, 50, 2];
        match id {
            SystemId::QuarticStatic => ExperimentSpec {
                system: id,
                y0: vec![],
                t_span: (-5.3, 2.2),
                num_points: 20,
                degrees: vec![4],
                mlp_widths: vec![1, 100, 100, 100, 1],
                horizon: 2.2,
                substeps: 1,
            },
            SystemId::LotkaVolterra => ExperimentSpec {
                system: id,
                y0: vec![1.0, 1.0],
                t_span: (0.0, 10.0),
                num_points: 200,
                degrees: vec![2, 3, 4],
                mlp_widths: two_d,
                horizon: 40.0,
                substeps: 2,
            },
            SystemId::DampedOscillator => ExperimentSpec {
                system: id,
                y0: vec![1.0, 1.0],
                t_span: (0.0, 25.0),
                num_points: 100,
                degrees: vec![3, 4],
                mlp_widths: two_d,
                horizon: 70.0,
                substeps: 4,
            },
            SystemId::VanDerPol => ExperimentSpec {
                system: id,
                y0: vec![2.0, 0.0],
                t_span: (0.0, 25.0),
                num_points: 200,
                degrees: vec![3, 4],
                mlp_widths: two_d,
                horizon: 80.0,
                substeps: 8,
            },
            SystemId::Sincos => ExperimentSpec {
                system: id,
                y0: vec![0.5, 1.0],
                t_span: (0.0, 40.0),
                num_points: 200,
                degrees: vec![4, 5, 6, 15],
                mlp_widths: two_d,
                horizon: 40.0,
                substeps: 2,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_points < 2 {
            return Err(invalid("num_points must be at least 2"));
        }
        if !(self.t_span.1 > self.t_span.0) {
            return Err(invalid("t_span must be increasing"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        let d = AnalyticSystem::new(self.system).dim();
        if !self.system.is_static() && self.y0.len() != d {
            return Err(invalid(format!("y0 needs {d} entries, got {}", self.y0.len())));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("y0 must be finite"));
        }
        Ok(())
    }

    pub fn system(&self) -> AnalyticSystem {
        AnalyticSystem::new(self.system)
    }

    /// CSV header for the generated dataset.
    pub fn csv_header(&self) -> Vec<String> {
        if self.system.is_static() {
            vec!["x".into(), "f".into()]
        } else {
            let mut h = vec!["t".to_string()];
            h.extend(self.system().var_names());
            h
        }
    }
}

/// Integrates the spec's system with DOPRI5 at uniformly spaced output
/// times. For the static quartic, tabulates `f(x)` instead (the "time"
/// column then holds `x`).
pub fn generate_dataset(spec: &ExperimentSpec) -> Result<Trajectory> {
    generate_dataset_with(spec, &spec.system(), AdaptiveOptions::default())
}

/// [`generate_dataset`] with explicit system parameters and tolerances.
pub fn generate_dataset_with(
    spec: &ExperimentSpec,
    sys: &AnalyticSystem,
    opts: AdaptiveOptions,
) -> Result<Trajectory> {
    spec.validate()?;
    if sys.id != spec.system {
        return Err(invalid("system does not match the experiment spec"));
    }
    let grid = linspace(spec.t_span.0, spec.t_span.1, spec.num_points);
    if spec.system.is_static() {
        let f = grid
            .iter()
            .map(|&x| sys.rhs(&[x]).map(|v| v[0]))
            .collect::<Result<Vec<_>>>()?;
        return Trajectory::new(grid, f, 1);
    }
    integrate_adaptive(
        |_t, y: &[f64]| sys.rhs(y),
        spec.t_span,
        &spec.y0,
        opts,
        &grid,
    )
}

// ---------------------------------------------------------------------------
// Coefficient report
// ---------------------------------------------------------------------------

/// Cap for the significant-digit metric (exact recovery).
pub const MAX_DIGITS: u32 = 16;

/// `floor(−log₁₀(|ĉ − c| / |c|))`, clamped to `[0, MAX_DIGITS]`.
pub fn significant_digits(recovered: f64, truth: f64) -> u32 {
    let rel = (recovered - truth).abs() / truth.abs();
    if rel == 0.0 {
        return MAX_DIGITS;
    }
    if !rel.is_finite() {
        return 0;
    }
    let d = (-rel.log10()).floor();
    if d <= 0.0 {
        0
    } else {
        (d as u32).min(MAX_DIGITS)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub monomial: String,
    pub truth: f64,
    pub recovered: Option<f64>,
    pub digits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousTerm {
    pub component: String,
    pub monomial: String,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientReport {
    /// `(component label, per-term rows)` in component order.
    pub components: Vec<(String, Vec<TermReport>)>,
    pub spurious: Vec<SpuriousTerm>,
}

impl CoefficientReport {
    /// Worst digit count over all truth terms.
    pub fn min_digits(&self) -> u32 {
        self.components
            .iter()
            .flat_map(|(_, rows)| rows.iter().map(|r| r.digits))
            .min()
            .unwrap_or(MAX_DIGITS)
    }

    pub fn max_spurious(&self) -> f64 {
        self.spurious
            .iter()
            .map(|s| s.coefficient.abs())
            .fold(0.0, f64::max)
    }

    pub fn to_value(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (label, rows) in &self.components {
            map.insert(label.clone(), serde_json::to_value(rows).expect("serializable"));
        }
        map.insert(
            "spurious".into(),
            serde_json::to_value(&self.spurious).expect("serializable"),
        );
        serde_json::Value::Object(map)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("serializable");
        s.push('\n');
        s
    }

    /// Plain-text table, one row per truth term.
    pub fn to_table(&self) -> String {
        let mut s = String::from("component  monomial  truth  recovered  digits\n");
        for (label, rows) in &self.components {
            for r in rows {
                let rec = r.recovered.map_or_else(|| "-".to_string(), fmt_f64);
                s.push_str(&format!(
                    "{label}  {}  {}  {rec}  {}\n",
                    r.monomial,
                    fmt_f64(r.truth),
                    r.digits
                ));
            }
        }
        for sp in &self.spurious {
            s.push_str(&format!(
                "{}  {}  spurious  {}\n",
                sp.component,
                sp.monomial,
                fmt_f64(sp.coefficient)
            ));
        }
        s
    }
}

pub fn coefficient_report(recovered: &PolyVector, truth: &PolyVector) -> Result<CoefficientReport> {
    let d = truth.var_names().len();
    if recovered.var_names().len() != d {
        return Err(Error::VarCountMismatch(d, recovered.var_names().len()));
    }
    if recovered.components().len() != truth.components().len() {
        return Err(invalid(format!(
            "component count mismatch: {} vs {}",
            recovered.components().len(),
            truth.components().len()
        )));
    }
    let vars = truth.var_names();
    let mut components = Vec::new();
    let mut spurious = Vec::new();
    for ((label, t), r) in truth
        .labels()
        .iter()
        .zip(truth.components())
        .zip(recovered.components())
    {
        let rows = t
            .terms()
            .map(|(m, c)| {
                let rec = r.terms().find(|(rm, _)| *rm == m).map(|(_, v)| v);
                TermReport {
                    monomial: m.render(vars, "·"),
                    truth: c,
                    recovered: rec,
                    digits: rec.map_or(0, |v| significant_digits(v, c)),
                }
            })
            .collect();
        components.push((label.clone(), rows));
        for (m, c) in r.terms() {
            if t.coeff(m) == 0.0 {
                spurious.push(SpuriousTerm {
                    component: label.clone(),
                    monomial: m.render(vars, "·"),
                    coefficient: c,
                });
            }
        }
    }
    Ok(CoefficientReport {
        components,
        spurious,
    })
}

/// Coefficient of a monomial given by its exponents, 0 when absent.
pub fn coeff_of(p: &MultiPoly, exponents: &[u32]) -> f64 {
    p.coeff(&Monomial::new(exponents.to_vec()))
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// Axis-aligned box in the `(x, y)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.1 > x.0 && y.1 > y.0) {
            return Err(invalid("region bounds must be increasing"));
        }
        Ok(Region { x, y })
    }

    pub fn square(half_width: f64) -> Self {
        Region {
            x: (-half_width, half_width),
            y: (-half_width, half_width),
        }
    }

    /// Bounding box of a two-state trajectory.
    pub fn bounding_box(traj: &Trajectory) -> Result<Self> {
        if traj.dim() != 2 {
            return Err(invalid("bounding box needs a two-state trajectory"));
        }
        let b = traj.bounds();
        Region::new(b[0], b[1])
    }

    /// The same box scaled about its center.
    pub fn expand(&self, factor: f64) -> Self {
        let grow = |(lo, hi): (f64, f64)| {
            let c = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo) * factor;
            (c - h, c + h)
        };
        Region {
            x: grow(self.x),
            y: grow(self.y),
        }
    }
}

/// Samples `(x, y, dx/dt, dy/dt)` on an `n × n` grid, `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub n: usize,
    pub region: Region,
    pub samples: Vec<[f64; 4]>,
}

impl VectorField {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,dxdt,dydt\n");
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2]),
                fmt_f64(p[3])
            ));
        }
        s
    }

    /// Root mean square of the difference over all nodes and both
    /// components. Both fields must share the grid.
    pub fn rms_error(&self, other: &VectorField) -> Result<f64> {
        if self.n != other.n || self.region != other.region {
            return Err(invalid("vector fields are sampled on different grids"));
        }
        let sq: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a[2] - b[2]).powi(2) + (a[3] - b[3]).powi(2))
            .sum();
        Ok((sq / (2 * self.samples.len()) as f64).sqrt())
    }
}

pub fn vector_field_grid(model: &Dynamics, region: Region, n: usize) -> Result<VectorField> {
    if model.dim() != 2 {
        return Err(invalid(format!(
            "vector fields need a two-state model, got dimension {}",
            model.dim()
        )));
    }
    if n < 2 {
        return Err(invalid("grid needs n >= 2"));
    }
    let xs = linspace(region.x.0, region.x.1, n);
    let ys = linspace(region.y.0, region.y.1, n);
    let mut pts = Vec::with_capacity(2 * n * n);
    for &y in &ys {
        for &x in &xs {
            pts.extend([x, y]);
        }
    }
    let batch = Tensor::matrix(n * n, 2, pts)?;
    let field = model.rhs_tensor(0.0, &batch)?;
    let samples = batch
        .data()
        .chunks_exact(2)
        .zip(field.data().chunks_exact(2))
        .map(|(p, v)| [p[0], p[1], v[0], v[1]])
        .collect();
    Ok(VectorField { n, region, samples })
}

/// RMS difference between two models' fields on `region`.
pub fn field_rms_error(a: &Dynamics, b: &Dynamics, region: Region, n: usize) -> Result<f64> {
    vector_field_grid(a, region, n)?.rms_error(&vector_field_grid(b, region, n)?)
}

// ---------------------------------------------------------------------------
// Limit cycle
// ---------------------------------------------------------------------------

/// Band that the late-time amplitude `max|x|` must fall in.
pub const LIMIT_CYCLE_BAND: (f64, f64) = (1.5, 2.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitCycleVerdict {
    Converged,
    Absent,
    IntegrationFailed,
}

impl fmt::Display for LimitCycleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitCycleVerdict::Converged => "converged",
            LimitCycleVerdict::Absent => "absent",
            LimitCycleVerdict::IntegrationFailed => "integration failed",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LimitCycleResult {
    pub verdict: LimitCycleVerdict,
    /// `max|x|` over the last quarter of the horizon.
    pub amplitude: Option<f64>,
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

/// Integrates from `y0` to `horizon` and checks that `max|x|` over the final
/// quarter lies in [`LIMIT_CYCLE_BAND`].
pub fn limit_cycle_check(model: &Dynamics, y0: [f64; 2], horizon: f64) -> Result<LimitCycleResult> {
    if model.dim() != 2 {
        return Err(invalid("limit-cycle check needs a two-state model"));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let points = 4001;
    let grid = linspace(0.0, horizon, points);
    let traj = match integrate_adaptive(
        |t, y: &[f64]| model.rhs(t, y),
        (0.0, horizon),
        &y0,
        AdaptiveOptions::default(),
        &grid,
    ) {
        Ok(t) => t,
        Err(e) => {
            return Ok(LimitCycleResult {
                verdict: LimitCycleVerdict::IntegrationFailed,
                amplitude: None,
                trajectory: None,
                error: Some(e.to_string()),
            })
        }
    };
    let start = 0.75 * horizon;
    let amp = traj
        .times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= start)
        .map(|(i, _)| traj.state(i)[0].abs())
        .fold(0.0, f64::max);
    let verdict = if (LIMIT_CYCLE_BAND.0..=LIMIT_CYCLE_BAND.1).contains(&amp) {
        LimitCycleVerdict::Converged
    } else {
        LimitCycleVerdict::Absent
    };
    Ok(LimitCycleResult {
        verdict,
        amplitude: Some(amp),
        trajectory: Some(traj),
        error: None,
    })
}

/// Maximum absolute state difference between two trajectories on the same
/// grid.
pub fn max_abs_diff(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times() != b.times() || a.dim() != b.dim() {
        return Err(invalid("trajectories are on different grids"));
    }
    Ok(a.states()
        .iter()
        .zip(b.states())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max))
}

/// Named parameters, for manifests and reports.
pub fn system_params(sys: &AnalyticSystem) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    if sys.id == SystemId::VanDerPol {
        m.insert("mu".to_string(), sys.mu);
    }
    m
}
