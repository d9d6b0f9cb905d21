//! Sparse multivariate polynomials over `f64` and the exact expansion of a
//! [`PiNetV1`] into one polynomial per output.
//!
//! Terms are kept in graded lexicographic order: ascending total degree,
//! and within a degree, larger exponents of earlier variables first
//! (`x² > x·y > y²`). Evaluation sums in that order, so results are
//! reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PiNetV1;

/// Exponent multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(num_vars: usize) -> Self {
        Monomial(vec![0; num_vars])
    }

    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }

    /// `x·y^2`, or `1` for the constant monomial.
    pub fn render(&self, var_names: &[String], sep: &str) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .zip(var_names)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, v)| if e == 1 { v.clone() } else { format!("{v}^{e}") })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(sep)
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial; no stored coefficient is exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    num_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl MultiPoly {
    pub fn zero(num_vars: usize) -> Self {
        MultiPoly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = MultiPoly::zero(num_vars);
        p.add_term(Monomial::one(num_vars), c);
        p
    }

    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut p = MultiPoly::zero(num_vars);
        p.add_term(Monomial::var(num_vars, i), 1.0);
        p
    }

    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = MultiPoly::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(Error::VarCountMismatch(num_vars, e.len()));
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    /// Affine polynomial `Σ wⱼ xⱼ + b`.
    pub fn affine(weights: &[f64], bias: f64) -> Self {
        let d = weights.len();
        let mut p = MultiPoly::constant(d, bias);
        for (j, &w) in weights.iter().enumerate() {
            p.add_term(Monomial::var(d, j), w);
        }
        p
    }

    /// Adds `c` to the coefficient of `m`, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.num_vars(), self.num_vars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_vars(&self, other: &MultiPoly) -> Result<()> {
        if self.num_vars != other.num_vars {
            return Err(Error::VarCountMismatch(self.num_vars, other.num_vars));
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.num_vars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), s * c);
        }
        out
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = MultiPoly::zero(self.num_vars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.num_vars {
            return Err(Error::VarCountMismatch(self.num_vars, x.len()));
        }
        Ok(self.terms.iter().fold(0.0, |acc, (m, &c)| acc + c * m.eval(x)))
    }

    /// `Σ |c·m(x)|`, the magnitude against which evaluation round-off is judged.
    pub fn abs_eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| (c * m.eval(x)).abs()).sum()
    }

    /// Drops every term with `|c| < abs_threshold`.
    pub fn prune(&self, abs_threshold: f64) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() >= abs_threshold)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }
}

/// One polynomial per output, over shared variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVector {
    components: Vec<MultiPoly>,
    var_names: Vec<String>,
    labels: Vec<String>,
}

impl PolyVector {
    /// Components are labelled `d<var>/dt` when there is one per variable.
    pub fn new(components: Vec<MultiPoly>, var_names: Vec<String>) -> Result<Self> {
        for c in &components {
            if c.num_vars() != var_names.len() {
                return Err(Error::VarCountMismatch(var_names.len(), c.num_vars()));
            }
        }
        let labels = if components.len() == var_names.len() {
            var_names.iter().map(|v| format!("d{v}/dt")).collect()
        } else {
            (0..components.len()).map(|i| format!("y{i}")).collect()
        };
        Ok(PolyVector {
            components,
            var_names,
            labels,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.components.len());
        self.labels = labels;
        self
    }

    pub fn components(&self) -> &[MultiPoly] {
        &self.components
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    pub fn prune(&self, abs_threshold: f64) -> PolyVector {
        PolyVector {
            components: self.components.iter().map(|p| p.prune(abs_threshold)).collect(),
            var_names: self.var_names.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Prunes each component at `rel × (largest |coefficient| in it)`.
    pub fn prune_relative(&self, rel: f64) -> PolyVector {
        PolyVector {
            components: self
                .components
                .iter()
                .map(|p| p.prune(rel * p.max_abs_coeff()))
                .collect(),
            var_names: self.var_names.clone(),
            labels: self.labels.clone(),
        }
    }

    /// One line per component: kept terms, then the terms under
    /// `rel_threshold × max|c|` in a `[dropped: …]` list.
    pub fn format(&self, sig_figs: usize, rel_threshold: f64) -> String {
        let sig_figs = sig_figs.clamp(1, 17);
        let mut out = String::new();
        for (label, p) in self.labels.iter().zip(&self.components) {
            let cut = rel_threshold * p.max_abs_coeff();
            let (kept, dropped): (Vec<_>, Vec<_>) = p.terms().partition(|(_, c)| c.abs() >= cut);
            out.push_str(label);
            out.push_str(" = ");
            out.push_str(&render_terms(&kept, &self.var_names, sig_figs));
            if !dropped.is_empty() {
                out.push_str("   [dropped: ");
                out.push_str(&render_terms(&dropped, &self.var_names, sig_figs));
                out.push(']');
            }
            out.push('\n');
        }
        out
    }

    pub fn to_export(&self) -> PolyExport {
        PolyExport {
            vars: self.var_names.clone(),
            components: self
                .components
                .iter()
                .map(|p| ComponentExport {
                    monomials: p
                        .terms()
                        .map(|(m, c)| TermExport {
                            exponents: m.exponents().to_vec(),
                            coefficient: c,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_export(e: &PolyExport) -> Result<Self> {
        let d = e.vars.len();
        let comps = e
            .components
            .iter()
            .map(|c| {
                MultiPoly::from_terms(
                    d,
                    c.monomials.iter().map(|t| (t.exponents.clone(), t.coefficient)),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        PolyVector::new(comps, e.vars.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_export())?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyExport {
    pub vars: Vec<String>,
    pub components: Vec<ComponentExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentExport {
    pub monomials: Vec<TermExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermExport {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

fn render_terms(terms: &[(&Monomial, f64)], vars: &[String], sig_figs: usize) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut s = String::new();
    for (i, (m, c)) in terms.iter().enumerate() {
        let neg = *c < 0.0;
        match (i, neg) {
            (0, true) => s.push('−'),
            (0, false) => {}
            (_, true) => s.push_str(" − "),
            (_, false) => s.push_str(" + "),
        }
        s.push_str(&format_sig(c.abs(), sig_figs));
        if m.degree() > 0 {
            s.push('·');
            s.push_str(&m.render(vars, "·"));
        }
    }
    s
}

/// Formats `v` with `sig` significant digits, keeping trailing zeros.
/// Values whose shortest exact representation already fits in `sig` digits
/// are printed in that shorter form (`1.5`, not `1.50000`).
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sig = sig.clamp(1, 17);
    let shortest = format!("{:e}", v.abs());
    let (mant, _) = shortest.split_once('e').unwrap();
    let short_digits = mant.chars().filter(char::is_ascii_digit).count();
    let repr = if short_digits <= sig {
        shortest
    } else {
        format!("{:.*e}", sig - 1, v.abs())
    };
    let (mant, exp) = repr.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let body = place_decimal(&digits, exp);
    if v < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

fn place_decimal(digits: &str, exp: i32) -> String {
    let n = digits.len() as i32;
    if !(-5..16).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        };
    }
    if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else if exp + 1 >= n {
        format!("{}{}", digits, "0".repeat((exp + 1 - n) as usize))
    } else {
        let (int, frac) = digits.split_at((exp + 1) as usize);
        format!("{int}.{frac}")
    }
}

/// Replays the π-net recurrence over polynomials. The result evaluates to
/// the same values as the network's forward pass, up to round-off.
pub fn expand_pinet(net: &PiNetV1, var_names: &[String]) -> Result<PolyVector> {
    let d = net.input_dim();
    if var_names.len() != d {
        return Err(Error::VarCountMismatch(d, var_names.len()));
    }
    let stage_polys = |n: usize| -> Vec<MultiPoly> {
        let (w, b) = net.stage(n);
        (0..net.hidden_width())
            .map(|i| MultiPoly::affine(w.row(i), b.data()[i]))
            .collect()
    };
    let mut hidden = stage_polys(1);
    for n in 2..=net.degree() {
        let lin = stage_polys(n);
        hidden = lin
            .iter()
            .zip(&hidden)
            .map(|(l, h)| l.mul(h)?.add(h))
            .collect::<Result<Vec<_>>>()?;
    }
    let (c, beta) = net.output();
    let mut comps = Vec::with_capacity(net.output_dim());
    for r in 0..net.output_dim() {
        let mut acc = MultiPoly::constant(d, beta.data()[r]);
        for (i, h) in hidden.iter().enumerate() {
            acc = acc.add(&h.scale(c.row(r)[i]))?;
        }
        comps.push(acc);
    }
    PolyVector::new(comps, var_names.to_vec())
}

/// Default variable names: `x`, `y`, `z`, then `x3`, `x4`, ….
pub fn default_var_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| match i {
            0 => "x".to_string(),
            1 => "y".to_string(),
            2 => "z".to_string(),
            _ => format!("x{i}"),
        })
        .collect()
}
