//! Index conditions and the existence/nonexistence theorems as concrete
//! inequalities over computed constants and declared bounds.
//!
//! Every comparison is an exact comparison of doubles; margins are reported
//! so that grid-resolution risk can be judged by the reader. A term whose
//! parameter (`λ_i` or `η_ij`) is zero contributes zero and needs no
//! declared bound.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::bounds::{BoundKind, DeclaredBounds};
use crate::cone::{c1_norm, DiscreteState};
use crate::constants::{ConeConstants, Constant};
use crate::problem::{Params, ProblemSpec};
use crate::solver::apply_T;
use crate::{par, Error, Result};

/// `J_{i,ρ}` coordinates `(x_1..x_n, y_1..y_n)`: values in `[θ_j ρ, ρ]` with
/// `θ_i = 0` and `θ_j = −1` otherwise, derivatives in `[−ρ, ρ]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignBox {
    pub component: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SignBox {
    pub fn new(component: usize, n: usize, rho: f64) -> Self {
        let mut lower = vec![-rho; 2 * n];
        lower[component] = 0.0;
        SignBox {
            component,
            lower,
            upper: vec![rho; 2 * n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionId {
    I1,
    I0,
    I0star,
    S,
    Sstar,
    NIJ,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionId::I1 => "I1",
            ConditionId::I0 => "I0",
            ConditionId::I0star => "I0star",
            ConditionId::S => "S",
            ConditionId::Sstar => "Sstar",
            ConditionId::NIJ => "NIJ",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    S,
    Sstar,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Mode::S),
            "Sstar" => Ok(Mode::Sstar),
            _ => Err(Error::Precondition(format!("mode must be S or Sstar, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Le => lhs <= rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Gt => lhs > rhs,
        }
    }

    /// Nonnegative when the non-strict version holds.
    pub fn margin(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Comparison::Le | Comparison::Lt => rhs - lhs,
            Comparison::Ge | Comparison::Gt => lhs - rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Parameter,
    Computed,
    DeclaredConstant,
    DeclaredBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub symbol: String,
    pub key: String,
    pub value: f64,
    pub source: Source,
}

/// One scalar inequality `lhs (cmp) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub label: String,
    pub component: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    pub lhs: f64,
    pub comparison: Comparison,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

impl Verdict {
    pub fn certified(self) -> bool {
        self == Verdict::Certified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroCheck {
    pub residual: f64,
    pub zero_is_solution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub report: &'static str,
    pub condition: ConditionId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus: Option<[f64; 2]>,
    pub verdict: Verdict,
    /// Label of the row with the smallest margin.
    pub binding: Option<String>,
    pub margin: f64,
    pub rows: Vec<Inequality>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_check: Option<ZeroCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    fn from_rows(condition: ConditionId, rho: Option<f64>, rows: Vec<Inequality>) -> Self {
        let verdict = if rows.iter().all(|r| r.holds) {
            Verdict::Certified
        } else {
            Verdict::NotCertified
        };
        let binding = rows
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .map(|r| (r.label.clone(), r.margin));
        Certificate {
            report: "certificate",
            condition,
            rho,
            annulus: None,
            verdict,
            margin: binding.as_ref().map_or(f64::INFINITY, |b| b.1),
            binding: binding.map(|b| b.0),
            rows,
            parts: Vec::new(),
            zero_check: None,
            conclusion: None,
            notes: Vec::new(),
        }
    }

    pub fn certified(&self) -> bool {
        self.verdict.certified()
    }

    pub fn row(&self, label: &str) -> Option<&Inequality> {
        self.rows
            .iter()
            .chain(self.parts.iter().flat_map(|p| p.rows.iter()))
            .find(|r| r.label == label)
    }

    /// Largest left-hand side among the rows.
    pub fn max_lhs(&self) -> f64 {
        self.rows.iter().map(|r| r.lhs).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Accumulates `Σ coefficient · constants · bound` with provenance.
struct Lhs<'a> {
    db: &'a DeclaredBounds,
    value: f64,
    provenance: Vec<Provenance>,
}

impl<'a> Lhs<'a> {
    fn new(db: &'a DeclaredBounds) -> Self {
        Lhs {
            db,
            value: 0.0,
            provenance: Vec::new(),
        }
    }

    fn term(
        &mut self,
        coef: (String, f64),
        constants: &[&Constant],
        bound: Option<(BoundKind, usize, Option<usize>)>,
    ) -> Result<()> {
        let (name, c) = coef;
        self.provenance.push(Provenance {
            symbol: name.clone(),
            key: name,
            value: c,
            source: Source::Parameter,
        });
        if c == 0.0 {
            return Ok(());
        }
        let mut v = c;
        for k in constants {
            v *= k.used;
            self.provenance.push(Provenance {
                symbol: k.symbol.clone(),
                key: k.key.clone(),
                value: k.used,
                source: if k.declared.is_some() {
                    Source::DeclaredConstant
                } else {
                    Source::Computed
                },
            });
        }
        if let Some((kind, i, j)) = bound {
            let b = self.db.require(kind, i, j)?;
            v *= b;
            self.provenance.push(Provenance {
                symbol: kind.symbol(i, j),
                key: format!(
                    "{}[{i}]{}",
                    kind.key(),
                    j.map(|j| format!("[{j}]")).unwrap_or_default()
                ),
                value: b,
                source: Source::DeclaredBound,
            });
        }
        self.value += v;
        Ok(())
    }

    fn finish(self, label: String, component: usize, order: Option<u8>, cmp: Comparison, rhs: f64) -> Inequality {
        Inequality {
            label,
            component,
            order,
            lhs: self.value,
            comparison: cmp,
            rhs,
            margin: cmp.margin(self.value, rhs),
            holds: cmp.holds(self.value, rhs),
            provenance: self.provenance,
        }
    }
}

fn lambda(p: &Params, i: usize) -> (String, f64) {
    (format!("lambda{}", i + 1), p.lambda[i])
}

fn eta(p: &Params, i: usize, j: usize) -> (String, f64) {
    (format!("eta{}{}", i + 1, j + 1), p.eta[i][j])
}

fn check_shape(cc: &ConeConstants, p: &Params) -> Result<()> {
    let ok = p.lambda.len() == cc.components.len()
        && p.eta.len() == cc.components.len()
        && cc
            .components
            .iter()
            .zip(&p.eta)
            .all(|(c, e)| c.gamma_sup.len() == e.len());
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition("parameter shape does not match the constants".into()))
    }
}

/// `λ_i f̄_{i,ρ}/m_{il} + Σ_j η_ij ‖γ_ij^{(l)}‖∞ h̄_{ij,ρ} ≤ ρ` for all
/// `i` and `l ∈ {0, 1}`.
#[allow(non_snake_case)]
pub fn check_I1(cc: &ConeConstants, db: &DeclaredBounds, p: &Params) -> Result<Certificate> {
    check_shape(cc, p)?;
    let rho = db.rho;
    let mut rows = Vec::new();
    for (i, c) in cc.components.iter().enumerate() {
        for l in 0..2u8 {
            let mut lhs = Lhs::new(db);
            let m = if l == 0 { &c.recip_m0 } else { &c.recip_m1 };
            lhs.term(lambda(p, i), &[m], Some((BoundKind::FHi, i, None)))?;
            for j in 0..c.gamma_sup.len() {
                let g = if l == 0 { &c.gamma_sup[j] } else { &c.dgamma_sup[j] };
                lhs.term(eta(p, i, j), &[g], Some((BoundKind::HHi, i, Some(j))))?;
            }
            rows.push(lhs.finish(format!("I1[i={},l={l}]", i + 1), i, Some(l), Comparison::Le, rho));
        }
    }
    Ok(Certificate::from_rows(ConditionId::I1, Some(rho), rows))
}

/// `min_i [λ_i δ̃_i c̃_i/M_i + Σ_j η_ij c_ij δ_ij ‖γ_ij‖∞] ≥ 1`.
#[allow(non_snake_case)]
pub fn check_I0(cc: &ConeConstants, db: &DeclaredBounds, p: &Params) -> Result<Certificate> {
    check_shape(cc, p)?;
    let rows = (0..cc.components.len())
        .map(|i| {
            delta_row(cc, db, p, i).map(|lhs| lhs.finish(format!("I0[i={}]", i + 1), i, None, Comparison::Ge, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Certificate::from_rows(ConditionId::I0, Some(db.rho), rows))
}

fn delta_row<'a>(cc: &ConeConstants, db: &'a DeclaredBounds, p: &Params, i: usize) -> Result<Lhs<'a>> {
    let c = &cc.components[i];
    let mut lhs = Lhs::new(db);
    lhs.term(lambda(p, i), &[&c.c_tilde, &c.recip_M], Some((BoundKind::DeltaTilde, i, None)))?;
    for j in 0..c.gamma_sup.len() {
        lhs.term(eta(p, i, j), &[&c.c_gamma[j], &c.gamma_sup[j]], Some((BoundKind::Delta, i, Some(j))))?;
    }
    Ok(lhs)
}

fn xi_row<'a>(cc: &ConeConstants, db: &'a DeclaredBounds, p: &Params, i: usize) -> Result<Lhs<'a>> {
    let c = &cc.components[i];
    let mut lhs = Lhs::new(db);
    lhs.term(lambda(p, i), &[&c.recip_m0], Some((BoundKind::XiTilde, i, None)))?;
    for j in 0..c.gamma_sup.len() {
        lhs.term(eta(p, i, j), &[&c.gamma_sup[j]], Some((BoundKind::Xi, i, Some(j))))?;
    }
    Ok(lhs)
}

/// `λ_{i0} f̲_{i0,ρ}/M_{i0} + Σ_j η_{i0 j} c_{i0 j} ‖γ_{i0 j}‖∞ h̲_{i0 j,ρ} ≥ ρ`
/// for one component `i0` (zero-based).
#[allow(non_snake_case)]
pub fn check_I0_star(cc: &ConeConstants, db: &DeclaredBounds, i0: usize, p: &Params) -> Result<Certificate> {
    check_shape(cc, p)?;
    let Some(c) = cc.components.get(i0) else {
        return Err(Error::Precondition(format!(
            "i0 = {} is not a component index",
            i0 + 1
        )));
    };
    let mut lhs = Lhs::new(db);
    lhs.term(lambda(p, i0), &[&c.recip_M], Some((BoundKind::FLo, i0, None)))?;
    for j in 0..c.gamma_sup.len() {
        lhs.term(eta(p, i0, j), &[&c.c_gamma[j], &c.gamma_sup[j]], Some((BoundKind::HLo, i0, Some(j))))?;
    }
    let row = lhs.finish(format!("I0star[i0={}]", i0 + 1), i0, None, Comparison::Ge, db.rho);
    Ok(Certificate::from_rows(ConditionId::I0star, Some(db.rho), vec![row]))
}

fn i0_star_any(cc: &ConeConstants, db: &DeclaredBounds, i0: Option<usize>, p: &Params) -> Result<Certificate> {
    if let Some(i0) = i0 {
        return check_I0_star(cc, db, i0, p);
    }
    // every component with a usable declaration; keep the best margin
    let mut best: Option<Certificate> = None;
    let mut first_err = None;
    for i in 0..cc.components.len() {
        match check_I0_star(cc, db, i, p) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.margin > b.margin) {
                    best = Some(c);
                }
            }
            Err(e @ Error::MissingBound { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| first_err.expect("at least one component"))
}

/// Existence of a solution in `K` with `ρ1 ≤ ‖u‖ ≤ ρ2`: mode `S` needs `I0`
/// at `ρ1`, mode `Sstar` needs `I0star` at `ρ1`; both need `I1` at `ρ2`.
/// Without `i0`, `Sstar` tries each component and keeps the best margin.
pub fn existence_certificate(
    spec: &ProblemSpec,
    cc: &ConeConstants,
    db1: &DeclaredBounds,
    db2: &DeclaredBounds,
    mode: Mode,
    i0: Option<usize>,
) -> Result<Certificate> {
    existence_with(cc, db1, db2, mode, i0, &spec.params())
}

fn existence_with(
    cc: &ConeConstants,
    db1: &DeclaredBounds,
    db2: &DeclaredBounds,
    mode: Mode,
    i0: Option<usize>,
    p: &Params,
) -> Result<Certificate> {
    let (rho1, rho2) = (db1.rho, db2.rho);
    if !(rho1 < rho2) {
        return Err(Error::Precondition(format!("need rho1 < rho2, got {rho1} and {rho2}")));
    }
    let (lower, condition) = match mode {
        Mode::S => (check_I0(cc, db1, p)?, ConditionId::S),
        Mode::Sstar => (i0_star_any(cc, db1, i0, p)?, ConditionId::Sstar),
    };
    let upper = check_I1(cc, db2, p)?;
    let rows: Vec<Inequality> = lower.rows.iter().chain(&upper.rows).cloned().collect();
    let mut cert = Certificate::from_rows(condition, None, rows);
    cert.annulus = Some([rho1, rho2]);
    if cert.certified() {
        cert.conclusion = Some(format!(
            "at least one solution u in K with {rho1} <= ||u|| <= {rho2}"
        ));
    }
    cert.parts = vec![lower, upper];
    Ok(cert)
}

/// Uses each constant's reference value where one is given.
fn reference_constants(cc: &ConeConstants) -> Option<ConeConstants> {
    let mut any = false;
    let mut out = cc.clone();
    for comp in &mut out.components {
        let c = &mut *comp;
        for k in [&mut c.c_tilde, &mut c.recip_m0, &mut c.recip_m1, &mut c.recip_M]
            .into_iter()
            .chain(c.c_gamma.iter_mut())
            .chain(c.gamma_sup.iter_mut())
            .chain(c.dgamma_sup.iter_mut())
        {
            if let (Some(r), Some(_)) = (k.reference, &k.discrepancy) {
                k.used = r;
                k.declared = None;
                any = true;
            }
        }
    }
    any.then_some(out)
}

fn nij_rows(cc: &ConeConstants, db: &DeclaredBounds, set_i: &[usize], set_j: &[usize], p: &Params) -> Result<Vec<Inequality>> {
    let mut rows = Vec::new();
    for &i in set_i {
        rows.push(xi_row(cc, db, p, i)?.finish(format!("NI[i={}]", i + 1), i, None, Comparison::Lt, 1.0));
    }
    for &i in set_j {
        rows.push(delta_row(cc, db, p, i)?.finish(format!("NJ[i={}]", i + 1), i, None, Comparison::Gt, 1.0));
    }
    Ok(rows)
}

/// At most the zero solution in `K̄_ρ` when
/// `max_{i∈I}[λ_i ξ̃_i/m_{i0} + Σ_j η_ij ξ_ij ‖γ_ij‖∞] < 1` and
/// `min_{i∈J}[λ_i δ̃_i c̃_i/M_i + Σ_j η_ij c_ij δ_ij ‖γ_ij‖∞] > 1`.
/// Sets are zero-based and must partition the components; an empty side
/// holds vacuously.
pub fn nonexistence_certificate(
    spec: &ProblemSpec,
    cc: &ConeConstants,
    db: &DeclaredBounds,
    set_i: &[usize],
    set_j: &[usize],
    p: &Params,
) -> Result<Certificate> {
    let cert = nonexistence_core(cc, db, set_i, set_j, p)?;
    attach_zero_check(spec, p, cert)
}

fn nonexistence_core(cc: &ConeConstants, db: &DeclaredBounds, set_i: &[usize], set_j: &[usize], p: &Params) -> Result<Certificate> {
    check_shape(cc, p)?;
    let n = cc.components.len();
    let mut seen = vec![false; n];
    for &i in set_i.iter().chain(set_j) {
        if i >= n || seen[i] {
            return Err(Error::Precondition(format!(
                "I = {:?} and J = {:?} must partition 1..{n}",
                one_based(set_i),
                one_based(set_j)
            )));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Precondition(format!(
            "I = {:?} and J = {:?} must partition 1..{n}",
            one_based(set_i),
            one_based(set_j)
        )));
    }
    let rows = nij_rows(cc, db, set_i, set_j, p)?;
    let mut cert = Certificate::from_rows(ConditionId::NIJ, Some(db.rho), rows);
    if let Some(rc) = reference_constants(cc) {
        let alt = nij_rows(&rc, db, set_i, set_j, p)?;
        for (row, alt) in cert.rows.iter().zip(&alt) {
            if row.lhs != alt.lhs {
                cert.notes.push(format!(
                    "{}: lhs = {} with computed constants, {} with reference constants ({}); {} with reference constants",
                    row.label,
                    row.lhs,
                    alt.lhs,
                    discrepant_symbols(cc, row.component).join(", "),
                    if alt.holds { "holds" } else { "fails" }
                ));
            }
        }
        let alt_ok = alt.iter().all(|r| r.holds);
        if !cert.certified() && !alt_ok && !cert.notes.is_empty() {
            cert.notes.push(
                "discrepancy: the inequalities fail with both the computed and the reference constants, \
                 so nonexistence is not established at these parameters"
                    .into(),
            );
        } else if cert.certified() != alt_ok {
            cert.notes.push(format!(
                "discrepancy: the verdict with reference constants would be {}",
                if alt_ok { "certified" } else { "not-certified" }
            ));
        }
    }
    Ok(cert)
}

fn discrepant_symbols(cc: &ConeConstants, i: usize) -> Vec<String> {
    cc.components[i]
        .discrepancies()
        .map(|k| format!("{} reference {}", k.symbol, k.reference.unwrap_or(f64::NAN)))
        .collect()
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|i| i + 1).collect()
}

fn attach_zero_check(spec: &ProblemSpec, p: &Params, mut cert: Certificate) -> Result<Certificate> {
    let spec = spec.with_params(p)?;
    let quad = spec.quadrature();
    let zero = DiscreteState::zeros(spec.n, spec.solver.nodes)?;
    let tu = apply_T(&spec, &zero, &quad)?;
    let residual = c1_norm(&tu).norm;
    let zero_is_solution = residual <= spec.solver.tol;
    if cert.certified() {
        let rho = cert.rho.unwrap_or(f64::NAN);
        cert.conclusion = Some(if zero_is_solution {
            format!("at most the zero solution in the closed ball of radius {rho} of K; zero is a solution")
        } else {
            format!("no solutions in the closed ball of radius {rho} of K")
        });
    }
    cert.zero_check = Some(ZeroCheck {
        residual,
        zero_is_solution,
    });
    Ok(cert)
}

/// `name:min:max:steps`, `steps` grid points including both ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.max } else { self.min + (self.max - self.min) * k as f64 / last })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Precondition(format!("axis `{s}`: {why}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [name, min, max, steps] = parts[..] else {
            return Err(bad("expected name:min:max:steps"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("min and max must be numbers"));
        let (min, max) = (num(min)?, num(max)?);
        let steps: usize = steps.trim().parse().map_err(|_| bad("steps must be a nonnegative integer"))?;
        if steps == 0 {
            return Err(bad("steps must be at least 1"));
        }
        if !(min <= max) || !min.is_finite() || !max.is_finite() {
            return Err(bad("need finite min <= max"));
        }
        Ok(Axis {
            name: name.trim().to_string(),
            min,
            max,
            steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceSetup {
    pub rho: f64,
    pub set_i: Vec<usize>,
    pub set_j: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSetup {
    pub axes: Vec<Axis>,
    pub mode: Mode,
    pub rho1: f64,
    pub rho2: f64,
    pub i0: Option<usize>,
    pub nonexistence: Option<NonexistenceSetup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ExistenceCertified,
    NonexistenceCertified,
    Undetermined,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::ExistenceCertified => "existence-certified",
            Classification::NonexistenceCertified => "nonexistence-certified",
            Classification::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub values: Vec<f64>,
    pub verdict: Classification,
    pub binding: Option<String>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub report: &'static str,
    pub setup: SweepSetup,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.setup.axes.iter().map(|a| a.name.clone()).collect();
        header.extend(["verdict", "binding", "margin"].map(String::from));
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec: Vec<String> = p.values.iter().map(|v| format!("{v:e}")).collect();
            rec.push(p.verdict.to_string());
            rec.push(p.binding.clone().unwrap_or_default());
            rec.push(format!("{:e}", p.margin));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classifies every point of the grid spanned by `setup.axes` (last axis
/// fastest). Both certificates holding at one point is reported as an error
/// when the nonexistence ball reaches the existence annulus.
pub fn sweep(spec: &ProblemSpec, cc: &ConeConstants, setup: &SweepSetup) -> Result<SweepReport> {
    if setup.axes.is_empty() {
        return Err(Error::Precondition("sweep needs at least one axis".into()));
    }
    let base = spec.params();
    let mut probe = base.clone();
    for a in &setup.axes {
        if a.steps == 0 {
            return Err(Error::Precondition(format!("axis {} has 0 steps", a.name)));
        }
        probe.set(&a.name, a.min)?;
    }
    let db1 = spec.bounds_at(setup.rho1)?;
    let db2 = spec.bounds_at(setup.rho2)?;
    let dbn = setup.nonexistence.as_ref().map(|s| spec.bounds_at(s.rho)).transpose()?;
    let grids: Vec<Vec<f64>> = setup.axes.iter().map(Axis::values).collect();
    let total: usize = grids.iter().map(Vec::len).product();

    let points = par::try_map_range(total, |idx| -> Result<SweepPoint> {
        let mut values = vec![0.0; grids.len()];
        let mut rest = idx;
        for k in (0..grids.len()).rev() {
            values[k] = grids[k][rest % grids[k].len()];
            rest /= grids[k].len();
        }
        let mut p = base.clone();
        for (a, &v) in setup.axes.iter().zip(&values) {
            p.set(&a.name, v)?;
        }
        let ex = existence_with(cc, &db1, &db2, setup.mode, setup.i0, &p)?;
        let non = match (&setup.nonexistence, &dbn) {
            (Some(s), Some(db)) => Some(nonexistence_core(cc, db, &s.set_i, &s.set_j, &p)?),
            _ => None,
        };
        let non_ok = non.as_ref().is_some_and(Certificate::certified);
        if ex.certified() && non_ok {
            let rho_non = non.as_ref().and_then(|c| c.rho).unwrap_or(f64::NAN);
            if rho_non >= setup.rho1 {
                let dump = serde_json::json!({ "values": values, "existence": ex, "nonexistence": non });
                return Err(Error::Contradiction(format!(
                    "point {values:?} is both existence- and nonexistence-certified: {dump}"
                )));
            }
        }
        let (verdict, cert) = if ex.certified() {
            (Classification::ExistenceCertified, &ex)
        } else if non_ok {
            (Classification::NonexistenceCertified, non.as_ref().expect("checked"))
        } else {
            (Classification::Undetermined, &ex)
        };
        Ok(SweepPoint {
            values,
            verdict,
            binding: cert.binding.clone(),
            margin: cert.margin,
        })
    })?;
    Ok(SweepReport {
        report: "sweep",
        setup: setup.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::assemble_cone_constants;
    use proptest::prelude::*;
    use std::f64::consts::E;
    use std::sync::OnceLock;

    fn example() -> &'static (ProblemSpec, ConeConstants) {
        static CELL: OnceLock<(ProblemSpec, ConeConstants)> = OnceLock::new();
        CELL.get_or_init(|| {
            let spec = ProblemSpec::example();
            let cc = assemble_cone_constants(&spec, &spec.quadrature(), &spec.optimizer).unwrap();
            (spec, cc)
        })
    }

    fn params(v: [f64; 4]) -> Params {
        Params {
            lambda: vec![v[0], v[2]],
            eta: vec![vec![v[1]], vec![v[3]]],
        }
    }

    const PAPER: [f64; 4] = [0.05, 0.1, 0.5, 0.5];

    #[test]
    fn sign_box() {
        let b = SignBox::new(1, 2, 2.0);
        assert_eq!(b.lower, vec![-2.0, 0.0, -2.0, -2.0]);
        assert_eq!(b.lower.iter().filter(|&&x| x == 0.0).count(), 1);
        assert!(b.contains(&[-1.0, 0.5, 2.0, -2.0]));
        assert!(!b.contains(&[0.0, -0.1, 0.0, 0.0]));
    }

    #[test]
    fn i1_example_rows() {
        let (spec, cc) = example();
        let db = spec.bounds_at(1.0).unwrap();
        let cert = check_I1(cc, &db, &params(PAPER)).unwrap();
        assert!(cert.certified());
        assert_eq!(cert.max_lhs(), 1.0);
        assert_eq!(cert.binding.as_deref(), Some("I1[i=2,l=1]"));
        let r = cert.row("I1[i=1,l=1]").unwrap();
        assert!((r.lhs - (E * E / 10.0 + 0.2)).abs() < 1e-12);
        let r = cert.row("I1[i=1,l=0]").unwrap();
        assert!((r.lhs - (3.0 * E * E / 80.0 + 0.15)).abs() < 1e-12);
        let cert = check_I1(cc, &db, &params([0.05, 0.1, 0.5, 0.5 + 1e-6])).unwrap();
        assert!(!cert.certified());
        assert!((cert.max_lhs() - (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn i1_zero_parameters_need_no_bounds() {
        let (spec, cc) = example();
        let db = DeclaredBounds::empty(0.3, &spec.gamma_terms());
        let cert = check_I1(cc, &db, &params([0.0; 4])).unwrap();
        assert!(cert.certified());
        assert_eq!(cert.max_lhs(), 0.0);
        assert!(matches!(check_I1(cc, &db, &params(PAPER)), Err(Error::MissingBound { .. })));
    }

    #[test]
    fn i0_component_one() {
        let (spec, cc) = example();
        let db = spec.bounds_at(1.0).unwrap();
        let cert = check_I0(cc, &db, &params([31.0, 0.0, 0.0, 0.0])).unwrap();
        let r = cert.row("I0[i=1]").unwrap();
        assert!((r.lhs - 651.0 / 640.0).abs() < 1e-12);
        assert!(r.holds);
        // component 2 has δ̃_2 undeclared but λ_2 = 0, so its row is 0 < 1
        assert!(!cert.certified());
        let r = check_I0(cc, &db, &params([640.0 / 21.0, 0.0, 0.0, 0.0])).unwrap();
        let lhs = r.row("I0[i=1]").unwrap().lhs;
        assert!((lhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn i0_star_example() {
        let (spec, cc) = example();
        let db = spec.bounds_at(1e-3).unwrap();
        let cert = check_I0_star(cc, &db, 0, &params(PAPER)).unwrap();
        let expected = 0.05 * (-1e-3f64).exp() / (1.0 + E) * 9.0 / 64.0;
        assert!((cert.rows[0].lhs - expected).abs() < 1e-15);
        assert!((cert.rows[0].lhs - 1.889e-3).abs() < 1e-6);
        assert!(cert.certified());
        let db = spec.bounds_at(1e-2).unwrap();
        assert!(!check_I0_star(cc, &db, 0, &params(PAPER)).unwrap().certified());
        let db = spec.bounds_at(1e-3).unwrap();
        assert!(!check_I0_star(cc, &db, 0, &params([0.0, 0.1, 0.5, 0.5])).unwrap().certified());
    }

    #[test]
    fn existence_modes() {
        let (spec, cc) = example();
        let db1 = spec.bounds_at(1e-3).unwrap();
        let db2 = spec.bounds_at(1.0).unwrap();
        let cert = existence_certificate(spec, cc, &db1, &db2, Mode::Sstar, Some(0)).unwrap();
        assert!(cert.certified());
        assert_eq!(cert.annulus, Some([1e-3, 1.0]));
        let auto = existence_certificate(spec, cc, &db1, &db2, Mode::Sstar, None).unwrap();
        assert_eq!(auto.rows, cert.rows);
        assert!(matches!(
            existence_certificate(spec, cc, &db2, &db1, Mode::Sstar, None),
            Err(Error::Precondition(_))
        ));
        let mut s = spec.clone();
        s.set_params(&params([0.0, 0.1, 0.5, 0.5])).unwrap();
        assert!(!existence_certificate(&s, cc, &db1, &db2, Mode::Sstar, Some(0)).unwrap().certified());
    }

    #[test]
    fn nonexistence_example() {
        let (spec, cc) = example();
        let db = spec.bounds_at(1.0).unwrap();
        let cert = nonexistence_certificate(spec, cc, &db, &[1], &[0], &params([31.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(!cert.certified());
        assert!((cert.row("NJ[i=1]").unwrap().lhs - 651.0 / 640.0).abs() < 1e-9);
        let ni = cert.row("NI[i=2]").unwrap().lhs;
        assert!((ni - 1.325).abs() < 1e-9, "{ni}");
        assert!(cert.notes.iter().any(|n| n.contains("discrepancy")));
        assert!(cert.notes.iter().any(|n| n.contains("1.425")));
        let cert = nonexistence_certificate(spec, cc, &db, &[1], &[0], &params([31.0, 1.0, 0.1, 0.1])).unwrap();
        assert!(cert.certified());
        let z = cert.zero_check.as_ref().unwrap();
        assert!(!z.zero_is_solution);
        assert!(cert.conclusion.as_deref().unwrap().starts_with("no solutions"));
    }

    #[test]
    fn nonexistence_vacuous_j_and_partition() {
        let (spec, cc) = example();
        let db = DeclaredBounds::empty(1.0, &spec.gamma_terms());
        let cert = nonexistence_certificate(spec, cc, &db, &[0, 1], &[], &params([0.0; 4])).unwrap();
        assert!(cert.certified());
        assert!(cert.zero_check.as_ref().unwrap().zero_is_solution);
        for (i, j) in [(vec![0], vec![]), (vec![0, 1], vec![1]), (vec![0, 2], vec![1])] {
            assert!(matches!(
                nonexistence_certificate(spec, cc, &db, &i, &j, &params([0.0; 4])),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn axis_parsing() {
        let a: Axis = "lambda1:0:0.1:11".parse().unwrap();
        assert_eq!(a.values().len(), 11);
        assert_eq!(a.values()[10], 0.1);
        assert!("lambda1:0:0.1:0".parse::<Axis>().is_err());
        assert!("lambda1:0:0.1".parse::<Axis>().is_err());
        assert!("lambda1:1:0:3".parse::<Axis>().is_err());
        let one: Axis = "eta11:0.25:0.25:1".parse().unwrap();
        assert_eq!(one.values(), vec![0.25]);
    }

    #[test]
    fn single_point_sweep_matches_certify() {
        let (spec, cc) = example();
        let setup = SweepSetup {
            axes: vec!["lambda1:0.05:0.05:1".parse().unwrap()],
            mode: Mode::Sstar,
            rho1: 1e-3,
            rho2: 1.0,
            i0: None,
            nonexistence: None,
        };
        let rep = sweep(spec, cc, &setup).unwrap();
        let db1 = spec.bounds_at(1e-3).unwrap();
        let db2 = spec.bounds_at(1.0).unwrap();
        let cert = existence_certificate(spec, cc, &db1, &db2, Mode::Sstar, None).unwrap();
        assert_eq!(rep.points.len(), 1);
        assert_eq!(rep.points[0].verdict, Classification::ExistenceCertified);
        assert_eq!(rep.points[0].binding, cert.binding);
        assert_eq!(rep.points[0].margin, cert.margin);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda1,verdict,binding,margin\n"));
    }

    fn synthetic(n_terms: usize) -> (ConeConstants, DeclaredBounds) {
        let (spec, cc) = example();
        let cc = cc.clone();
        let mut db = spec.bounds_at(1.0).unwrap();
        db.h_hi = vec![vec![Some(2.0); n_terms], vec![Some(1.0); n_terms]];
        (cc, db)
    }

    proptest! {
        #[test]
        fn i1_monotone_in_parameters(
            v in proptest::array::uniform4(0.0f64..1.0),
            shrink in proptest::array::uniform4(0.0f64..=1.0),
        ) {
            let (cc, db) = synthetic(1);
            let big = check_I1(&cc, &db, &params(v)).unwrap();
            if big.certified() {
                let small = params([v[0] * shrink[0], v[1] * shrink[1], v[2] * shrink[2], v[3] * shrink[3]]);
                prop_assert!(check_I1(&cc, &db, &small).unwrap().certified());
            }
        }

        #[test]
        fn i1_scale_coherent(v in proptest::array::uniform4(0.0f64..1.0), k in -20i32..20) {
            // powers of two scale every product exactly
            let alpha = 2f64.powi(k);
            let (cc, db) = synthetic(1);
            let mut scaled = db.clone();
            scaled.rho *= alpha;
            for row in scaled.f_hi.iter_mut().chain(scaled.h_hi.iter_mut().flatten()) {
                *row = row.map(|x| x * alpha);
            }
            let a = check_I1(&cc, &db, &params(v)).unwrap();
            let b = check_I1(&cc, &scaled, &params(v)).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }
}
