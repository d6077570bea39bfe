//! Declared analytic bounds (`f̄`, `f̲`, `h̄`, `h̲`, `w̄`, `w̲`, `δ̃`, `δ`, `ξ̃`, `ξ`)
//! and their falsification by sampling.
//!
//! Certificates only ever consume declared values. Sampling can refute a
//! declaration but never establishes one; empirical ranges are labelled
//! non-rigorous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cone::{c1_norm, sample_cone_boundary, sample_seed, DiscreteState};
use crate::constants::ConeConstants;
use crate::expr::{eval_functional_as, EvalEnv, FunctionalRole, ScalarExpr};
use crate::problem::ProblemSpec;
use crate::{par, Error, Result};

/// Grid intervals of sampled states.
pub const SAMPLE_INTERVALS: usize = 64;
const REL_TOL: f64 = 1e-12;
const FACTORIAL_LEVELS: usize = 5;
const FACTORIAL_MAX_DIM: usize = 8;
const LHS_POINTS: usize = 10_000;

/// Which declared quantity a value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    WLo,
    WHi,
    FHi,
    FLo,
    DeltaTilde,
    XiTilde,
    HLo,
    HHi,
    Delta,
    Xi,
}

impl BoundKind {
    pub fn key(self) -> &'static str {
        match self {
            BoundKind::WLo => "w_lo",
            BoundKind::WHi => "w_hi",
            BoundKind::FHi => "f_hi",
            BoundKind::FLo => "f_lo",
            BoundKind::DeltaTilde => "delta_tilde",
            BoundKind::XiTilde => "xi_tilde",
            BoundKind::HLo => "h_lo",
            BoundKind::HHi => "h_hi",
            BoundKind::Delta => "delta",
            BoundKind::Xi => "xi",
        }
    }

    /// Paper-style symbol, one-based indices.
    pub fn symbol(self, i: usize, j: Option<usize>) -> String {
        let i = i + 1;
        let ij = match j {
            Some(j) => format!("{i}{}", j + 1),
            None => i.to_string(),
        };
        match self {
            BoundKind::WLo => format!("\\underline{{w}}_{{{ij},\\rho}}"),
            BoundKind::WHi => format!("\\overline{{w}}_{{{ij},\\rho}}"),
            BoundKind::FHi => format!("\\overline{{f}}_{{{ij},\\rho}}"),
            BoundKind::FLo => format!("\\underline{{f}}_{{{ij},\\rho}}"),
            BoundKind::DeltaTilde => format!("\\tilde{{\\delta}}_{{{ij}}}"),
            BoundKind::XiTilde => format!("\\tilde{{\\xi}}_{{{ij}}}"),
            BoundKind::HLo => format!("\\underline{{h}}_{{{ij},\\rho}}"),
            BoundKind::HHi => format!("\\overline{{h}}_{{{ij},\\rho}}"),
            BoundKind::Delta => format!("\\delta_{{{ij}}}"),
            BoundKind::Xi => format!("\\xi_{{{ij}}}"),
        }
    }
}

type Row<T> = Vec<Option<T>>;

/// A bounds block as written in the config; values may depend on `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTemplate {
    pub rho: Option<f64>,
    pub w_lo: Row<ScalarExpr>,
    pub w_hi: Row<ScalarExpr>,
    pub f_hi: Row<ScalarExpr>,
    pub f_lo: Row<ScalarExpr>,
    pub delta_tilde: Row<ScalarExpr>,
    pub xi_tilde: Row<ScalarExpr>,
    pub h_lo: Vec<Row<ScalarExpr>>,
    pub h_hi: Vec<Row<ScalarExpr>>,
    pub delta: Vec<Row<ScalarExpr>>,
    pub xi: Vec<Row<ScalarExpr>>,
}

/// Declared bounds at one radius; `None` means not declared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeclaredBounds {
    pub rho: f64,
    pub w_lo: Row<f64>,
    pub w_hi: Row<f64>,
    pub f_hi: Row<f64>,
    pub f_lo: Row<f64>,
    pub delta_tilde: Row<f64>,
    pub xi_tilde: Row<f64>,
    pub h_lo: Vec<Row<f64>>,
    pub h_hi: Vec<Row<f64>>,
    pub delta: Vec<Row<f64>>,
    pub xi: Vec<Row<f64>>,
}

fn eval_row(row: &[Option<ScalarExpr>], rho: f64) -> Result<Row<f64>> {
    row.iter()
        .map(|e| e.as_ref().map(|e| e.eval_rho(rho).map_err(Error::from)).transpose())
        .collect()
}

impl BoundsTemplate {
    pub fn resolve(&self, rho: f64) -> Result<DeclaredBounds> {
        let m = |rows: &[Row<ScalarExpr>]| -> Result<Vec<Row<f64>>> { rows.iter().map(|r| eval_row(r, rho)).collect() };
        let db = DeclaredBounds {
            rho,
            w_lo: eval_row(&self.w_lo, rho)?,
            w_hi: eval_row(&self.w_hi, rho)?,
            f_hi: eval_row(&self.f_hi, rho)?,
            f_lo: eval_row(&self.f_lo, rho)?,
            delta_tilde: eval_row(&self.delta_tilde, rho)?,
            xi_tilde: eval_row(&self.xi_tilde, rho)?,
            h_lo: m(&self.h_lo)?,
            h_hi: m(&self.h_hi)?,
            delta: m(&self.delta)?,
            xi: m(&self.xi)?,
        };
        db.validate()?;
        Ok(db)
    }
}

impl DeclaredBounds {
    pub fn empty(rho: f64, terms: &[usize]) -> Self {
        let n = terms.len();
        let mat = || terms.iter().map(|&m| vec![None; m]).collect::<Vec<_>>();
        DeclaredBounds {
            rho,
            w_lo: vec![None; n],
            w_hi: vec![None; n],
            f_hi: vec![None; n],
            f_lo: vec![None; n],
            delta_tilde: vec![None; n],
            xi_tilde: vec![None; n],
            h_lo: mat(),
            h_hi: mat(),
            delta: mat(),
            xi: mat(),
        }
    }

    fn row(&self, kind: BoundKind) -> Option<&Row<f64>> {
        Some(match kind {
            BoundKind::WLo => &self.w_lo,
            BoundKind::WHi => &self.w_hi,
            BoundKind::FHi => &self.f_hi,
            BoundKind::FLo => &self.f_lo,
            BoundKind::DeltaTilde => &self.delta_tilde,
            BoundKind::XiTilde => &self.xi_tilde,
            _ => return None,
        })
    }

    fn matrix(&self, kind: BoundKind) -> Option<&Vec<Row<f64>>> {
        Some(match kind {
            BoundKind::HLo => &self.h_lo,
            BoundKind::HHi => &self.h_hi,
            BoundKind::Delta => &self.delta,
            BoundKind::Xi => &self.xi,
            _ => return None,
        })
    }

    /// Declared value or `None`; `j` selects the γ term for per-term bounds.
    pub fn get(&self, kind: BoundKind, i: usize, j: Option<usize>) -> Option<f64> {
        match j {
            None => self.row(kind)?.get(i).copied().flatten(),
            Some(j) => self.matrix(kind)?.get(i)?.get(j).copied().flatten(),
        }
    }

    pub fn require(&self, kind: BoundKind, i: usize, j: Option<usize>) -> Result<f64> {
        self.get(kind, i, j).ok_or_else(|| Error::MissingBound {
            symbol: format!(
                "{} ({}[{i}]{})",
                kind.symbol(i, j),
                kind.key(),
                j.map(|j| format!("[{j}]")).unwrap_or_default()
            ),
            rho: self.rho,
        })
    }

    fn validate(&self) -> Result<()> {
        let key = |k: &str, i: usize| format!("bounds(rho={}).{k}[{i}]", self.rho);
        for i in 0..self.w_lo.len() {
            for (k, v) in [("w_lo", self.w_lo[i]), ("w_hi", self.w_hi.get(i).copied().flatten())] {
                if v.is_some_and(|v| !(v >= 0.0)) {
                    return Err(Error::config(key(k, i), "(C8): w bounds must be >= 0"));
                }
            }
            if let (Some(lo), Some(Some(hi))) = (self.w_lo[i], self.w_hi.get(i)) {
                if lo > *hi {
                    return Err(Error::config(key("w_lo", i), format!("w_lo = {lo} exceeds w_hi = {hi}")));
                }
            }
        }
        for (i, row) in self.h_lo.iter().enumerate() {
            for (j, lo) in row.iter().enumerate() {
                let hi = self.h_hi.get(i).and_then(|r| r.get(j)).copied().flatten();
                for v in [*lo, hi].into_iter().flatten() {
                    if !(v >= 0.0) {
                        return Err(Error::config(key("h", i), "(C7): h bounds must be >= 0"));
                    }
                }
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    if *lo > hi {
                        return Err(Error::config(key("h_lo", i), format!("h_lo = {lo} exceeds h_hi = {hi}")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    DeclaredUnfalsified,
    DeclaredFalsified,
    EstimatedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStatus {
    pub symbol: String,
    pub key: &'static str,
    pub component: usize,
    pub term: Option<usize>,
    pub value: Option<f64>,
    pub status: Status,
    /// Sampled extreme of the bounded quantity (non-rigorous).
    pub observed: Option<f64>,
}

/// Where a violation was found: a sampled cone state or a point of the
/// f-box `(t, x_1..x_2n, w)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    State {
        sample: usize,
        seed: u64,
        scale: f64,
        #[serde(skip)]
        state: DiscreteState,
    },
    Point {
        t: f64,
        x: Vec<f64>,
        w: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub symbol: String,
    pub key: &'static str,
    pub component: usize,
    pub term: Option<usize>,
    pub declared: f64,
    /// The quantity compared against the declaration.
    pub observed: f64,
    pub relation: &'static str,
    pub witness: Witness,
}

#[derive(Debug, Clone, Serialize)]
pub struct FalsifyReport {
    pub report: &'static str,
    pub rho: f64,
    pub samples: usize,
    pub seed: u64,
    pub statuses: Vec<BoundStatus>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl FalsifyReport {
    pub fn falsified(&self) -> bool {
        !self.violations.is_empty()
    }
}

/// Functional values on one sampled state.
#[derive(Debug, Clone)]
struct Sampled {
    state: DiscreteState,
    seed: u64,
    scale: f64,
    sup: Vec<f64>,
    w: Vec<f64>,
    h: Vec<Vec<f64>>,
}

fn evaluate(spec: &ProblemSpec, u: DiscreteState, seed: u64, scale: f64) -> Result<Sampled> {
    let quad = spec.quadrature();
    let mut w = Vec::with_capacity(spec.n);
    let mut h = Vec::with_capacity(spec.n);
    for (i, c) in spec.components.iter().enumerate() {
        w.push(eval_functional_as(&c.w, &u, &quad, FunctionalRole::W { i })?);
        h.push(
            c.gammas
                .iter()
                .enumerate()
                .map(|(j, g)| eval_functional_as(&g.h, &u, &quad, FunctionalRole::H { i, j }))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(Sampled {
        sup: c1_norm(&u).sup,
        state: u,
        seed,
        scale,
        w,
        h,
    })
}

/// Boundary samples `u_k ∈ ∂K_ρ`, seed `sample_seed(seed, k)`.
fn sample_boundary(spec: &ProblemSpec, cc: &ConeConstants, rho: f64, samples: usize, seed: u64) -> Result<Vec<Sampled>> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Precondition(format!("rho must be positive, got {rho}")));
    }
    par::try_map_range(samples, |k| {
        let s = sample_seed(seed, k as u64);
        let u = sample_cone_boundary(cc, SAMPLE_INTERVALS, rho, s)?;
        evaluate(spec, u, s, 1.0)
    })
}

/// Samples of the closed ball: the k-th boundary draw scaled by `(k mod 10 + 1)/10`.
fn sample_ball(spec: &ProblemSpec, boundary: &[Sampled]) -> Result<Vec<Sampled>> {
    par::try_map_range(boundary.len(), |k| {
        let b = &boundary[k];
        let scale = ((k % 10) + 1) as f64 / 10.0;
        if scale == 1.0 {
            return Ok(b.clone());
        }
        evaluate(spec, b.state.scaled(scale), b.seed, scale)
    })
}

fn exceeds(observed: f64, bound: f64) -> bool {
    observed > bound + REL_TOL * bound.abs().max(1.0)
}

/// Points of the box `Π [lo_k, hi_k]`: full factorial with five levels per
/// dimension when the dimension is at most eight, otherwise a Latin
/// hypercube.
pub fn box_points(lo: &[f64], hi: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let d = lo.len();
    if d <= FACTORIAL_MAX_DIM {
        let total = FACTORIAL_LEVELS.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|k| {
                        let level = idx % FACTORIAL_LEVELS;
                        idx /= FACTORIAL_LEVELS;
                        lo[k] + (hi[k] - lo[k]) * level as f64 / (FACTORIAL_LEVELS - 1) as f64
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
        for k in 0..d {
            let mut strata: Vec<usize> = (0..LHS_POINTS).collect();
            for a in (1..LHS_POINTS).rev() {
                let b = rng.gen_range(0..=a);
                strata.swap(a, b);
            }
            cols.push(
                strata
                    .into_iter()
                    .map(|s| {
                        let x = (s as f64 + rng.gen::<f64>()) / LHS_POINTS as f64;
                        lo[k] + (hi[k] - lo[k]) * x
                    })
                    .collect(),
            );
        }
        (0..LHS_POINTS).map(|p| cols.iter().map(|c| c[p]).collect()).collect()
    }
}

struct FCheck {
    kind: BoundKind,
    bound: f64,
    upper: bool,
    /// Compare against `bound · x_i` (`|x_i|` for upper checks) instead of `bound`.
    scaled: bool,
}

fn eval_f(f: &ScalarExpr, p: &[f64], n: usize) -> Result<f64> {
    Ok(f.eval(&EvalEnv {
        t: p[0],
        u: &p[1..1 + n],
        du: &p[1 + n..1 + 2 * n],
        w: p[1 + 2 * n],
        ..EvalEnv::default()
    })?)
}

#[allow(clippy::too_many_arguments)]
fn check_f_box(
    spec: &ProblemSpec,
    i: usize,
    lo: &[f64],
    hi: &[f64],
    checks: &[FCheck],
    seed: u64,
    violations: &mut Vec<Violation>,
    observed: &mut [Option<f64>],
) -> Result<()> {
    let n = spec.n;
    let f = &spec.components[i].f;
    let pts = box_points(lo, hi, seed);
    let vals = par::try_map_range(pts.len(), |p| eval_f(f, &pts[p], n))?;
    for (c, check) in checks.iter().enumerate() {
        for (p, &v) in pts.iter().zip(&vals) {
            let xi = p[1 + i];
            let (lhs, rhs) = match (check.upper, check.scaled) {
                (true, false) => (v, check.bound),
                (false, false) => (check.bound, v),
                (true, true) => (v, check.bound * xi.abs()),
                (false, true) => (check.bound * xi, v),
            };
            let ratio_obs = if check.scaled {
                if xi.abs() > 0.0 {
                    Some(v / xi.abs())
                } else {
                    None
                }
            } else {
                Some(v)
            };
            if let Some(r) = ratio_obs {
                let o = &mut observed[c];
                *o = Some(match *o {
                    None => r,
                    Some(prev) if check.upper => prev.max(r),
                    Some(prev) => prev.min(r),
                });
            }
            if exceeds(lhs, rhs) {
                violations.push(Violation {
                    symbol: check.kind.symbol(i, None),
                    key: check.kind.key(),
                    component: i,
                    term: None,
                    declared: check.bound,
                    observed: v,
                    relation: if check.upper { "f <= bound" } else { "f >= bound" },
                    witness: Witness::Point {
                        t: p[0],
                        x: p[1..1 + 2 * n].to_vec(),
                        w: p[1 + 2 * n],
                    },
                });
                break;
            }
        }
    }
    Ok(())
}

/// Tests every declared bound against sampled cone states and a grid of the
/// relevant f-box, reporting violations with witnesses.
pub fn falsify_bounds(
    spec: &ProblemSpec,
    cc: &ConeConstants,
    db: &DeclaredBounds,
    samples: usize,
    seed: u64,
) -> Result<FalsifyReport> {
    let rho = db.rho;
    let boundary = sample_boundary(spec, cc, rho, samples, seed)?;
    let ball = sample_ball(spec, &boundary)?;
    let mut statuses = Vec::new();
    let mut violations = Vec::new();
    let mut notes = Vec::new();

    let mut push = |kind: BoundKind, i: usize, j: Option<usize>, value: Option<f64>, observed: Option<f64>, failed: bool| {
        statuses.push(BoundStatus {
            symbol: kind.symbol(i, j),
            key: kind.key(),
            component: i,
            term: j,
            value,
            status: match (value, failed) {
                (None, _) => Status::EstimatedOnly,
                (Some(_), true) => Status::DeclaredFalsified,
                (Some(_), false) => Status::DeclaredUnfalsified,
            },
            observed,
        });
    };

    let state_violation = |kind: BoundKind, i: usize, j: Option<usize>, declared: f64, observed: f64, relation: &'static str, s: &Sampled, k: usize| Violation {
        symbol: kind.symbol(i, j),
        key: kind.key(),
        component: i,
        term: j,
        declared,
        observed,
        relation,
        witness: Witness::State {
            sample: k,
            seed: s.seed,
            scale: s.scale,
            state: s.state.clone(),
        },
    };

    for i in 0..spec.n {
        // w ranges on the boundary
        let wmin = boundary.iter().map(|s| s.w[i]).fold(f64::INFINITY, f64::min);
        let wmax = boundary.iter().map(|s| s.w[i]).fold(f64::NEG_INFINITY, f64::max);
        for (kind, upper, observed) in [(BoundKind::WLo, false, wmin), (BoundKind::WHi, true, wmax)] {
            let declared = db.get(kind, i, None);
            let mut failed = false;
            if let Some(d) = declared {
                for (k, s) in boundary.iter().enumerate() {
                    let bad = if upper { exceeds(s.w[i], d) } else { exceeds(d, s.w[i]) };
                    if bad {
                        let rel = if upper { "w <= bound" } else { "w >= bound" };
                        violations.push(state_violation(kind, i, None, d, s.w[i], rel, s, k));
                        failed = true;
                        break;
                    }
                }
            }
            push(kind, i, None, declared, Some(observed), failed);
        }

        for j in 0..spec.components[i].gammas.len() {
            let hmin = boundary.iter().map(|s| s.h[i][j]).fold(f64::INFINITY, f64::min);
            let hmax = boundary.iter().map(|s| s.h[i][j]).fold(f64::NEG_INFINITY, f64::max);
            for (kind, upper, observed) in [(BoundKind::HLo, false, hmin), (BoundKind::HHi, true, hmax)] {
                let declared = db.get(kind, i, Some(j));
                let mut failed = false;
                if let Some(d) = declared {
                    for (k, s) in boundary.iter().enumerate() {
                        let v = s.h[i][j];
                        if (upper && exceeds(v, d)) || (!upper && exceeds(d, v)) {
                            let rel = if upper { "h <= bound" } else { "h >= bound" };
                            violations.push(state_violation(kind, i, Some(j), d, v, rel, s, k));
                            failed = true;
                            break;
                        }
                    }
                }
                push(kind, i, Some(j), declared, Some(observed), failed);
            }
            // δ and ξ on the closed ball, relative to ‖u_i‖∞
            for (kind, upper) in [(BoundKind::Delta, false), (BoundKind::Xi, true)] {
                let Some(d) = db.get(kind, i, Some(j)) else { continue };
                let mut failed = false;
                let mut observed: Option<f64> = None;
                for (k, s) in ball.iter().enumerate() {
                    let v = s.h[i][j];
                    let rhs = d * s.sup[i];
                    if s.sup[i] > 0.0 {
                        let r = v / s.sup[i];
                        observed = Some(observed.map_or(r, |o| if upper { o.max(r) } else { o.min(r) }));
                    }
                    if !failed && ((upper && exceeds(v, rhs)) || (!upper && exceeds(rhs, v))) {
                        let rel = if upper { "h <= xi * |u_i|" } else { "h >= delta * |u_i|" };
                        violations.push(state_violation(kind, i, Some(j), d, v, rel, s, k));
                        failed = true;
                    }
                }
                push(kind, i, Some(j), Some(d), observed, failed);
            }
        }

        // f over the I box [0,1] x [-ρ,ρ]^{2n} x [w_lo, w_hi]
        let n = spec.n;
        let w_range = match (db.get(BoundKind::WLo, i, None), db.get(BoundKind::WHi, i, None)) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        };
        let upper_checks: Vec<FCheck> = [
            db.get(BoundKind::FHi, i, None).map(|b| FCheck {
                kind: BoundKind::FHi,
                bound: b,
                upper: true,
                scaled: false,
            }),
            db.get(BoundKind::XiTilde, i, None).map(|b| FCheck {
                kind: BoundKind::XiTilde,
                bound: b,
                upper: true,
                scaled: true,
            }),
        ]
        .into_iter()
        .flatten()
        .collect();
        let lower_checks: Vec<FCheck> = [
            db.get(BoundKind::FLo, i, None).map(|b| FCheck {
                kind: BoundKind::FLo,
                bound: b,
                upper: false,
                scaled: false,
            }),
            db.get(BoundKind::DeltaTilde, i, None).map(|b| FCheck {
                kind: BoundKind::DeltaTilde,
                bound: b,
                upper: false,
                scaled: true,
            }),
        ]
        .into_iter()
        .flatten()
        .collect();
        let Some((wl, wh)) = w_range else {
            if !upper_checks.is_empty() || !lower_checks.is_empty() {
                notes.push(format!(
                    "f-bounds of component {} not sampled: w range not declared at rho = {rho}",
                    i + 1
                ));
                for c in upper_checks.iter().chain(&lower_checks) {
                    push(c.kind, i, None, Some(c.bound), None, false);
                }
            }
            continue;
        };
        // (C4): f >= 0 on the I box is checked alongside the upper bounds
        let mut lo = vec![0.0];
        lo.extend(std::iter::repeat_n(-rho, 2 * n));
        lo.push(wl);
        let mut hi = vec![1.0];
        hi.extend(std::iter::repeat_n(rho, 2 * n));
        hi.push(wh);
        let nonneg = [FCheck {
            kind: BoundKind::FLo,
            bound: 0.0,
            upper: false,
            scaled: false,
        }];
        let before = violations.len();
        let mut sink = [None];
        check_f_box(spec, i, &lo, &hi, &nonneg, seed, &mut violations, &mut sink)?;
        if violations.len() > before {
            let v = violations.pop().expect("just pushed");
            return Err(Error::model(
                "(C4)",
                format!("f_{} = {} < 0 at {:?}", i + 1, v.observed, v.witness),
            ));
        }
        let mut observed = vec![None; upper_checks.len()];
        let before = violations.len();
        check_f_box(spec, i, &lo, &hi, &upper_checks, seed, &mut violations, &mut observed)?;
        for (c, o) in upper_checks.iter().zip(observed) {
            let failed = violations[before..].iter().any(|v| v.key == c.kind.key());
            push(c.kind, i, None, Some(c.bound), o, failed);
        }

        // f over the J box [a_i,b_i] x Π[θ_k ρ, ρ] x [w_lo, w_hi]
        let win = spec.components[i].window;
        let mut lo = vec![win.a];
        lo.extend((0..2 * n).map(|k| if k == i { 0.0 } else { -rho }));
        lo.push(wl);
        let mut hi = vec![win.b];
        hi.extend(std::iter::repeat_n(rho, 2 * n));
        hi.push(wh);
        let mut observed = vec![None; lower_checks.len()];
        let before = violations.len();
        check_f_box(spec, i, &lo, &hi, &lower_checks, seed, &mut violations, &mut observed)?;
        for (c, o) in lower_checks.iter().zip(observed) {
            let failed = violations[before..].iter().any(|v| v.key == c.kind.key());
            push(c.kind, i, None, Some(c.bound), o, failed);
        }
    }

    Ok(FalsifyReport {
        report: "falsify",
        rho,
        samples,
        seed,
        statuses,
        violations,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        values.fold(
            Range {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |r, v| Range {
                min: r.min.min(v),
                max: r.max.max(v),
            },
        )
    }

    pub fn contains(&self, other: &Range) -> bool {
        self.min <= other.min && other.max <= self.max
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RangesReport {
    pub report: &'static str,
    pub label: &'static str,
    pub rho: f64,
    pub samples: usize,
    pub seed: u64,
    pub w: Vec<Range>,
    pub h: Vec<Vec<Range>>,
}

/// Monte-Carlo ranges of every `w_i` and `h_ij` over `∂K_ρ`. Non-rigorous:
/// sampled extrema lie inside the true ranges.
pub fn estimate_ranges(spec: &ProblemSpec, cc: &ConeConstants, rho: f64, samples: usize, seed: u64) -> Result<RangesReport> {
    let s = sample_boundary(spec, cc, rho, samples, seed)?;
    Ok(RangesReport {
        report: "ranges",
        label: "NON-RIGOROUS",
        rho,
        samples,
        seed,
        w: (0..spec.n).map(|i| Range::of(s.iter().map(|x| x.w[i]))).collect(),
        h: (0..spec.n)
            .map(|i| {
                (0..spec.components[i].gammas.len())
                    .map(|j| Range::of(s.iter().map(|x| x.h[i][j])))
                    .collect()
            })
            .collect(),
    })
}
