//! Kernel and cone constants: `c̃_i`, `c_ij`, `c_i`, `1/m_i0`, `1/m_i1`,
//! `1/M_i` and the γ norms, with the standing-condition checks behind them.
//!
//! Every sup/inf over one variable is a grid scan plus golden-section
//! refinement (see [`opt`]); the resulting constants are exact up to the
//! reported grid resolution, not rigorous enclosures.

mod opt;

use serde::{Deserialize, Serialize};

pub use opt::{maximize, minimize, sup_abs_1d, Extremum, Opt1DConfig};

use crate::kernel::{EnvelopeMode, EnvelopeSpec, GammaDef, KernelDef};
use crate::problem::{ComponentSpec, ProblemSpec};
use crate::quad::Quadrature;
use crate::{par, Error, Result};

/// Sign-change scan density per unit length of s.
const SIGN_SCAN: f64 = 512.0;
const ENVELOPE_GRID: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a: f64,
    pub b: f64,
}

impl Window {
    pub const UNIT: Window = Window { a: 0.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::Precondition(format!(
                "window [{a}, {b}] must satisfy 0 <= a < b <= 1"
            )));
        }
        Ok(Window { a, b })
    }
}

/// Splits `[a, b]` additionally at sign changes of `g`, located by bisection
/// between sign-differing scan points, and integrates `|g|`.
fn abs_integral<G>(g: G, a: f64, b: f64, breakpoints: &[f64], quad: &Quadrature) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    let mut all = cuts.clone();
    for p in cuts.windows(2) {
        let (p0, p1) = (p[0], p[1]);
        let m = ((SIGN_SCAN * (p1 - p0)).ceil() as usize).max(8);
        let at = |j: usize| p0 + (p1 - p0) * (j as f64 + 0.5) / m as f64;
        let mut prev = (at(0), g(at(0))?);
        for j in 1..m {
            let x = at(j);
            let v = g(x)?;
            if prev.1 * v < 0.0 {
                let (mut lo, mut hi, lo_val) = (prev.0, x, prev.1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if !(mid > lo && mid < hi) {
                        break;
                    }
                    let vm = g(mid)?;
                    if vm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (vm < 0.0) == (lo_val < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                all.push(0.5 * (lo + hi));
            }
            prev = (x, v);
        }
    }
    quad.try_integrate(|s| g(s).map(f64::abs), a, b, &all)
}

/// `1/m_il = sup_t ∫₀¹ |∂ˡk/∂tˡ (t, s)| ds` for `order` 0 or 1.
pub fn recip_m(kd: &KernelDef, order: u8, quad: &Quadrature, cfg: &Opt1DConfig) -> Result<Extremum> {
    if order > 1 {
        return Err(Error::Precondition(format!("recip_m order must be 0 or 1, got {order}")));
    }
    maximize(
        |t| {
            let bps = kd.s_breakpoints(t);
            if order == 0 {
                abs_integral(|s| Ok(kd.eval_k(t, s)?), 0.0, 1.0, &bps, quad)
            } else {
                abs_integral(|s| Ok(kd.eval_dk(t, s)?), 0.0, 1.0, &bps, quad)
            }
        },
        Window::UNIT,
        &kd.fixed_breakpoints,
        cfg,
    )
}

/// `1/M_i = inf_{t ∈ [a,b]} ∫_a^b k(t, s) ds`.
#[allow(non_snake_case)]
pub fn recip_M(kd: &KernelDef, w: Window, quad: &Quadrature, cfg: &Opt1DConfig) -> Result<Extremum> {
    minimize(
        |t| quad.try_integrate(|s| Ok(kd.eval_k(t, s)?), w.a, w.b, &kd.s_breakpoints(t)),
        w,
        &kd.fixed_breakpoints,
        cfg,
    )
}

/// `Φ0(s) = max_t |k(t, s)|`.
pub fn tight_envelope(kd: &KernelDef, s: f64, cfg: &Opt1DConfig) -> Result<f64> {
    let nodes = [s];
    Ok(sup_abs_1d(|t| Ok(kd.eval_k(t, s)?), Window::UNIT, &nodes, cfg)?.value)
}

fn check_declared_envelope(kd: &KernelDef, env: &EnvelopeSpec) -> Result<()> {
    let mut ts: Vec<f64> = (0..=ENVELOPE_GRID).map(|j| j as f64 / ENVELOPE_GRID as f64).collect();
    ts.extend(&kd.fixed_breakpoints);
    let checks = par::try_map_range(ts.len(), |si| -> Result<()> {
        let s = ts[si];
        if let Some(phi0) = &env.phi0 {
            let bound = phi0.eval_s(s)?;
            for &t in &ts {
                let k = kd.eval_k(t, s)?;
                if k.abs() > bound * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::model(
                        "(C2)",
                        format!("|k({t}, {s})| = {} exceeds declared phi0 = {bound}", k.abs()),
                    ));
                }
            }
        }
        if let Some(phi1) = &env.phi1 {
            let bound = phi1.eval_s(s)?;
            for &t in &ts {
                if kd.near_breakpoint(t, s) {
                    continue;
                }
                let dk = kd.eval_dk(t, s)?;
                if dk.abs() > bound * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::model(
                        "(C3)",
                        format!("|dk/dt({t}, {s})| = {} exceeds declared phi1 = {bound}", dk.abs()),
                    ));
                }
            }
        }
        Ok(())
    });
    checks.map(|_| ())
}

/// `c̃ = inf_s min_{t ∈ [a,b]} k(t, s) / Φ0(s)`, skipping points where
/// `Φ0(s) = 0`. A declared envelope is first checked against `|k|`.
pub fn c_tilde(kd: &KernelDef, w: Window, env: &EnvelopeSpec, cfg: &Opt1DConfig) -> Result<Extremum> {
    env.validate()?;
    if env.mode == EnvelopeMode::Declared {
        check_declared_envelope(kd, env)?;
    }
    let mut nodes = kd.fixed_breakpoints.clone();
    nodes.extend([w.a, w.b]);
    let ratio = |s: f64| -> Result<f64> {
        let phi = match (env.mode, &env.phi0) {
            (EnvelopeMode::Declared, Some(phi0)) => phi0.eval_s(s)?,
            _ => tight_envelope(kd, s, cfg)?,
        };
        if phi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let t_nodes = [s];
        let kmin = minimize(|t| Ok(kd.eval_k(t, s)?), w, &t_nodes, cfg)?.value;
        Ok(kmin / phi)
    };
    let e = minimize(ratio, Window::UNIT, &nodes, cfg)?;
    if !e.value.is_finite() {
        return Err(Error::model("(C2)", "envelope phi0 vanishes identically"));
    }
    if !(e.value > 0.0) {
        return Err(Error::model(
            "(C2)",
            format!(
                "c_tilde = {} <= 0 on window [{}, {}] (attained near s = {})",
                e.value, w.a, w.b, e.arg
            ),
        ));
    }
    if e.value > 1.0 + 1e-12 {
        return Err(Error::model("(C2)", format!("c_tilde = {} exceeds 1", e.value)));
    }
    Ok(e)
}

/// Tight `c_ij = min_{[a,b]} γ / ‖γ‖∞`.
pub fn gamma_c(gamma: &GammaDef, w: Window, cfg: &Opt1DConfig) -> Result<f64> {
    let sup = sup_abs_1d(|t| Ok(gamma.eval(t)?), Window::UNIT, &[], cfg)?.value;
    if !(sup > 0.0) {
        return Err(Error::model("(C5)", format!("{} vanishes identically", gamma.name)));
    }
    let min = minimize(|t| Ok(gamma.eval(t)?), w, &[], cfg)?.value;
    let c = min / sup;
    if !(c > 0.0) {
        return Err(Error::model(
            "(C5)",
            format!("{} has c = {c} <= 0 on window [{}, {}]", gamma.name, w.a, w.b),
        ));
    }
    Ok(c)
}

/// Optional per-constant values, used both for declared overrides and for
/// reference values that are only compared.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ConstantValues {
    pub c_tilde: Option<f64>,
    pub c_gamma: Vec<Option<f64>>,
    pub recip_m0: Option<f64>,
    pub recip_m1: Option<f64>,
    pub recip_M: Option<f64>,
    pub gamma_sup: Vec<Option<f64>>,
    pub dgamma_sup: Vec<Option<f64>>,
}

impl ConstantValues {
    pub fn is_empty(&self) -> bool {
        *self == ConstantValues::default()
    }
}

/// Whether a declared value may replace the computed one: lower-type
/// constants may only shrink, upper-type ones may only grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constant {
    pub symbol: String,
    pub key: String,
    pub direction: Direction,
    pub computed: f64,
    /// Value with the tight envelope, when a declared one was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tight: Option<f64>,
    pub declared: Option<f64>,
    pub reference: Option<f64>,
    pub used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<String>,
}

impl Constant {
    fn new(symbol: String, key: &str, direction: Direction, computed: f64) -> Self {
        Constant {
            symbol,
            key: key.to_string(),
            direction,
            computed,
            tight: None,
            declared: None,
            reference: None,
            used: computed,
            arg: None,
            resolution: None,
            discrepancy: None,
        }
    }

    fn located(mut self, e: &Extremum) -> Self {
        self.arg = Some(e.arg);
        self.resolution = Some(e.resolution);
        self
    }

    fn declare(&mut self, declared: Option<f64>, key_path: &str) -> Result<()> {
        let Some(d) = declared else { return Ok(()) };
        let ok = match self.direction {
            Direction::Lower => d <= self.computed,
            Direction::Upper => d >= self.computed,
        };
        if !ok || !d.is_finite() {
            let rel = match self.direction {
                Direction::Lower => "<=",
                Direction::Upper => ">=",
            };
            return Err(Error::config(
                key_path,
                format!(
                    "declared {} = {d} must be {rel} the computed value {}",
                    self.symbol, self.computed
                ),
            ));
        }
        self.declared = Some(d);
        self.used = d;
        Ok(())
    }

    fn compare(&mut self, reference: Option<f64>, tol: f64) {
        let Some(r) = reference else { return };
        self.reference = Some(r);
        if (self.computed - r).abs() > tol * r.abs().max(1.0) {
            self.discrepancy = Some(format!(
                "computed {} = {} differs from reference value {r} by {}",
                self.symbol,
                self.computed,
                self.computed - r
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub mode: EnvelopeMode,
    pub phi0: Option<String>,
    pub phi1: Option<String>,
}

/// Constants of one component `i` (zero-based `index`).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ComponentConstants {
    pub index: usize,
    pub window: Window,
    pub c_tilde: Constant,
    pub c_gamma: Vec<Constant>,
    /// `c_i = min{c̃_i, c_i1, c_i2}` over used values.
    pub c: f64,
    pub recip_m0: Constant,
    pub recip_m1: Constant,
    pub recip_M: Constant,
    pub gamma_sup: Vec<Constant>,
    pub dgamma_sup: Vec<Constant>,
    pub envelope: EnvelopeReport,
}

impl ComponentConstants {
    /// Constants carrying only a window and a cone constant, for tests of
    /// cone geometry. The kernel constants are zero.
    pub fn bare(index: usize, window: Window, c: f64) -> Self {
        let sub = index + 1;
        ComponentConstants {
            index,
            window,
            c_tilde: Constant::new(format!("\\tilde{{c}}_{sub}"), "c_tilde", Direction::Lower, c),
            c_gamma: Vec::new(),
            c,
            recip_m0: Constant::new(format!("1/m_{{{sub}0}}"), "recip_m0", Direction::Upper, 0.0),
            recip_m1: Constant::new(format!("1/m_{{{sub}1}}"), "recip_m1", Direction::Upper, 0.0),
            recip_M: Constant::new(format!("1/M_{sub}"), "recip_M", Direction::Lower, 0.0),
            gamma_sup: Vec::new(),
            dgamma_sup: Vec::new(),
            envelope: EnvelopeReport {
                mode: EnvelopeMode::Tight,
                phi0: None,
                phi1: None,
            },
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Constant> {
        [&self.c_tilde, &self.recip_m0, &self.recip_m1, &self.recip_M]
            .into_iter()
            .chain(&self.c_gamma)
            .chain(&self.gamma_sup)
            .chain(&self.dgamma_sup)
    }

    pub fn discrepancies(&self) -> impl Iterator<Item = &Constant> {
        self.all().filter(|c| c.discrepancy.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeConstants {
    pub components: Vec<ComponentConstants>,
}

impl ConeConstants {
    pub fn c(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.c).collect()
    }
}

fn indexed(v: &[Option<f64>], j: usize) -> Option<f64> {
    v.get(j).copied().flatten()
}

fn assemble_component(
    i: usize,
    comp: &ComponentSpec,
    reference_tol: f64,
    quad: &Quadrature,
    cfg: &Opt1DConfig,
) -> Result<ComponentConstants> {
    let sub = i + 1;
    let key = |field: &str| format!("components[{i}].declared.{field}");
    let kd = &comp.kernel;
    kd.validate_derivative()
        .map_err(|m| Error::model("(C3)", format!("kernel {}: {m}", kd.name)))?;
    for g in &comp.gammas {
        g.gamma
            .validate_derivative()
            .map_err(|m| Error::model("(C5)", format!("{}: {m}", g.gamma.name)))?;
    }

    let m0 = recip_m(kd, 0, quad, cfg)?;
    let m1 = recip_m(kd, 1, quad, cfg)?;
    #[allow(non_snake_case)]
    let M = recip_M(kd, comp.window, quad, cfg)?;
    let ct = c_tilde(kd, comp.window, &comp.envelope, cfg)?;

    let mut c_tilde_c = Constant::new(format!("\\tilde{{c}}_{sub}"), "c_tilde", Direction::Lower, ct.value)
        .located(&ct);
    if comp.envelope.mode == EnvelopeMode::Declared {
        c_tilde_c.tight = Some(c_tilde(kd, comp.window, &EnvelopeSpec::tight(), cfg)?.value);
    }
    c_tilde_c.declare(comp.declared.c_tilde, &key("c_tilde"))?;
    c_tilde_c.compare(comp.reference.c_tilde, reference_tol);
    if !(c_tilde_c.used > 0.0 && c_tilde_c.used <= 1.0) {
        return Err(Error::model("(C2)", format!("c_tilde_{sub} = {} not in (0, 1]", c_tilde_c.used)));
    }

    let mut recip_m0 = Constant::new(format!("1/m_{{{sub}0}}"), "recip_m0", Direction::Upper, m0.value).located(&m0);
    recip_m0.declare(comp.declared.recip_m0, &key("recip_m0"))?;
    recip_m0.compare(comp.reference.recip_m0, reference_tol);
    let mut recip_m1 = Constant::new(format!("1/m_{{{sub}1}}"), "recip_m1", Direction::Upper, m1.value).located(&m1);
    recip_m1.declare(comp.declared.recip_m1, &key("recip_m1"))?;
    recip_m1.compare(comp.reference.recip_m1, reference_tol);
    #[allow(non_snake_case)]
    let mut recip_M_c = Constant::new(format!("1/M_{sub}"), "recip_M", Direction::Lower, M.value).located(&M);
    recip_M_c.declare(comp.declared.recip_M, &key("recip_M"))?;
    recip_M_c.compare(comp.reference.recip_M, reference_tol);

    let mut c_gamma = Vec::new();
    let mut gamma_sup = Vec::new();
    let mut dgamma_sup = Vec::new();
    for (j, g) in comp.gammas.iter().enumerate() {
        let sj = format!("{sub}{}", j + 1);
        let cg = gamma_c(&g.gamma, comp.window, cfg)?;
        let mut c = Constant::new(format!("c_{{{sj}}}"), "c_gamma", Direction::Lower, cg);
        c.declare(indexed(&comp.declared.c_gamma, j), &format!("{}[{j}]", key("c_gamma")))?;
        c.compare(indexed(&comp.reference.c_gamma, j), reference_tol);
        if !(c.used > 0.0 && c.used <= 1.0) {
            return Err(Error::model("(C5)", format!("c_{{{sj}}} = {} not in (0, 1]", c.used)));
        }
        c_gamma.push(c);

        let gs = sup_abs_1d(|t| Ok(g.gamma.eval(t)?), Window::UNIT, &[], cfg)?;
        let mut c = Constant::new(format!("\\|\\gamma_{{{sj}}}\\|_\\infty"), "gamma_sup", Direction::Upper, gs.value)
            .located(&gs);
        c.declare(indexed(&comp.declared.gamma_sup, j), &format!("{}[{j}]", key("gamma_sup")))?;
        c.compare(indexed(&comp.reference.gamma_sup, j), reference_tol);
        gamma_sup.push(c);

        let ds = sup_abs_1d(|t| Ok(g.gamma.eval_d(t)?), Window::UNIT, &[], cfg)?;
        let mut c = Constant::new(
            format!("\\|\\gamma'_{{{sj}}}\\|_\\infty"),
            "dgamma_sup",
            Direction::Upper,
            ds.value,
        )
        .located(&ds);
        c.declare(indexed(&comp.declared.dgamma_sup, j), &format!("{}[{j}]", key("dgamma_sup")))?;
        c.compare(indexed(&comp.reference.dgamma_sup, j), reference_tol);
        dgamma_sup.push(c);
    }

    let c = c_gamma.iter().map(|c| c.used).fold(c_tilde_c.used, f64::min);
    Ok(ComponentConstants {
        index: i,
        window: comp.window,
        c_tilde: c_tilde_c,
        c_gamma,
        c,
        recip_m0,
        recip_m1,
        recip_M: recip_M_c,
        gamma_sup,
        dgamma_sup,
        envelope: EnvelopeReport {
            mode: comp.envelope.mode,
            phi0: comp.envelope.phi0.as_ref().map(|e| e.to_string()),
            phi1: comp.envelope.phi1.as_ref().map(|e| e.to_string()),
        },
    })
}

/// Computes, checks and (where declared) overrides all constants of the
/// system. Components are processed concurrently.
pub fn assemble_cone_constants(spec: &ProblemSpec, quad: &Quadrature, cfg: &Opt1DConfig) -> Result<ConeConstants> {
    let components = par::try_map_range(spec.components.len(), |i| {
        assemble_component(i, &spec.components[i], spec.reference_tol, quad, cfg)
    })?;
    Ok(ConeConstants { components })
}

pub const RECIP_M_READING: &str =
    "1/M_i is computed as inf over t in [a_i, b_i] of the integral of k_i(t, s) over s in [a_i, b_i]";
pub const RESOLUTION_CAVEAT: &str =
    "sup/inf over one variable use a grid scan plus golden-section refinement; values are exact up to the reported grid resolution";

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport<'a> {
    pub report: &'static str,
    pub config_hash: &'a str,
    pub components: &'a [ComponentConstants],
    pub discrepancies: Vec<String>,
    pub notes: Vec<&'static str>,
}

impl<'a> ConstantsReport<'a> {
    pub fn new(config_hash: &'a str, cc: &'a ConeConstants) -> Self {
        ConstantsReport {
            report: "constants",
            config_hash,
            components: &cc.components,
            discrepancies: cc
                .components
                .iter()
                .flat_map(|c| c.discrepancies())
                .filter_map(|c| c.discrepancy.clone())
                .collect(),
            notes: vec![RECIP_M_READING, RESOLUTION_CAVEAT],
        }
    }
}
