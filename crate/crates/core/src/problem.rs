//! The JSON problem description: components, kernels, γ terms, functionals,
//! declared bounds and numerical settings.
//!
//! Numbers may be given as JSON numbers or as constant DSL strings such as
//! `"21/40"` or `"exp(-4)"`; bound values may additionally use `rho`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{BoundsTemplate, DeclaredBounds};
use crate::constants::{ConstantValues, Opt1DConfig, Window};
use crate::expr::{parse_expr, parse_functional, FunctionalExpr, ScalarExpr, VarSet};
use crate::kernel::{EnvelopeSpec, GammaDef, KernelDef};
use crate::quad::{QuadConfig, Quadrature};
use crate::solver::SolverConfig;
use crate::{Error, Result};

/// At most two γ terms per component, as in the model.
pub const MAX_GAMMA_TERMS: usize = 2;
const DEFAULT_REFERENCE_TOL: f64 = 1e-6;

/// The example system shipped with the crate.
pub const EXAMPLE_CONFIG: &str = include_str!("../../../configs/example.cfg");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumOrExpr {
    Num(f64),
    Expr(String),
}

impl NumOrExpr {
    fn constant(&self, key: &str) -> Result<f64> {
        let v = match self {
            NumOrExpr::Num(x) => *x,
            NumOrExpr::Expr(text) => parse_expr(text, VarSet::constant())
                .map_err(|e| Error::config(key, e.to_string()))?
                .eval_const()
                .map_err(|e| Error::config(key, e.to_string()))?,
        };
        if !v.is_finite() {
            return Err(Error::config(key, format!("value {v} is not finite")));
        }
        Ok(v)
    }

    fn bound_expr(&self, key: &str) -> Result<ScalarExpr> {
        let text = match self {
            NumOrExpr::Num(x) => {
                if !x.is_finite() {
                    return Err(Error::config(key, format!("value {x} is not finite")));
                }
                format!("{x:e}")
            }
            NumOrExpr::Expr(text) => text.clone(),
        };
        parse_expr(&text, VarSet::bound()).map_err(|e| Error::config(key, e.to_string()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    name: Option<String>,
    n: usize,
    components: Vec<RawComponent>,
    #[serde(default)]
    bounds: Vec<RawBounds>,
    #[serde(default)]
    quad: QuadConfig,
    #[serde(default)]
    optimizer: Opt1DConfig,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    reference_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawKernel {
    Catalog(String),
    Custom(RawCustomKernel),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustomKernel {
    #[serde(default)]
    name: Option<String>,
    k: String,
    dk_dt: String,
    #[serde(default)]
    breakpoints: Vec<f64>,
    #[serde(default)]
    moving_breakpoint: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawGammaFn {
    Catalog(String),
    Custom(RawCustomGamma),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustomGamma {
    #[serde(default)]
    name: Option<String>,
    gamma: String,
    dgamma: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    gamma: RawGammaFn,
    eta: NumOrExpr,
    h: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum RawEnvelopeMode {
    Declared,
    Tight,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    mode: RawEnvelopeMode,
    #[serde(default)]
    phi0: Option<String>,
    #[serde(default)]
    phi1: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawConstants {
    c_tilde: Option<NumOrExpr>,
    c_gamma: Vec<Option<NumOrExpr>>,
    recip_m0: Option<NumOrExpr>,
    recip_m1: Option<NumOrExpr>,
    recip_M: Option<NumOrExpr>,
    gamma_sup: Vec<Option<NumOrExpr>>,
    dgamma_sup: Vec<Option<NumOrExpr>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    kernel: RawKernel,
    window: [NumOrExpr; 2],
    lambda: NumOrExpr,
    #[serde(default)]
    gammas: Vec<RawGamma>,
    f: String,
    #[serde(default)]
    w: Option<String>,
    #[serde(default)]
    envelope: Option<RawEnvelope>,
    #[serde(default)]
    declared: RawConstants,
    #[serde(default)]
    reference: RawConstants,
}

type Row = Vec<Option<NumOrExpr>>;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawBounds {
    rho: Option<NumOrExpr>,
    w_lo: Row,
    w_hi: Row,
    f_hi: Row,
    f_lo: Row,
    delta_tilde: Row,
    xi_tilde: Row,
    h_lo: Vec<Row>,
    h_hi: Vec<Row>,
    delta: Vec<Row>,
    xi: Vec<Row>,
}

/// One boundary perturbation term `η_ij γ_ij(t) h_ij[u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTerm {
    pub gamma: GammaDef,
    pub eta: f64,
    pub h: FunctionalExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub kernel: KernelDef,
    pub window: Window,
    pub lambda: f64,
    pub gammas: Vec<GammaTerm>,
    pub f: ScalarExpr,
    pub w: FunctionalExpr,
    pub envelope: EnvelopeSpec,
    pub declared: ConstantValues,
    pub reference: ConstantValues,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub n: usize,
    pub components: Vec<ComponentSpec>,
    pub bounds: Vec<BoundsTemplate>,
    pub quad: QuadConfig,
    pub optimizer: Opt1DConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    pub reference_tol: f64,
    /// sha256 of the config text.
    pub config_hash: String,
}

/// The parameters `λ_i` and `η_ij`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub lambda: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            lambda: vec![0.0; self.lambda.len()],
            eta: self.eta.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    /// Sets a parameter by name: `lambda<i>`, `eta<i><j>` or `eta<i>_<j>`,
    /// one-based.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::model(
                "(C6)",
                format!("parameter {name} = {value} must be finite and >= 0"),
            ));
        }
        let slot = self.slot(name)?;
        *slot = value;
        Ok(())
    }

    pub fn get(&mut self, name: &str) -> Result<f64> {
        self.slot(name).map(|s| *s)
    }

    fn slot(&mut self, name: &str) -> Result<&mut f64> {
        let bad = || Error::Precondition(format!("unknown parameter `{name}`"));
        let index = |s: &str| -> Option<usize> { s.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1) };
        if let Some(rest) = name.strip_prefix("lambda") {
            let i = index(rest).ok_or_else(bad)?;
            return self.lambda.get_mut(i).ok_or_else(bad);
        }
        if let Some(rest) = name.strip_prefix("eta") {
            let (i, j) = match rest.split_once('_') {
                Some((i, j)) => (index(i), index(j)),
                None if rest.len() == 2 => (index(&rest[..1]), index(&rest[1..])),
                None => (None, None),
            };
            let (i, j) = (i.ok_or_else(bad)?, j.ok_or_else(bad)?);
            return self.eta.get_mut(i).and_then(|r| r.get_mut(j)).ok_or_else(bad);
        }
        Err(bad())
    }

    /// Canonical names in a fixed order.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (1..=self.lambda.len()).map(|i| format!("lambda{i}")).collect();
        for (i, row) in self.eta.iter().enumerate() {
            for j in 0..row.len() {
                out.push(format!("eta{}{}", i + 1, j + 1));
            }
        }
        out
    }
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn row_len(key: &str, row: &[Option<NumOrExpr>], n: usize) -> Result<()> {
    if !row.is_empty() && row.len() != n {
        return Err(Error::config(key, format!("expected {n} entries, got {}", row.len())));
    }
    Ok(())
}

fn bound_row(key: &str, row: &[Option<NumOrExpr>], n: usize) -> Result<Vec<Option<ScalarExpr>>> {
    row_len(key, row, n)?;
    let mut out = vec![None; n];
    for (i, v) in row.iter().enumerate() {
        if let Some(v) = v {
            out[i] = Some(v.bound_expr(&format!("{key}[{i}]"))?);
        }
    }
    Ok(out)
}

fn bound_matrix(key: &str, rows: &[Row], terms: &[usize]) -> Result<Vec<Vec<Option<ScalarExpr>>>> {
    row_len(key, &vec![None; rows.len()], terms.len())?;
    let mut out: Vec<Vec<Option<ScalarExpr>>> = terms.iter().map(|&m| vec![None; m]).collect();
    for (i, row) in rows.iter().enumerate() {
        out[i] = bound_row(&format!("{key}[{i}]"), row, terms[i])?;
    }
    Ok(out)
}

fn constants(key: &str, raw: &RawConstants, terms: usize) -> Result<ConstantValues> {
    let opt = |v: &Option<NumOrExpr>, k: &str| -> Result<Option<f64>> {
        v.as_ref().map(|x| x.constant(&format!("{key}.{k}"))).transpose()
    };
    let list = |v: &[Option<NumOrExpr>], k: &str| -> Result<Vec<Option<f64>>> {
        if v.len() > terms {
            return Err(Error::config(
                format!("{key}.{k}"),
                format!("{} entries for {terms} gamma terms", v.len()),
            ));
        }
        v.iter()
            .enumerate()
            .map(|(j, x)| x.as_ref().map(|x| x.constant(&format!("{key}.{k}[{j}]"))).transpose())
            .collect()
    };
    Ok(ConstantValues {
        c_tilde: opt(&raw.c_tilde, "c_tilde")?,
        c_gamma: list(&raw.c_gamma, "c_gamma")?,
        recip_m0: opt(&raw.recip_m0, "recip_m0")?,
        recip_m1: opt(&raw.recip_m1, "recip_m1")?,
        recip_M: opt(&raw.recip_M, "recip_M")?,
        gamma_sup: list(&raw.gamma_sup, "gamma_sup")?,
        dgamma_sup: list(&raw.dgamma_sup, "dgamma_sup")?,
    })
}

fn nonnegative(key: &str, v: &NumOrExpr, what: &str) -> Result<f64> {
    let x = v.constant(key)?;
    if x < 0.0 {
        return Err(Error::config(key, format!("(C6) requires {what} >= 0, got {x}")));
    }
    Ok(x)
}

fn component(i: usize, n: usize, raw: &RawComponent) -> Result<ComponentSpec> {
    let key = |k: &str| format!("components[{i}].{k}");
    let kernel = match &raw.kernel {
        RawKernel::Catalog(name) => KernelDef::catalog(name)
            .ok_or_else(|| Error::config(key("kernel"), format!("unknown catalog kernel `{name}`")))?,
        RawKernel::Custom(c) => KernelDef::new(
            c.name.clone().unwrap_or_else(|| format!("k{}", i + 1)),
            &c.k,
            &c.dk_dt,
            c.breakpoints.clone(),
            c.moving_breakpoint,
        )
        .map_err(|e| Error::config(key("kernel"), format!("(C1)/(C3): {e}")))?,
    };
    let a = raw.window[0].constant(&key("window[0]"))?;
    let b = raw.window[1].constant(&key("window[1]"))?;
    let window = Window::new(a, b).map_err(|e| Error::config(key("window"), format!("(C2): {e}")))?;
    let lambda = nonnegative(&key("lambda"), &raw.lambda, "lambda")?;
    if raw.gammas.len() > MAX_GAMMA_TERMS {
        return Err(Error::config(
            key("gammas"),
            format!("at most {MAX_GAMMA_TERMS} gamma terms per component"),
        ));
    }
    let mut gammas = Vec::new();
    for (j, g) in raw.gammas.iter().enumerate() {
        let gk = |k: &str| format!("components[{i}].gammas[{j}].{k}");
        let gamma = match &g.gamma {
            RawGammaFn::Catalog(name) => GammaDef::catalog(name)
                .ok_or_else(|| Error::config(gk("gamma"), format!("unknown catalog gamma `{name}`")))?,
            RawGammaFn::Custom(c) => GammaDef::new(
                c.name.clone().unwrap_or_else(|| format!("gamma{}{}", i + 1, j + 1)),
                &c.gamma,
                &c.dgamma,
            )
            .map_err(|e| Error::config(gk("gamma"), format!("(C5): {e}")))?,
        };
        let eta = nonnegative(&gk("eta"), &g.eta, "eta")?;
        let h = parse_functional(&g.h, n).map_err(|e| Error::config(gk("h"), format!("(C7): {e}")))?;
        gammas.push(GammaTerm { gamma, eta, h });
    }
    let f = parse_expr(&raw.f, VarSet::nonlinearity(n))
        .map_err(|e| Error::config(key("f"), format!("(C4): {e}")))?;
    let w = parse_functional(raw.w.as_deref().unwrap_or("1"), n)
        .map_err(|e| Error::config(key("w"), format!("(C8): {e}")))?;
    let envelope = match &raw.envelope {
        None => EnvelopeSpec::tight(),
        Some(RawEnvelope {
            mode: RawEnvelopeMode::Tight,
            ..
        }) => EnvelopeSpec::tight(),
        Some(RawEnvelope {
            mode: RawEnvelopeMode::Declared,
            phi0,
            phi1,
        }) => {
            let phi0 = phi0
                .as_deref()
                .ok_or_else(|| Error::config(key("envelope.phi0"), "(C2): declared mode needs phi0"))?;
            EnvelopeSpec::declared(phi0, phi1.as_deref())
                .map_err(|e| Error::config(key("envelope"), format!("(C2): {e}")))?
        }
    };
    envelope
        .validate()
        .map_err(|e| Error::config(key("envelope"), e.to_string()))?;
    Ok(ComponentSpec {
        kernel,
        window,
        lambda,
        f,
        w,
        envelope,
        declared: constants(&key("declared"), &raw.declared, gammas.len())?,
        reference: constants(&key("reference"), &raw.reference, gammas.len())?,
        gammas,
    })
}

impl ProblemSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        let n = raw.n;
        if n == 0 {
            return Err(Error::config("n", "need at least one component"));
        }
        if raw.components.len() != n {
            return Err(Error::config(
                "components",
                format!("n = {n} but {} components given", raw.components.len()),
            ));
        }
        let components = raw
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| component(i, n, c))
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<usize> = components.iter().map(|c| c.gammas.len()).collect();

        let mut bounds = Vec::new();
        for (b, rb) in raw.bounds.iter().enumerate() {
            let key = |k: &str| format!("bounds[{b}].{k}");
            let rho = rb.rho.as_ref().map(|r| r.constant(&key("rho"))).transpose()?;
            if let Some(r) = rho {
                if !(r > 0.0) {
                    return Err(Error::config(key("rho"), format!("rho must be positive, got {r}")));
                }
            }
            bounds.push(BoundsTemplate {
                rho,
                w_lo: bound_row(&key("w_lo"), &rb.w_lo, n)?,
                w_hi: bound_row(&key("w_hi"), &rb.w_hi, n)?,
                f_hi: bound_row(&key("f_hi"), &rb.f_hi, n)?,
                f_lo: bound_row(&key("f_lo"), &rb.f_lo, n)?,
                delta_tilde: bound_row(&key("delta_tilde"), &rb.delta_tilde, n)?,
                xi_tilde: bound_row(&key("xi_tilde"), &rb.xi_tilde, n)?,
                h_lo: bound_matrix(&key("h_lo"), &rb.h_lo, &terms)?,
                h_hi: bound_matrix(&key("h_hi"), &rb.h_hi, &terms)?,
                delta: bound_matrix(&key("delta"), &rb.delta, &terms)?,
                xi: bound_matrix(&key("xi"), &rb.xi, &terms)?,
            });
        }
        let mut seen = BTreeMap::new();
        for (b, t) in bounds.iter().enumerate() {
            let k = t.rho.map(f64::to_bits);
            if let Some(prev) = seen.insert(k, b) {
                return Err(Error::config(
                    format!("bounds[{b}].rho"),
                    format!("duplicates the radius of bounds[{prev}]"),
                ));
            }
        }

        Quadrature::new(raw.quad).map_err(|e| Error::config("quad", e.to_string()))?;
        raw.optimizer
            .validate()
            .map_err(|e| Error::config("optimizer", e.to_string()))?;
        raw.solver
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        let reference_tol = raw.reference_tol.unwrap_or(DEFAULT_REFERENCE_TOL);
        if !(reference_tol > 0.0) {
            return Err(Error::config("reference_tol", "must be positive"));
        }
        Ok(ProblemSpec {
            name: raw.name,
            n,
            components,
            bounds,
            quad: raw.quad,
            optimizer: raw.optimizer,
            solver: raw.solver,
            seed: raw.seed,
            reference_tol,
            config_hash: config_hash(text),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn example() -> Self {
        Self::from_json_str(EXAMPLE_CONFIG).expect("shipped example config is valid")
    }

    pub fn quadrature(&self) -> Quadrature {
        Quadrature::new(self.quad).expect("validated at load")
    }

    pub fn params(&self) -> Params {
        Params {
            lambda: self.components.iter().map(|c| c.lambda).collect(),
            eta: self
                .components
                .iter()
                .map(|c| c.gammas.iter().map(|g| g.eta).collect())
                .collect(),
        }
    }

    pub fn set_params(&mut self, p: &Params) -> Result<()> {
        if p.lambda.len() != self.n || p.eta.len() != self.n {
            return Err(Error::Precondition("parameter shape does not match the system".into()));
        }
        for (i, c) in self.components.iter_mut().enumerate() {
            if p.eta[i].len() != c.gammas.len() {
                return Err(Error::Precondition("parameter shape does not match the system".into()));
            }
            c.lambda = p.lambda[i];
            for (g, &e) in c.gammas.iter_mut().zip(&p.eta[i]) {
                g.eta = e;
            }
        }
        Ok(())
    }

    pub fn with_params(&self, p: &Params) -> Result<Self> {
        let mut out = self.clone();
        out.set_params(p)?;
        Ok(out)
    }

    pub fn gamma_terms(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.gammas.len()).collect()
    }

    /// Resolves the declared bounds at `rho`: the block declared for this
    /// radius, else the template block without a radius.
    pub fn bounds_at(&self, rho: f64) -> Result<DeclaredBounds> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Precondition(format!("rho must be positive, got {rho}")));
        }
        let exact = self
            .bounds
            .iter()
            .find(|b| b.rho.is_some_and(|r| (r - rho).abs() <= 1e-12 * rho));
        let template = self.bounds.iter().find(|b| b.rho.is_none());
        match exact.or(template) {
            Some(t) => t.resolve(rho),
            None => Ok(DeclaredBounds::empty(rho, &self.gamma_terms())),
        }
    }
}
