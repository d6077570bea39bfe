//! Nyström discretization of the operator `T` and damped Picard iteration.
//!
//! `T` is applied node-wise: for each node `t_j` the integrals
//! `∫ k_i(t_j, s) g_i(s) ds` and `∫ ∂k_i/∂t (t_j, s) g_i(s) ds` with
//! `g_i(s) = f_i(s, u(s), u'(s), w_i[u])` use composite Gauss–Legendre on
//! panels delimited by the grid nodes and the kernel breakpoints. Moving
//! breakpoints `s = t_j` are grid nodes, so every panel sees a smooth
//! integrand and the kernel rows can be tabulated once.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cone::{c1_norm, cone_membership, DiscreteState, Membership, StateNorms};
use crate::constants::ConeConstants;
use crate::expr::{eval_functional_as, EvalEnv, FunctionalRole};
use crate::problem::ProblemSpec;
use crate::quad::Quadrature;
use crate::{par, Error, Result};

const STAGNATION_WINDOW: usize = 50;
const STAGNATION_FACTOR: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Zero,
    Constant(f64),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Grid intervals `N`.
    pub nodes: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialState,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nodes: 128,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            initial: InitialState::Zero,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Precondition(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Precondition("tol must be positive and max_iter nonzero".into()));
        }
        if self.nodes < crate::cone::MIN_INTERVALS {
            return Err(Error::Precondition(format!(
                "need at least {} intervals, got {}",
                crate::cone::MIN_INTERVALS,
                self.nodes
            )));
        }
        Ok(())
    }
}

/// Tabulated kernel rows for one grid: `k_i(t_j, s_q) ω_q` and the
/// derivative analogue, plus `γ_ij(t_j)` and `γ'_ij(t_j)`.
#[derive(Debug, Clone)]
pub struct Nystrom {
    intervals: usize,
    points: Vec<f64>,
    k: Vec<Vec<f64>>,
    dk: Vec<Vec<f64>>,
    gamma: Vec<Vec<Vec<f64>>>,
    dgamma: Vec<Vec<Vec<f64>>>,
}

impl Nystrom {
    pub fn new(spec: &ProblemSpec, intervals: usize, quad: &Quadrature) -> Result<Self> {
        let nodes: Vec<f64> = (0..=intervals).map(|j| j as f64 / intervals as f64).collect();
        let mut cuts = nodes.clone();
        for c in &spec.components {
            cuts.extend(c.kernel.fixed_breakpoints.iter().copied());
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        let rule = quad.rule();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for p in cuts.windows(2) {
            let mid = 0.5 * (p[0] + p[1]);
            let half = 0.5 * (p[1] - p[0]);
            for (x, w) in rule.nodes().iter().zip(rule.weights()) {
                points.push(mid + half * x);
                weights.push(half * w);
            }
        }
        let n = spec.n;
        let rows = par::try_map_range(n * nodes.len(), |idx| -> Result<(Vec<f64>, Vec<f64>)> {
            let (i, j) = (idx / nodes.len(), idx % nodes.len());
            let kd = &spec.components[i].kernel;
            let t = nodes[j];
            let mut kr = Vec::with_capacity(points.len());
            let mut dr = Vec::with_capacity(points.len());
            for (&s, &w) in points.iter().zip(&weights) {
                kr.push(kd.eval_k(t, s)? * w);
                dr.push(kd.eval_dk(t, s)? * w);
            }
            Ok((kr, dr))
        })?;
        let (k, dk) = rows.into_iter().unzip();
        let mut gamma = Vec::with_capacity(n);
        let mut dgamma = Vec::with_capacity(n);
        for c in &spec.components {
            let mut g = Vec::new();
            let mut dg = Vec::new();
            for term in &c.gammas {
                g.push(nodes.iter().map(|&t| term.gamma.eval(t)).collect::<Result<Vec<_>, _>>()?);
                dg.push(nodes.iter().map(|&t| term.gamma.eval_d(t)).collect::<Result<Vec<_>, _>>()?);
            }
            gamma.push(g);
            dgamma.push(dg);
        }
        Ok(Nystrom {
            intervals,
            points,
            k,
            dk,
            gamma,
            dgamma,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// `Tu` at the grid nodes.
    pub fn apply(&self, spec: &ProblemSpec, u: &DiscreteState, quad: &Quadrature) -> Result<DiscreteState> {
        let n = spec.n;
        if u.components() != n || u.intervals() != self.intervals {
            return Err(Error::Precondition(format!(
                "state is {}x{}, operator expects {}x{}",
                u.components(),
                u.intervals(),
                n,
                self.intervals
            )));
        }
        // functionals, frozen for this application
        let mut w = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        for (i, c) in spec.components.iter().enumerate() {
            let active = c.lambda != 0.0;
            w.push(if active {
                eval_functional_as(&c.w, u, quad, FunctionalRole::W { i })?
            } else {
                0.0
            });
            h.push(
                c.gammas
                    .iter()
                    .enumerate()
                    .map(|(j, g)| {
                        if g.eta == 0.0 {
                            Ok(0.0)
                        } else {
                            eval_functional_as(&g.h, u, quad, FunctionalRole::H { i, j })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }

        // g_i at the quadrature points
        let g: Vec<Vec<f64>> = par::try_map_range(n, |i| -> Result<Vec<f64>> {
            let c = &spec.components[i];
            if c.lambda == 0.0 {
                return Ok(Vec::new());
            }
            let mut uu = vec![0.0; n];
            let mut du = vec![0.0; n];
            self.points
                .iter()
                .map(|&s| {
                    u.eval_into(s, &mut uu, &mut du);
                    let v = c.f.eval(&EvalEnv {
                        t: s,
                        u: &uu,
                        du: &du,
                        w: w[i],
                        ..EvalEnv::default()
                    })?;
                    if v < 0.0 {
                        return Err(Error::model(
                            "(C4)",
                            format!("f_{}({s}, ...) = {v} is negative", i + 1),
                        ));
                    }
                    Ok(v)
                })
                .collect()
        })?;

        let m = self.intervals + 1;
        let rows = par::map_range(n * m, |idx| {
            let (i, j) = (idx / m, idx % m);
            let c = &spec.components[i];
            let (mut v, mut d) = (0.0, 0.0);
            if c.lambda != 0.0 {
                let (kr, dr) = (&self.k[idx], &self.dk[idx]);
                let mut sv = 0.0;
                let mut sd = 0.0;
                for q in 0..g[i].len() {
                    sv += kr[q] * g[i][q];
                    sd += dr[q] * g[i][q];
                }
                v = c.lambda * sv;
                d = c.lambda * sd;
            }
            for (t, term) in c.gammas.iter().enumerate() {
                v += term.eta * self.gamma[i][t][j] * h[i][t];
                d += term.eta * self.dgamma[i][t][j] * h[i][t];
            }
            (v, d)
        });
        let mut values = vec![vec![0.0; m]; n];
        let mut derivs = vec![vec![0.0; m]; n];
        for (idx, (v, d)) in rows.into_iter().enumerate() {
            values[idx / m][idx % m] = v;
            derivs[idx / m][idx % m] = d;
        }
        DiscreteState::new(values, derivs)
    }
}

/// One application of `T` on the state's own grid.
#[allow(non_snake_case)]
pub fn apply_T(spec: &ProblemSpec, u: &DiscreteState, quad: &Quadrature) -> Result<DiscreteState> {
    Nystrom::new(spec, u.intervals(), quad)?.apply(spec, u, quad)
}

/// `‖Tu − u‖` in the discrete C¹ norm.
pub fn residual(spec: &ProblemSpec, u: &DiscreteState, quad: &Quadrature) -> Result<f64> {
    let tu = apply_T(spec, u, quad)?;
    Ok(c1_norm(&tu.axpy(-1.0, u)?).norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localization {
    pub rho1: f64,
    pub rho2: f64,
    pub norm: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub report: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
    pub damping_halved: bool,
    pub intervals: usize,
    pub norms: StateNorms,
    pub nonzero: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership: Option<Membership>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization: Option<Localization>,
    #[serde(skip)]
    pub state: DiscreteState,
}

impl SolveReport {
    pub fn with_membership(mut self, cc: &ConeConstants, slack: f64) -> Self {
        self.membership = Some(cone_membership(&self.state, cc, slack));
        self
    }

    pub fn with_localization(mut self, rho1: f64, rho2: f64) -> Self {
        self.localization = Some(Localization {
            rho1,
            rho2,
            norm: self.norms.norm,
            inside: localization_check(&self, rho1, rho2),
        });
        self
    }
}

/// `ρ1 ≤ ‖u‖ ≤ ρ2`; use `f64::INFINITY` for an open upper end.
pub fn localization_check(report: &SolveReport, rho1: f64, rho2: f64) -> bool {
    let norm = report.norms.norm;
    rho1 <= norm && norm <= rho2
}

pub fn initial_state(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<DiscreteState> {
    match &cfg.initial {
        InitialState::Zero => DiscreteState::zeros(spec.n, cfg.nodes),
        InitialState::Constant(c) => DiscreteState::from_fn(spec.n, cfg.nodes, |_, _| (*c, 0.0)),
        InitialState::Csv(path) => {
            let u = DiscreteState::read_csv(std::fs::File::open(path)?)?;
            if u.components() != spec.n || u.intervals() != cfg.nodes {
                return Err(Error::Precondition(format!(
                    "initial state {} is {}x{}, expected {}x{}",
                    path.display(),
                    u.components(),
                    u.intervals(),
                    spec.n,
                    cfg.nodes
                )));
            }
            Ok(u)
        }
    }
}

/// Damped Picard iteration `u ← (1 − α) u + α T u` from the configured
/// initial state. The damping is halved once when the residual drops by
/// less than 1% over 50 iterations; a second stagnation ends the run.
/// Non-convergence is reported, not raised.
pub fn solve_fixed_point(spec: &ProblemSpec, cfg: &SolverConfig, quad: &Quadrature) -> Result<SolveReport> {
    cfg.validate()?;
    let u0 = initial_state(spec, cfg)?;
    solve_from(spec, cfg, quad, u0)
}

pub fn solve_from(spec: &ProblemSpec, cfg: &SolverConfig, quad: &Quadrature, u0: DiscreteState) -> Result<SolveReport> {
    cfg.validate()?;
    let op = Nystrom::new(spec, u0.intervals(), quad)?;
    let mut u = u0;
    let mut alpha = cfg.damping;
    let mut halved = false;
    let mut history: Vec<f64> = Vec::new();
    let mut res = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let tu = op.apply(spec, &u, quad)?;
        res = c1_norm(&tu.axpy(-1.0, &u)?).norm;
        if !res.is_finite() {
            break;
        }
        if res <= cfg.tol {
            converged = true;
            break;
        }
        history.push(res);
        if history.len() > STAGNATION_WINDOW {
            let old = history[history.len() - 1 - STAGNATION_WINDOW];
            if res > STAGNATION_FACTOR * old {
                if halved {
                    break;
                }
                alpha *= 0.5;
                halved = true;
                history.clear();
            }
        }
        u = u.blend(alpha, &tu)?;
    }
    let norms = c1_norm(&u);
    Ok(SolveReport {
        report: "solve",
        converged,
        iterations,
        residual: res,
        damping: alpha,
        damping_halved: halved,
        intervals: u.intervals(),
        nonzero: norms.norm > 0.0,
        norms,
        membership: None,
        localization: None,
        state: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(kernel: &str) -> ProblemSpec {
        let text = format!(
            r#"{{"n": 1, "components": [{{"kernel": "{kernel}", "window": [0, 0.375], "lambda": 1, "f": "1"}}]}}"#
        );
        ProblemSpec::from_json_str(&text).unwrap()
    }

    #[test]
    fn linear_oracle_images() {
        for (kernel, c) in [("example-k1", 0.375), ("example-k2", 0.425)] {
            let spec = linear(kernel);
            let q = spec.quadrature();
            let u = DiscreteState::zeros(1, 128).unwrap();
            let tu = apply_T(&spec, &u, &q).unwrap();
            for j in 0..=128 {
                let t = j as f64 / 128.0;
                assert!((tu.node_values(0)[j] - (c - 0.5 * t * t)).abs() < 1e-12, "{kernel} at {t}");
                assert!((tu.node_derivs(0)[j] + t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residuals_of_the_linear_problem() {
        let spec = linear("example-k1");
        let q = spec.quadrature();
        let exact = DiscreteState::from_fn(1, 128, |_, t| (0.375 - 0.5 * t * t, -t)).unwrap();
        assert!(residual(&spec, &exact, &q).unwrap() <= 1e-10);
        let zero = DiscreteState::zeros(1, 128).unwrap();
        assert!((residual(&spec, &zero, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_parameters_give_zero_image() {
        let spec = ProblemSpec::example();
        let p = spec.params().zeros_like();
        let spec = spec.with_params(&p).unwrap();
        let q = spec.quadrature();
        let u = DiscreteState::from_fn(2, 16, |i, t| (t + i as f64, 1.0)).unwrap();
        let tu = apply_T(&spec, &u, &q).unwrap();
        assert!(tu.node_values(0).iter().chain(tu.node_derivs(1)).all(|&v| v == 0.0));
        let r = solve_fixed_point(&spec, &SolverConfig::default(), &q).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.norms.norm, 0.0);
    }

    #[test]
    fn negative_f_is_a_c4_violation() {
        let text = r#"{"n": 1, "components": [{"kernel": "example-k1", "window": [0, 0.375], "lambda": 1, "f": "u1 - 1"}]}"#;
        let spec = ProblemSpec::from_json_str(text).unwrap();
        let q = spec.quadrature();
        let u = DiscreteState::zeros(1, 16).unwrap();
        assert!(matches!(apply_T(&spec, &u, &q), Err(Error::Model { condition: "(C4)", .. })));
    }

    #[test]
    fn stagnation_halves_damping_then_stops() {
        // T u = 1 - u has fixed point 1/2; undamped Picard oscillates
        let text = r#"{"n": 1, "components": [{"kernel": {"k": "1", "dk_dt": "0"}, "window": [0, 1], "lambda": 1, "f": "pos(1 - 2*u1) + 0*w"}]}"#;
        let spec = ProblemSpec::from_json_str(text).unwrap();
        let q = spec.quadrature();
        let cfg = SolverConfig {
            nodes: 16,
            damping: 1.0,
            max_iter: 500,
            ..SolverConfig::default()
        };
        let r = solve_fixed_point(&spec, &cfg, &q).unwrap();
        assert!(r.damping_halved);
        assert!(r.converged);
        assert_eq!(r.damping, 0.5);
    }

    #[test]
    fn localization() {
        let spec = linear("example-k1");
        let q = spec.quadrature();
        let r = solve_fixed_point(&spec, &SolverConfig::default(), &q).unwrap();
        assert!(localization_check(&r, 1e-3, 1.0));
        assert!(localization_check(&r, 0.0, f64::INFINITY));
        let r = r.with_localization(2.0, 3.0);
        assert!(!r.localization.unwrap().inside);
    }
}
