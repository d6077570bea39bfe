//! Breakpoint-aware composite Gauss–Legendre quadrature.
//!
//! The interval is first cut at the supplied breakpoints; each panel is then
//! bisected until the whole-panel estimate and the sum of its two halves
//! agree to `max(rel_tol * |I|, abs_tol)`. Every integral in the crate goes
//! through [`Quadrature`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub gauss_order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth per panel.
    pub max_subdivisions: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            gauss_order: 8,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid quadrature config: {0}")]
    Config(String),
    #[error("invalid integration interval [{a}, {b}]")]
    Interval { a: f64, b: f64 },
    #[error("no convergence on [{a}, {b}] after {depth} bisections ({coarse} vs {fine})")]
    NonConvergence {
        a: f64,
        b: f64,
        depth: u32,
        coarse: f64,
        fine: f64,
    },
    #[error("integrand returned {value} at {at}")]
    NonFinite { at: f64, value: f64 },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // Nudge the central weight so that the weights sum to exactly 2 in
        // the order the panel rule accumulates them; constants then
        // integrate exactly on dyadic panels.
        let mid = n / 2;
        'fix: for k in [mid, 0, n - 1] {
            for _ in 0..4096 {
                let sum: f64 = weights.iter().sum();
                if sum == 2.0 {
                    break 'fix;
                }
                weights[k] = if sum > 2.0 {
                    weights[k].next_down()
                } else {
                    weights[k].next_up()
                };
            }
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Validated quadrature engine; cheap to clone.
#[derive(Debug, Clone)]
pub struct Quadrature {
    cfg: QuadConfig,
    rule: Arc<GaussLegendre>,
}

impl Quadrature {
    pub fn new(cfg: QuadConfig) -> Result<Self, QuadError> {
        if cfg.gauss_order < 2 {
            return Err(QuadError::Config(format!(
                "gauss_order must be >= 2, got {}",
                cfg.gauss_order
            )));
        }
        if !(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0) {
            return Err(QuadError::Config(
                "rel_tol and abs_tol must be positive".into(),
            ));
        }
        Ok(Quadrature {
            cfg,
            rule: Arc::new(GaussLegendre::new(cfg.gauss_order)),
        })
    }

    pub fn config(&self) -> &QuadConfig {
        &self.cfg
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    fn panel<F>(&self, f: &mut F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let at = mid + half * x;
            let v = f(at)?;
            if !v.is_finite() {
                return Err(QuadError::NonFinite { at, value: v }.into());
            }
            acc += w * v;
        }
        Ok(acc * half)
    }

    fn adapt<F>(&self, f: &mut F, a: f64, b: f64, whole: f64, depth: u32) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Ok(whole);
        }
        let left = self.panel(f, a, m)?;
        let right = self.panel(f, m, b)?;
        let fine = left + right;
        let tol = (self.cfg.rel_tol * fine.abs()).max(self.cfg.abs_tol);
        if (fine - whole).abs() <= tol {
            return Ok(fine);
        }
        if depth >= self.cfg.max_subdivisions {
            return Err(QuadError::NonConvergence {
                a,
                b,
                depth,
                coarse: whole,
                fine,
            }
            .into());
        }
        Ok(self.adapt(f, a, m, left, depth + 1)? + self.adapt(f, m, b, right, depth + 1)?)
    }

    /// Integrates a fallible integrand over `[a, b]`. Breakpoints outside
    /// the open interval are ignored; near-duplicates are merged.
    pub fn try_integrate<F>(&self, mut f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(QuadError::Interval { a, b }.into());
        }
        if a == b {
            return Ok(0.0);
        }
        let mut cuts = Vec::with_capacity(breakpoints.len() + 2);
        cuts.push(a);
        let mut inner: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&x| x > a && x < b)
            .collect();
        inner.sort_by(f64::total_cmp);
        for x in inner {
            if x - cuts[cuts.len() - 1] > 1e-15 {
                cuts.push(x);
            }
        }
        if b - cuts[cuts.len() - 1] <= 1e-15 && cuts.len() > 1 {
            cuts.pop();
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let whole = self.panel(&mut f, w[0], w[1])?;
            total += self.adapt(&mut f, w[0], w[1], whole, 0)?;
        }
        Ok(total)
    }

    /// Integrates an infallible integrand; non-finite values are errors.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<f64, QuadError>
    where
        F: FnMut(f64) -> f64,
    {
        self.try_integrate(|x| Ok(f(x)), a, b, breakpoints)
            .map_err(|e| match e {
                Error::Quad(q) => q,
                other => unreachable!("infallible integrand produced {other}"),
            })
    }
}

/// One-shot convenience wrapper around [`Quadrature::integrate`].
pub fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], cfg: &QuadConfig) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> f64,
{
    Quadrature::new(*cfg)?.integrate(f, a, b, breakpoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> Quadrature {
        Quadrature::new(QuadConfig::default()).unwrap()
    }

    #[test]
    fn rule_is_symmetric_and_normalised() {
        for order in 2..=20 {
            let r = GaussLegendre::new(order);
            assert_eq!(r.weights().iter().sum::<f64>(), 2.0);
            for i in 0..order {
                assert_eq!(r.nodes()[i], -r.nodes()[order - 1 - i]);
                assert!((r.weights()[i] - r.weights()[order - 1 - i]).abs() < 1e-15);
            }
        }
        let r = GaussLegendre::new(2);
        assert!((r.nodes()[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linear_and_kinked_integrands() {
        assert!((q().integrate(|s| s, 0.0, 1.0, &[]).unwrap() - 0.5).abs() <= 1e-15);
        let v = q()
            .integrate(|s| (0.5 - s).max(0.0), 0.0, 1.0, &[0.5])
            .unwrap();
        assert!((v - 0.125).abs() <= 1e-14);
    }

    #[test]
    fn unsplit_kink_still_converges_by_bisection() {
        let v = q().integrate(|s| (s - 0.3).abs(), 0.0, 1.0, &[]).unwrap();
        assert!((v - 0.29).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            q().integrate(|_| f64::NAN, 0.0, 1.0, &[]),
            Err(QuadError::NonFinite { .. })
        ));
        assert!(matches!(
            q().integrate(|s| s, 1.0, 0.0, &[]),
            Err(QuadError::Interval { .. })
        ));
        // a jump that is not a breakpoint cannot meet the tolerance
        let strict = Quadrature::new(QuadConfig {
            max_subdivisions: 5,
            ..QuadConfig::default()
        })
        .unwrap();
        assert!(matches!(
            strict.integrate(|s| if s < 1.0 / 3.0 { 0.0 } else { 1.0 }, 0.0, 1.0, &[]),
            Err(QuadError::NonConvergence { .. })
        ));
        assert!(Quadrature::new(QuadConfig {
            gauss_order: 1,
            ..QuadConfig::default()
        })
        .is_err());
        assert_eq!(q().integrate(|s| s, 0.4, 0.4, &[]).unwrap(), 0.0);
    }

    #[test]
    fn polynomial_exactness_single_panel() {
        let cfg = QuadConfig::default();
        let rule = GaussLegendre::new(cfg.gauss_order);
        let max_degree = 2 * cfg.gauss_order - 1;
        for deg in 0..=max_degree {
            let mut acc = 0.0;
            for (x, w) in rule.nodes().iter().zip(rule.weights()) {
                let s = 0.5 + 0.5 * x;
                acc += w * s.powi(deg as i32);
            }
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((0.5 * acc - exact).abs() <= 1e-13, "degree {deg}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn additivity(
            a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, a2 in -2.0f64..2.0,
            freq in 0.5f64..6.0, c in 0.05f64..0.95,
        ) {
            let f = |s: f64| a0 + a1 * (freq * s).sin() + a2 * (s * s).exp();
            let q = q();
            let whole = q.integrate(f, 0.0, 1.0, &[]).unwrap();
            let split = q.integrate(f, 0.0, c, &[]).unwrap() + q.integrate(f, c, 1.0, &[]).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12);
        }
    }
}
