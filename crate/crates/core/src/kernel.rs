//! Kernel definitions `k(t, s)`, their t-derivatives, breakpoint structure
//! and the boundary functions `γ`.

use serde::Serialize;

use crate::expr::{parse_expr, EvalEnv, EvalError, ScalarExpr, VarSet};
use crate::{Error, Result};

/// Band excluded around jumps when comparing derivatives with finite differences.
pub const FD_BAND: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDef {
    pub name: String,
    pub k: ScalarExpr,
    pub dk_dt: ScalarExpr,
    /// Interior s-values where `k(t, ·)` is not smooth, independent of t.
    pub fixed_breakpoints: Vec<f64>,
    /// Split additionally at `s = t`.
    pub moving_breakpoint: bool,
}

impl KernelDef {
    pub fn new(
        name: impl Into<String>,
        k: &str,
        dk_dt: &str,
        fixed_breakpoints: Vec<f64>,
        moving_breakpoint: bool,
    ) -> Result<Self> {
        for w in fixed_breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Precondition(format!(
                    "kernel breakpoints must be strictly increasing, got {fixed_breakpoints:?}"
                )));
            }
        }
        if fixed_breakpoints.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Precondition(format!(
                "kernel breakpoints must lie in (0, 1), got {fixed_breakpoints:?}"
            )));
        }
        Ok(KernelDef {
            name: name.into(),
            k: parse_expr(k, VarSet::kernel())?,
            dk_dt: parse_expr(dk_dt, VarSet::kernel())?,
            fixed_breakpoints,
            moving_breakpoint,
        })
    }

    /// Built-in kernels of the two-component example system.
    pub fn catalog(name: &str) -> Option<Self> {
        let (k, dk) = match name {
            "example-k1" => ("1/4 + pos(1/2 - s) - pos(t - s)", "-step(t - s)"),
            "example-k2" => (
                "4/5*(1 - s) + 1/5*pos(1/2 - s) - pos(t - s)",
                "-step(t - s)",
            ),
            _ => return None,
        };
        Some(KernelDef::new(name, k, dk, vec![0.5], true).expect("catalog kernels parse"))
    }

    pub fn eval_k(&self, t: f64, s: f64) -> Result<f64, EvalError> {
        self.k.eval(&EvalEnv {
            t,
            s,
            ..EvalEnv::default()
        })
    }

    /// Callers must not evaluate exactly on a jump; integrals are split at
    /// [`KernelDef::s_breakpoints`].
    pub fn eval_dk(&self, t: f64, s: f64) -> Result<f64, EvalError> {
        self.dk_dt.eval(&EvalEnv {
            t,
            s,
            ..EvalEnv::default()
        })
    }

    /// Sorted interior breakpoints in s for the given t.
    pub fn s_breakpoints(&self, t: f64) -> Vec<f64> {
        let mut out = self.fixed_breakpoints.clone();
        if self.moving_breakpoint && t > 0.0 && t < 1.0 && !out.contains(&t) {
            let pos = out.partition_point(|&b| b < t);
            out.insert(pos, t);
        }
        out
    }

    pub(crate) fn near_breakpoint(&self, t: f64, s: f64) -> bool {
        (self.moving_breakpoint && (s - t).abs() < FD_BAND)
            || self.fixed_breakpoints.iter().any(|&b| (s - b).abs() < FD_BAND)
    }

    /// Compares `dk_dt` with central differences of `k` in t on a grid,
    /// skipping a band around every breakpoint.
    pub fn validate_derivative(&self) -> Result<(), DerivativeMismatch> {
        let ts: Vec<f64> = (1..40).map(|i| i as f64 / 40.0 + 1.3e-3).collect();
        let ss: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for &t in &ts {
            // s = t probes for an undeclared jump along the diagonal
            for &s in ss.iter().chain([t].iter()) {
                if self.near_breakpoint(t, s) {
                    continue;
                }
                let check = || -> Result<(f64, f64), EvalError> {
                    let fd = (self.eval_k(t + FD_STEP, s)? - self.eval_k(t - FD_STEP, s)?)
                        / (2.0 * FD_STEP);
                    Ok((fd, self.eval_dk(t, s)?))
                };
                let (fd, dk) = check().map_err(|e| DerivativeMismatch {
                    t,
                    s,
                    supplied: f64::NAN,
                    finite_difference: f64::NAN,
                    detail: e.to_string(),
                })?;
                if (fd - dk).abs() > FD_TOL * dk.abs().max(1.0) {
                    return Err(DerivativeMismatch {
                        t,
                        s,
                        supplied: dk,
                        finite_difference: fd,
                        detail: String::new(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeMismatch {
    pub t: f64,
    pub s: f64,
    pub supplied: f64,
    pub finite_difference: f64,
    pub detail: String,
}

impl std::fmt::Display for DerivativeMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "supplied derivative {} differs from finite difference {} at (t, s) = ({}, {})",
            self.supplied, self.finite_difference, self.t, self.s
        )?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

/// A boundary function `γ` with its user-supplied derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaDef {
    pub name: String,
    pub gamma: ScalarExpr,
    pub dgamma: ScalarExpr,
}

impl GammaDef {
    pub fn new(name: impl Into<String>, gamma: &str, dgamma: &str) -> Result<Self> {
        Ok(GammaDef {
            name: name.into(),
            gamma: parse_expr(gamma, VarSet::boundary())?,
            dgamma: parse_expr(dgamma, VarSet::boundary())?,
        })
    }

    pub fn catalog(name: &str) -> Option<Self> {
        let (g, dg) = match name {
            "example-gamma11" => ("3/4 - t", "-1"),
            "example-gamma21" => ("9/10 - t", "-1"),
            _ => return None,
        };
        Some(GammaDef::new(name, g, dg).expect("catalog boundary functions parse"))
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.gamma.eval_t(t)
    }

    pub fn eval_d(&self, t: f64) -> Result<f64, EvalError> {
        self.dgamma.eval_t(t)
    }

    /// γ is C¹, so the comparison runs on the whole interior grid.
    pub fn validate_derivative(&self) -> Result<(), DerivativeMismatch> {
        for i in 1..200 {
            let t = i as f64 / 200.0;
            let res = (|| -> Result<(f64, f64), EvalError> {
                let fd = (self.eval(t + FD_STEP)? - self.eval(t - FD_STEP)?) / (2.0 * FD_STEP);
                Ok((fd, self.eval_d(t)?))
            })();
            let (fd, dg) = res.map_err(|e| DerivativeMismatch {
                t,
                s: f64::NAN,
                supplied: f64::NAN,
                finite_difference: f64::NAN,
                detail: e.to_string(),
            })?;
            if (fd - dg).abs() > FD_TOL * dg.abs().max(1.0) {
                return Err(DerivativeMismatch {
                    t,
                    s: f64::NAN,
                    supplied: dg,
                    finite_difference: fd,
                    detail: String::new(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeMode {
    /// User-supplied `Φ0` (and optionally `Φ1`).
    Declared,
    /// `Φ0(s) = max_t |k(t, s)|`, computed.
    Tight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSpec {
    pub mode: EnvelopeMode,
    pub phi0: Option<ScalarExpr>,
    pub phi1: Option<ScalarExpr>,
}

impl EnvelopeSpec {
    pub fn tight() -> Self {
        EnvelopeSpec {
            mode: EnvelopeMode::Tight,
            phi0: None,
            phi1: None,
        }
    }

    pub fn declared(phi0: &str, phi1: Option<&str>) -> Result<Self> {
        Ok(EnvelopeSpec {
            mode: EnvelopeMode::Declared,
            phi0: Some(parse_expr(phi0, VarSet::envelope())?),
            phi1: phi1
                .map(|p| parse_expr(p, VarSet::envelope()))
                .transpose()?,
        })
    }

    /// Declared envelopes must be nonnegative on a grid of [0, 1].
    pub fn validate(&self) -> Result<()> {
        for (label, phi) in [("phi0", &self.phi0), ("phi1", &self.phi1)] {
            let Some(phi) = phi else { continue };
            for i in 0..=1000 {
                let s = i as f64 / 1000.0;
                let v = phi.eval_s(s)?;
                if v < 0.0 {
                    return Err(Error::model(
                        "(C2)",
                        format!("declared envelope {label} = {phi} is negative ({v}) at s = {s}"),
                    ));
                }
            }
        }
        if self.mode == EnvelopeMode::Declared && self.phi0.is_none() {
            return Err(Error::Precondition(
                "declared envelope mode needs phi0".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> KernelDef {
        KernelDef::catalog("example-k1").unwrap()
    }

    fn k2() -> KernelDef {
        KernelDef::catalog("example-k2").unwrap()
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(k1().eval_k(0.5, 0.75).unwrap(), 0.25);
        assert!((k2().eval_k(0.0, 0.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((k2().eval_k(1.0, 0.5).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(k1().eval_dk(0.5, 0.25).unwrap(), -1.0);
        assert_eq!(k1().eval_dk(0.5, 0.75).unwrap(), 0.0);
        assert_eq!(k2().eval_dk(0.9, 0.1).unwrap(), -1.0);
    }

    #[test]
    fn breakpoints() {
        assert_eq!(k1().s_breakpoints(0.7), vec![0.5, 0.7]);
        assert_eq!(k1().s_breakpoints(0.3), vec![0.3, 0.5]);
        assert_eq!(k1().s_breakpoints(0.0), vec![0.5]);
        assert_eq!(k1().s_breakpoints(1.0), vec![0.5]);
        assert_eq!(k1().s_breakpoints(0.5), vec![0.5]);
    }

    #[test]
    fn bad_breakpoints_rejected() {
        assert!(KernelDef::new("x", "1", "0", vec![0.5, 0.5], false).is_err());
        assert!(KernelDef::new("x", "1", "0", vec![0.0], false).is_err());
        assert!(KernelDef::new("x", "1", "0", vec![0.7, 0.2], false).is_err());
        assert!(KernelDef::new("x", "u1", "0", vec![], false).is_err());
    }

    #[test]
    fn derivative_validation() {
        k1().validate_derivative().unwrap();
        k2().validate_derivative().unwrap();
        let bad = KernelDef::new("bad", "1/4 + pos(1/2 - s) - pos(t - s)", "-2*step(t - s)", vec![0.5], true)
            .unwrap();
        assert!(bad.validate_derivative().is_err());
        // moving jump not declared: the jump band is not excluded
        let undeclared = KernelDef::new("u", "pos(t - s)", "step(t - s)", vec![], false).unwrap();
        assert!(undeclared.validate_derivative().is_err());
        GammaDef::catalog("example-gamma11").unwrap().validate_derivative().unwrap();
        assert!(GammaDef::new("g", "t^2", "t").unwrap().validate_derivative().is_err());
    }

    #[test]
    fn continuity_in_t() {
        for kd in [k1(), k2()] {
            for i in 0..100 {
                for j in 0..100 {
                    let t = i as f64 / 99.0;
                    let s = j as f64 / 99.0;
                    let v = kd.eval_k(t, s).unwrap();
                    for dt in [-1e-9, 1e-9] {
                        let tt = (t + dt).clamp(0.0, 1.0);
                        assert!((kd.eval_k(tt, s).unwrap() - v).abs() <= 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn window_positivity() {
        for (kd, b) in [(k1(), 0.375), (k2(), 0.5)] {
            for i in 0..=200 {
                for j in 0..=400 {
                    let t = b * i as f64 / 200.0;
                    let s = j as f64 / 400.0;
                    assert!(kd.eval_k(t, s).unwrap() >= 0.0, "{} at ({t}, {s})", kd.name);
                }
            }
        }
    }

    #[test]
    fn envelope_validation() {
        EnvelopeSpec::declared("1 - s", Some("1")).unwrap().validate().unwrap();
        let neg = EnvelopeSpec::declared("s - 1/2", None).unwrap();
        assert!(matches!(neg.validate(), Err(Error::Model { condition: "(C2)", .. })));
        assert!(EnvelopeSpec::declared("t", None).is_err());
    }
}
