use serde::{Deserialize, Serialize};

use super::Window;
use crate::expr::EvalError;
use crate::{par, Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_STEPS: usize = 200;

/// Grid-plus-golden-section settings for every sup/inf over one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opt1DConfig {
    pub coarse_grid: usize,
    pub refine_tol: f64,
}

impl Default for Opt1DConfig {
    fn default() -> Self {
        Opt1DConfig {
            coarse_grid: 2048,
            refine_tol: 1e-12,
        }
    }
}

impl Opt1DConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid < 2 || !(self.refine_tol > 0.0) {
            return Err(Error::Precondition(format!(
                "optimizer needs coarse_grid >= 2 and refine_tol > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Best value found, where it was found, and the coarse grid spacing.
///
/// For a maximization `value` is the largest evaluated value, hence a lower
/// bound of the true sup; the defect is governed by `resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub arg: f64,
    pub resolution: f64,
}

fn grid(w: Window, nodes: &[f64], cfg: &Opt1DConfig) -> Vec<f64> {
    let n = cfg.coarse_grid;
    let mut pts: Vec<f64> = (0..n)
        .map(|j| w.a + (w.b - w.a) * j as f64 / n as f64)
        .collect();
    pts.push(w.b);
    pts.extend(nodes.iter().copied().filter(|&x| x > w.a && x < w.b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn checked(v: f64, at: f64) -> Result<f64> {
    if v.is_nan() {
        return Err(EvalError::NonFinite {
            value: v,
            subexpr: format!("objective at {at}"),
        }
        .into());
    }
    Ok(v)
}

/// Maximizes `f` over the window: scan on a uniform grid (plus `nodes`),
/// then golden-section refinement inside the bracket around the best node.
pub fn maximize<F>(f: F, w: Window, nodes: &[f64], cfg: &Opt1DConfig) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    cfg.validate()?;
    let pts = grid(w, nodes, cfg);
    let vals = par::try_map_range(pts.len(), |j| f(pts[j]).and_then(|v| checked(v, pts[j])))?;
    let mut best = 0;
    for (j, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = j;
        }
    }
    let mut out = Extremum {
        value: vals[best],
        arg: pts[best],
        resolution: (w.b - w.a) / cfg.coarse_grid as f64,
    };

    let mut lo = pts[best.saturating_sub(1)];
    let mut hi = pts[(best + 1).min(pts.len() - 1)];
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = checked(f(x1)?, x1)?;
    let mut f2 = checked(f(x2)?, x2)?;
    for _ in 0..MAX_GOLDEN_STEPS {
        if f1 > out.value {
            out.value = f1;
            out.arg = x1;
        }
        if f2 > out.value {
            out.value = f2;
            out.arg = x2;
        }
        if hi - lo <= cfg.refine_tol * (1.0 + out.arg.abs()) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = checked(f(x1)?, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = checked(f(x2)?, x2)?;
        }
    }
    Ok(out)
}

pub fn minimize<F>(f: F, w: Window, nodes: &[f64], cfg: &Opt1DConfig) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let e = maximize(|x| f(x).map(|v| -v), w, nodes, cfg)?;
    Ok(Extremum {
        value: -e.value,
        ..e
    })
}

/// `sup |f|` over the window.
pub fn sup_abs_1d<F>(f: F, w: Window, nodes: &[f64], cfg: &Opt1DConfig) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    maximize(|x| f(x).map(f64::abs), w, nodes, cfg)
}
