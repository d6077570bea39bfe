//! C¹ grid states, the product-space norm, cone membership and a sampler for
//! the cone boundary `∂K_ρ`.
//!
//! The cone is `K = Π K̃_i` with
//! `K̃_i = { w ∈ C¹ : min_{[a_i, b_i]} w ≥ c_i ‖w‖∞ }`.

mod state;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use state::{c1_norm, DiscreteState, StateNorms, MIN_INTERVALS};

use crate::constants::{ConeConstants, Window};
use crate::{Error, Result};

pub const DEFAULT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// `min_{[a_i,b_i]} u_i - c_i ‖u_i‖∞` per component.
    pub margins: Vec<f64>,
    pub slack: f64,
}

/// Minimum of component `i` over the window, on the monitoring grid plus the
/// window endpoints.
pub fn window_min(u: &DiscreteState, i: usize, w: Window) -> f64 {
    let mut m = u.value(i, w.a).min(u.value(i, w.b));
    for t in u.monitoring_grid() {
        if t >= w.a && t <= w.b {
            m = m.min(u.value(i, t));
        }
    }
    m
}

pub fn cone_membership(u: &DiscreteState, cc: &ConeConstants, slack: f64) -> Membership {
    let norms = c1_norm(u);
    let margins: Vec<f64> = cc
        .components
        .iter()
        .enumerate()
        .map(|(i, comp)| window_min(u, i, comp.window) - comp.c * norms.sup[i])
        .collect();
    Membership {
        member: margins.iter().all(|&m| m >= -slack),
        margins,
        slack,
    }
}

/// Deterministic per-sample seed derived from a base seed (splitmix64).
pub fn sample_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const MAX_DEGREE: usize = 6;
const MAX_RETRIES: usize = 100;

/// Random trigonometric polynomial `a0 + Σ a_k cos(kπt) + b_k sin(kπt)`.
fn trig_component(rng: &mut ChaCha8Rng, intervals: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let degree = rng.gen_range(0..=MAX_DEGREE);
    let a0: f64 = rng.gen_range(-1.0..=1.0);
    let coeffs: Vec<(f64, f64)> = (0..degree)
        .map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect();
    let mut vals = Vec::with_capacity(intervals + 1);
    let mut ders = Vec::with_capacity(intervals + 1);
    for j in 0..=intervals {
        let t = j as f64 / intervals as f64;
        let mut v = a0;
        let mut d = 0.0;
        for (k, (a, b)) in coeffs.iter().enumerate() {
            let w = (k + 1) as f64 * std::f64::consts::PI;
            let (sn, cs) = (w * t).sin_cos();
            v += a * cs + b * sn;
            d += w * (b * cs - a * sn);
        }
        vals.push(v);
        ders.push(d);
    }
    Ok((vals, ders))
}

/// Draws a state with `‖u‖ = ρ` inside the cone.
///
/// Each component is a random trigonometric polynomial of degree ≤ 6,
/// lifted by `C = max(0, (c_i ‖v‖∞ − min_{[a_i,b_i]} v)/(1 − c_i))` so that the
/// window inequality holds, and the whole vector is then scaled to norm ρ.
/// Components with `c_i ≥ 1` are positive constants.
pub fn sample_cone_boundary(
    cc: &ConeConstants,
    intervals: usize,
    rho: f64,
    seed: u64,
) -> Result<DiscreteState> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Precondition(format!("rho must be positive, got {rho}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cc.components.len();
    for _ in 0..MAX_RETRIES {
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        let mut lifts = Vec::with_capacity(n);
        for comp in &cc.components {
            if comp.c >= 1.0 {
                let level: f64 = rng.gen_range(0.05..=1.0);
                values.push(vec![level; intervals + 1]);
                derivs.push(vec![0.0; intervals + 1]);
                lifts.push(None);
            } else {
                let (v, d) = trig_component(&mut rng, intervals)?;
                values.push(v);
                derivs.push(d);
                lifts.push(Some((comp.c, comp.window)));
            }
        }
        let mut u = DiscreteState::new(values, derivs)?;
        let sup = c1_norm(&u).sup;
        for (i, lift) in lifts.iter().enumerate() {
            if let Some((c, w)) = *lift {
                let shift = ((c * sup[i] - window_min(&u, i, w)) / (1.0 - c)).max(0.0);
                u.shift_component(i, shift);
            }
        }
        let norm = c1_norm(&u).norm;
        if norm > 0.0 && norm.is_finite() {
            return Ok(u.scaled(rho / norm));
        }
    }
    Err(Error::Precondition(format!(
        "cone sampler produced only degenerate states after {MAX_RETRIES} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ComponentConstants, ConeConstants};

    fn cone(cs: &[(f64, f64, f64)]) -> ConeConstants {
        ConeConstants {
            components: cs
                .iter()
                .enumerate()
                .map(|(i, &(a, b, c))| ComponentConstants::bare(i, Window::new(a, b).unwrap(), c))
                .collect(),
        }
    }

    #[test]
    fn constant_state_is_member() {
        let cc = cone(&[(0.0, 0.375, 1.0 / 3.0), (0.0, 0.5, 0.4)]);
        let u = DiscreteState::from_fn(2, 16, |_, _| (1.0, 0.0)).unwrap();
        let m = cone_membership(&u, &cc, DEFAULT_SLACK);
        assert!(m.member);
        assert!((m.margins[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.margins[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn linear_oracle_solution_is_member() {
        let cc = cone(&[(0.0, 0.375, 1.0 / 3.0)]);
        let u = DiscreteState::from_fn(1, 128, |_, t| (0.375 - 0.5 * t * t, -t)).unwrap();
        let m = cone_membership(&u, &cc, DEFAULT_SLACK);
        assert!(m.member);
        let expected = (0.375 - 0.5 * 0.375 * 0.375) - 0.375 / 3.0;
        assert!((m.margins[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_on_window_is_not_member() {
        let cc = cone(&[(0.0, 0.375, 1.0 / 3.0)]);
        let u = DiscreteState::from_fn(1, 16, |_, t| (t - 0.5, 1.0)).unwrap();
        assert!(!cone_membership(&u, &cc, DEFAULT_SLACK).member);
    }

    #[test]
    fn scaling_preserves_membership() {
        let cc = cone(&[(0.0, 0.375, 1.0 / 3.0), (0.0, 0.5, 0.4)]);
        for seed in 0..20 {
            let u = sample_cone_boundary(&cc, 32, 1.0, seed).unwrap();
            let base = cone_membership(&u, &cc, DEFAULT_SLACK);
            assert!(base.member);
            for alpha in [0.1, 1.0, 10.0] {
                let m = cone_membership(&u.scaled(alpha), &cc, DEFAULT_SLACK * alpha.max(1.0));
                assert!(m.member);
                for (a, b) in m.margins.iter().zip(&base.margins) {
                    assert!((a - alpha * b).abs() <= 1e-12 * alpha.max(1.0));
                }
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_on_the_sphere() {
        let cc = cone(&[(0.0, 0.375, 1.0 / 3.0), (0.0, 0.5, 0.4)]);
        for seed in 0..200 {
            let u = sample_cone_boundary(&cc, 32, 2.5, seed).unwrap();
            assert!((c1_norm(&u).norm - 2.5).abs() <= 1e-12);
            assert!(cone_membership(&u, &cc, DEFAULT_SLACK).member, "seed {seed}");
        }
        let a = sample_cone_boundary(&cc, 32, 1.0, 7).unwrap();
        let b = sample_cone_boundary(&cc, 32, 1.0, 7).unwrap();
        assert_eq!(a, b);
        assert!(sample_cone_boundary(&cc, 32, 0.0, 7).is_err());
    }

    #[test]
    fn unit_cone_constant_gives_constants() {
        let cc = cone(&[(0.0, 1.0, 1.0)]);
        let u = sample_cone_boundary(&cc, 16, 1.0, 3).unwrap();
        assert!(u.node_derivs(0).iter().all(|&d| d == 0.0));
        assert!(u.node_values(0).iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sample_seeds_differ() {
        assert_ne!(sample_seed(1, 0), sample_seed(1, 1));
        assert_ne!(sample_seed(1, 0), sample_seed(2, 0));
        assert_eq!(sample_seed(5, 9), sample_seed(5, 9));
    }
}
