//! Existence and nonexistence certificates for systems of perturbed
//! Hammerstein integral equations with functional terms,
//!
//! ```text
//! u_i(t) = λ_i ∫₀¹ k_i(t,s) f_i(s, u(s), u'(s), w_i[u]) ds + Σ_j η_ij γ_ij(t) h_ij[u],
//! ```
//!
//! together with the cone/kernel constants those certificates need and a
//! Nyström/Picard solver used to cross-check them.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses and evaluates the small expression language used for
//!   kernels, nonlinearities and functionals.
//! * [`quad`] is the breakpoint-aware Gauss–Legendre engine every integral
//!   goes through.
//! * [`kernel`], [`constants`] and [`cone`] compute kernel constants,
//!   represent C¹ states and sample the cone.
//! * [`bounds`] holds declared analytic bounds and falsifies them by sampling.
//! * [`certify`] evaluates the index conditions and the existence and
//!   nonexistence theorems; [`solver`] runs damped Picard iteration.
//! * [`problem`] loads and validates the JSON problem description.
//!
//! Data-parallel loops go through [`par`]; building without the default
//! `parallel` feature gives a purely sequential library with identical output.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certify;
pub mod cone;
pub mod constants;
pub mod error;
pub mod expr;
pub mod kernel;
pub mod par;
pub mod problem;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
