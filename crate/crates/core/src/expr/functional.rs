use super::eval::{eval_node, Atoms, EvalEnv};
use super::{FunctionalExpr, Node};
use crate::cone::DiscreteState;
use crate::quad::Quadrature;
use crate::{Error, Result};

/// How a functional is used in the model, for the nonnegativity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalRole {
    /// `h_ij`, zero-based indices.
    H { i: usize, j: usize },
    /// `w_i`, zero-based index.
    W { i: usize },
}

struct StateAtoms<'a> {
    state: &'a DiscreteState,
    quad: &'a Quadrature,
}

impl Atoms for StateAtoms<'_> {
    fn val(&mut self, comp: usize, at: f64) -> Result<f64> {
        Ok(self.state.value(comp, at))
    }

    fn der(&mut self, comp: usize, at: f64) -> Result<f64> {
        Ok(self.state.deriv(comp, at))
    }

    fn integral(&mut self, body: &Node) -> Result<f64> {
        let n = self.state.components();
        let mut u = vec![0.0; n];
        let mut du = vec![0.0; n];
        let state = self.state;
        self.quad.try_integrate(
            |s| {
                state.eval_into(s, &mut u, &mut du);
                let env = EvalEnv {
                    s,
                    u: &u,
                    du: &du,
                    ..EvalEnv::default()
                };
                eval_node(body, &env, &mut super::eval::NoAtoms)
            },
            0.0,
            1.0,
            state.interior_nodes(),
        )
    }
}

/// Evaluates a functional on a grid state. Point atoms use the state's
/// Hermite interpolant; `int` atoms are integrated panel-wise between the
/// state's nodes.
pub fn eval_functional(fx: &FunctionalExpr, u: &DiscreteState, quad: &Quadrature) -> Result<f64> {
    if u.components() != fx.components() {
        return Err(Error::Precondition(format!(
            "functional over {} components applied to a {}-component state",
            fx.components(),
            u.components()
        )));
    }
    let mut atoms = StateAtoms { state: u, quad };
    eval_node(fx.root(), &EvalEnv::default(), &mut atoms)
}

/// As [`eval_functional`], but a negative value is reported as a violation
/// of (C7) for `h` or (C8) for `w`.
pub fn eval_functional_as(
    fx: &FunctionalExpr,
    u: &DiscreteState,
    quad: &Quadrature,
    role: FunctionalRole,
) -> Result<f64> {
    let v = eval_functional(fx, u, quad)?;
    if v < 0.0 {
        let (condition, name) = match role {
            FunctionalRole::H { i, j } => ("(C7)", format!("h_{}{}", i + 1, j + 1)),
            FunctionalRole::W { i } => ("(C8)", format!("w_{}", i + 1)),
        };
        return Err(Error::model(
            condition,
            format!("{name}[u] = {v} is negative"),
        ));
    }
    Ok(v)
}
