use super::{BinaryOp, EvalError, Node, ScalarExpr, UnaryOp, Var};

/// Variable bindings for one evaluation. Unused slots are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalEnv<'a> {
    pub t: f64,
    pub s: f64,
    pub w: f64,
    pub rho: f64,
    pub u: &'a [f64],
    pub du: &'a [f64],
}

impl<'a> EvalEnv<'a> {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::T => self.t,
            Var::S => self.s,
            Var::W => self.w,
            Var::Rho => self.rho,
            Var::U(i) => self.u[i],
            Var::Du(i) => self.du[i],
        }
    }
}

/// Resolves functional atoms; scalar evaluation uses [`NoAtoms`].
pub(crate) trait Atoms {
    fn val(&mut self, comp: usize, at: f64) -> Result<f64, crate::Error>;
    fn der(&mut self, comp: usize, at: f64) -> Result<f64, crate::Error>;
    fn integral(&mut self, body: &Node) -> Result<f64, crate::Error>;
}

pub(crate) struct NoAtoms;

impl Atoms for NoAtoms {
    fn val(&mut self, comp: usize, at: f64) -> Result<f64, crate::Error> {
        Err(EvalError::NoState(format!("val({}, {at})", comp + 1)).into())
    }
    fn der(&mut self, comp: usize, at: f64) -> Result<f64, crate::Error> {
        Err(EvalError::NoState(format!("der({}, {at})", comp + 1)).into())
    }
    fn integral(&mut self, body: &Node) -> Result<f64, crate::Error> {
        Err(EvalError::NoState(format!("int({body})")).into())
    }
}

fn domain(op: &'static str, arg: f64, node: &Node) -> EvalError {
    EvalError::Domain {
        op,
        arg,
        subexpr: node.to_string(),
    }
}

pub(crate) fn eval_node<A: Atoms>(
    node: &Node,
    env: &EvalEnv<'_>,
    atoms: &mut A,
) -> Result<f64, crate::Error> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Const(c) => c.value(),
        Node::Var(v) => env.get(*v),
        Node::Unary(op, a) => {
            let x = eval_node(a, env, atoms)?;
            match op {
                UnaryOp::Neg => -x,
                UnaryOp::Exp => {
                    let y = x.exp();
                    if !y.is_finite() {
                        return Err(EvalError::NonFinite {
                            value: y,
                            subexpr: node.to_string(),
                        }
                        .into());
                    }
                    y
                }
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain("log", x, node).into());
                    }
                    x.ln()
                }
                UnaryOp::Abs => x.abs(),
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(domain("sqrt", x, node).into());
                    }
                    x.sqrt()
                }
                UnaryOp::Pos => {
                    if x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }
                UnaryOp::Step => {
                    if x > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_node(a, env, atoms)?;
            let y = eval_node(b, env, atoms)?;
            match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain("division", y, node).into());
                    }
                    x / y
                }
                BinaryOp::Pow => {
                    let r = pow(x, y);
                    if r.is_nan() {
                        return Err(domain("power", x, node).into());
                    }
                    if r.is_infinite() {
                        return Err(EvalError::NonFinite {
                            value: r,
                            subexpr: node.to_string(),
                        }
                        .into());
                    }
                    r
                }
            }
        }
        Node::Val { comp, at } => atoms.val(*comp, *at)?,
        Node::Der { comp, at } => atoms.der(*comp, *at)?,
        Node::Integral(body) => atoms.integral(body)?,
    })
}

/// Small integer exponents go through repeated multiplication so that
/// `x^2` is exactly `x*x`.
fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// Evaluates `expr` under `env` in double precision.
pub fn eval_scalar(expr: &ScalarExpr, env: &EvalEnv<'_>) -> Result<f64, EvalError> {
    match eval_node(expr.root(), env, &mut NoAtoms) {
        Ok(v) => Ok(v),
        Err(crate::Error::Eval(e)) => Err(e),
        Err(other) => Err(EvalError::NoState(other.to_string())),
    }
}
