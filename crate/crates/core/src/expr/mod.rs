//! Expression language for kernels, boundary functions, nonlinearities and
//! functionals.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?            right associative
//! atom   := number | '(' expr ')' | name | name '(' args ')'
//! ```
//!
//! Unary functions are `exp log abs sqrt pos step`, with `pos(x) = max(x, 0)`
//! and `step(x) = 1` for `x > 0`, `0` otherwise. Named constants are `e` and
//! `pi`. Functionals additionally accept `val(i, t0)`, `der(i, t0)` and
//! `int(body)`, where the body is an expression in `s, u1.., du1..`.

mod eval;
mod functional;
mod parse;

use std::fmt;

use thiserror::Error;

pub use eval::{eval_scalar, EvalEnv};
pub use functional::{eval_functional, eval_functional_as, FunctionalRole};
pub use parse::{parse_expr, parse_functional};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    S,
    W,
    Rho,
    /// `u{i+1}`; stored zero-based.
    U(usize),
    /// `du{i+1}`; stored zero-based.
    Du(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    E,
    Pi,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::E => std::f64::consts::E,
            NamedConst::Pi => std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Abs,
    Sqrt,
    Pos,
    Step,
}

impl UnaryOp {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "abs" => UnaryOp::Abs,
            "sqrt" => UnaryOp::Sqrt,
            "pos" => UnaryOp::Pos,
            "step" => UnaryOp::Step,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Abs => "abs",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Pos => "pos",
            UnaryOp::Step => "step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Syntax tree shared by scalar expressions and functionals. The functional
/// atoms only ever appear in trees built by [`parse_functional`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Const(NamedConst),
    Var(Var),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    /// `u_comp(at)`, zero-based component.
    Val { comp: usize, at: f64 },
    /// `u_comp'(at)`, zero-based component.
    Der { comp: usize, at: f64 },
    /// `∫₀¹ body(s, u(s), u'(s)) ds`.
    Integral(Box<Node>),
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Num(_) | Node::Const(_) | Node::Var(_) | Node::Val { .. } | Node::Der { .. } => 1,
            Node::Unary(_, a) | Node::Integral(a) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Node::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Node::Unary(_, a) | Node::Integral(a) => a.visit_vars(out),
            Node::Binary(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
            _ => {}
        }
    }
}

impl fmt::Display for Node {
    /// Fully parenthesised rendering; reparses to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => write!(f, "{x}"),
            Node::Const(NamedConst::E) => f.write_str("e"),
            Node::Const(NamedConst::Pi) => f.write_str("pi"),
            Node::Var(v) => match v {
                Var::T => f.write_str("t"),
                Var::S => f.write_str("s"),
                Var::W => f.write_str("w"),
                Var::Rho => f.write_str("rho"),
                Var::U(i) => write!(f, "u{}", i + 1),
                Var::Du(i) => write!(f, "du{}", i + 1),
            },
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Val { comp, at } => write!(f, "val({}, {at})", comp + 1),
            Node::Der { comp, at } => write!(f, "der({}, {at})", comp + 1),
            Node::Integral(body) => write!(f, "int({body})"),
        }
    }
}

/// Set of variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSet {
    pub t: bool,
    pub s: bool,
    pub w: bool,
    pub rho: bool,
    /// Number of `u*`/`du*` variables in scope (0 = none).
    pub components: usize,
}

impl VarSet {
    pub const fn constant() -> Self {
        VarSet {
            t: false,
            s: false,
            w: false,
            rho: false,
            components: 0,
        }
    }

    /// `{t, s}`
    pub const fn kernel() -> Self {
        VarSet {
            t: true,
            s: true,
            ..Self::constant()
        }
    }

    /// `{t, u1..un, du1..dun, w}`
    pub const fn nonlinearity(n: usize) -> Self {
        VarSet {
            t: true,
            w: true,
            components: n,
            ..Self::constant()
        }
    }

    /// `{t}`
    pub const fn boundary() -> Self {
        VarSet {
            t: true,
            ..Self::constant()
        }
    }

    /// `{s}`, used by declared kernel envelopes.
    pub const fn envelope() -> Self {
        VarSet {
            s: true,
            ..Self::constant()
        }
    }

    /// `{s, u1..un, du1..dun}`, the body of an `int(...)` atom.
    pub const fn integrand(n: usize) -> Self {
        VarSet {
            s: true,
            components: n,
            ..Self::constant()
        }
    }

    /// `{rho}`, used by declared bound templates.
    pub const fn bound() -> Self {
        VarSet {
            rho: true,
            ..Self::constant()
        }
    }

    pub fn allows(&self, v: Var) -> bool {
        match v {
            Var::T => self.t,
            Var::S => self.s,
            Var::W => self.w,
            Var::Rho => self.rho,
            Var::U(i) | Var::Du(i) => i < self.components,
        }
    }

    pub fn describe(&self) -> String {
        let mut names = Vec::new();
        if self.t {
            names.push("t".to_string());
        }
        if self.s {
            names.push("s".to_string());
        }
        if self.components > 0 {
            names.push(format!("u1..u{n}, du1..du{n}", n = self.components));
        }
        if self.w {
            names.push("w".to_string());
        }
        if self.rho {
            names.push("rho".to_string());
        }
        format!("{{{}}}", names.join(", "))
    }
}

/// Pointwise expression over a fixed variable context.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    root: Node,
    context: VarSet,
}

impl ScalarExpr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn context(&self) -> VarSet {
        self.context
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.root.visit_vars(&mut out);
        out
    }

    pub fn eval(&self, env: &EvalEnv<'_>) -> Result<f64, EvalError> {
        eval_scalar(self, env)
    }

    /// Evaluates an expression that depends on `t` only.
    pub fn eval_t(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(&EvalEnv {
            t,
            ..EvalEnv::default()
        })
    }

    /// Evaluates an expression that depends on `s` only.
    pub fn eval_s(&self, s: f64) -> Result<f64, EvalError> {
        self.eval(&EvalEnv {
            s,
            ..EvalEnv::default()
        })
    }

    /// Evaluates a bound template at radius `rho`.
    pub fn eval_rho(&self, rho: f64) -> Result<f64, EvalError> {
        self.eval(&EvalEnv {
            rho,
            ..EvalEnv::default()
        })
    }

    /// Constant folding for expressions without variables.
    pub fn eval_const(&self) -> Result<f64, EvalError> {
        self.eval(&EvalEnv::default())
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Functional on C¹ vector functions with `n` components.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalExpr {
    root: Node,
    components: usize,
}

impl FunctionalExpr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

impl fmt::Display for FunctionalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    Syntax(String),
    UnknownIdentifier(String),
    OutOfContext { name: String, context: String },
    NestedIntegral,
    ComponentOutOfRange { index: usize, n: usize },
    PointOutOfRange(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {pos} in `{text}`")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
    pub text: String,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty expression"),
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::OutOfContext { name, context } => {
                write!(f, "variable `{name}` is outside context {context}")
            }
            ParseErrorKind::NestedIntegral => f.write_str("nested int(...) is not allowed"),
            ParseErrorKind::ComponentOutOfRange { index, n } => {
                write!(f, "component index {index} outside 1..={n}")
            }
            ParseErrorKind::PointOutOfRange(msg) => write!(f, "evaluation point {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in {op}: argument {arg} in `{subexpr}`")]
    Domain {
        op: &'static str,
        arg: f64,
        subexpr: String,
    },
    #[error("non-finite value {value} from `{subexpr}`")]
    NonFinite { value: f64, subexpr: String },
    #[error("functional atom `{0}` evaluated without a state")]
    NoState(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_k1_has_depth_five() {
        let k1 = parse_expr("0.25 + pos(0.5-s) - pos(t-s)", VarSet::kernel()).unwrap();
        assert_eq!(k1.root().depth(), 5);
        assert_eq!(k1.variables(), vec![Var::S, Var::T]);
    }

    #[test]
    fn render_is_fully_parenthesised() {
        let e = parse_expr("-2^2 + 3*t", VarSet::boundary()).unwrap();
        assert_eq!(e.to_string(), "((-(2 ^ 2)) + (3 * t))");
    }

    #[test]
    fn varset_description_lists_names() {
        assert_eq!(VarSet::nonlinearity(2).describe(), "{t, u1..u2, du1..du2, w}");
    }
}
