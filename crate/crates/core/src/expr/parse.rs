use super::{
    eval_scalar, BinaryOp, EvalEnv, FunctionalExpr, NamedConst, Node, ParseError, ParseErrorKind,
    ScalarExpr, UnaryOp, Var, VarSet,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let err = |pos, kind| ParseError {
        pos,
        kind,
        text: text.to_string(),
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when digits follow, so `2e` stays `2` then `e`
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                match lit.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => {
                        return Err(err(
                            start,
                            ParseErrorKind::Syntax(format!("bad number literal `{lit}`")),
                        ))
                    }
                }
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(err(
                    start,
                    ParseErrorKind::Syntax(format!("unexpected character `{ch}`")),
                ));
            }
        };
        out.push(Token { tok, pos: start });
    }
    out.push(Token {
        tok: Tok::End,
        pos: text.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    at: usize,
    vars: VarSet,
    /// `Some(n)` when val/der/int atoms over n components are allowed.
    atoms: Option<usize>,
    in_integral: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, vars: VarSet, atoms: Option<usize>) -> Result<Self, ParseError> {
        if text.trim().is_empty() {
            return Err(ParseError {
                pos: 0,
                kind: ParseErrorKind::Empty,
                text: text.to_string(),
            });
        }
        Ok(Parser {
            text,
            toks: lex(text)?,
            at: 0,
            vars,
            atoms,
            in_integral: false,
        })
    }

    fn error(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            pos,
            kind,
            text: self.text.to_string(),
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(self.error(
                t.pos,
                ParseErrorKind::Syntax(format!("expected {what}, found {}", describe(&t.tok))),
            ))
        }
    }

    fn finish(mut self) -> Result<Node, ParseError> {
        let node = self.expr()?;
        let t = self.peek().clone();
        if t.tok != Tok::End {
            return Err(self.error(
                t.pos,
                ParseErrorKind::Syntax(format!("unexpected {}", describe(&t.tok))),
            ));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.next();
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    self.call(&name, t.pos)
                } else {
                    self.name(&name, t.pos)
                }
            }
            other => Err(self.error(
                t.pos,
                ParseErrorKind::Syntax(format!("unexpected {}", describe(&other))),
            )),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Node, ParseError> {
        if let Some(op) = UnaryOp::from_name(name) {
            self.expect(Tok::LParen, "`(`")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Node::Unary(op, Box::new(arg)));
        }
        match name {
            "int" => {
                if self.in_integral {
                    return Err(self.error(pos, ParseErrorKind::NestedIntegral));
                }
                let Some(n) = self.atoms else {
                    return Err(self.out_of_context(name, pos));
                };
                self.expect(Tok::LParen, "`(`")?;
                let saved = self.vars;
                self.vars = VarSet::integrand(n);
                self.in_integral = true;
                let body = self.expr();
                self.in_integral = false;
                self.vars = saved;
                let body = body?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Node::Integral(Box::new(body)))
            }
            "val" | "der" => {
                let n = match self.atoms {
                    Some(n) if !self.in_integral => n,
                    _ => return Err(self.out_of_context(name, pos)),
                };
                self.expect(Tok::LParen, "`(`")?;
                let idx_tok = self.next();
                let comp = match idx_tok.tok {
                    Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 => v as usize,
                    other => {
                        return Err(self.error(
                            idx_tok.pos,
                            ParseErrorKind::Syntax(format!(
                                "expected component index, found {}",
                                describe(&other)
                            )),
                        ))
                    }
                };
                if comp == 0 || comp > n {
                    return Err(self.error(
                        idx_tok.pos,
                        ParseErrorKind::ComponentOutOfRange { index: comp, n },
                    ));
                }
                self.expect(Tok::Comma, "`,`")?;
                let point_pos = self.peek().pos;
                let saved = (self.vars, self.atoms);
                self.vars = VarSet::constant();
                self.atoms = None;
                let point = self.expr();
                (self.vars, self.atoms) = saved;
                let point = point?;
                self.expect(Tok::RParen, "`)`")?;
                let expr = ScalarExpr {
                    root: point,
                    context: VarSet::constant(),
                };
                let at = eval_scalar(&expr, &EvalEnv::default()).map_err(|e| {
                    self.error(point_pos, ParseErrorKind::PointOutOfRange(e.to_string()))
                })?;
                if !(0.0..=1.0).contains(&at) {
                    return Err(self.error(
                        point_pos,
                        ParseErrorKind::PointOutOfRange(format!("{at} outside [0, 1]")),
                    ));
                }
                let comp = comp - 1;
                Ok(if name == "val" {
                    Node::Val { comp, at }
                } else {
                    Node::Der { comp, at }
                })
            }
            _ => Err(self.error(pos, ParseErrorKind::UnknownIdentifier(name.to_string()))),
        }
    }

    fn name(&self, name: &str, pos: usize) -> Result<Node, ParseError> {
        match name {
            "e" => return Ok(Node::Const(NamedConst::E)),
            "pi" => return Ok(Node::Const(NamedConst::Pi)),
            _ => {}
        }
        let var = match name {
            "t" => Var::T,
            "s" => Var::S,
            "w" => Var::W,
            "rho" => Var::Rho,
            _ => match component_var(name) {
                Some(v) => v,
                None => {
                    return Err(
                        self.error(pos, ParseErrorKind::UnknownIdentifier(name.to_string()))
                    )
                }
            },
        };
        if self.vars.allows(var) {
            return Ok(Node::Var(var));
        }
        match var {
            Var::U(i) | Var::Du(i) if self.vars.components > 0 => Err(self.error(
                pos,
                ParseErrorKind::ComponentOutOfRange {
                    index: i.wrapping_add(1),
                    n: self.vars.components,
                },
            )),
            _ => Err(self.out_of_context(name, pos)),
        }
    }

    fn out_of_context(&self, name: &str, pos: usize) -> ParseError {
        self.error(
            pos,
            ParseErrorKind::OutOfContext {
                name: name.to_string(),
                context: self.vars.describe(),
            },
        )
    }
}

/// `u3` -> `U(2)`, `du1` -> `Du(0)`; index 0 maps to `usize::MAX` so that it
/// is rejected by every context.
fn component_var(name: &str) -> Option<Var> {
    let (deriv, digits) = if let Some(rest) = name.strip_prefix("du") {
        (true, rest)
    } else {
        let rest = name.strip_prefix('u')?;
        (false, rest)
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    let i = idx.checked_sub(1).unwrap_or(usize::MAX);
    Some(if deriv { Var::Du(i) } else { Var::U(i) })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses a pointwise expression whose variables must lie in `context`.
pub fn parse_expr(text: &str, context: VarSet) -> Result<ScalarExpr, ParseError> {
    let root = Parser::new(text, context, None)?.finish()?;
    Ok(ScalarExpr { root, context })
}

/// Parses a functional over `n`-component C¹ states.
pub fn parse_functional(text: &str, n: usize) -> Result<FunctionalExpr, ParseError> {
    let root = Parser::new(text, VarSet::constant(), Some(n))?.finish()?;
    Ok(FunctionalExpr {
        root,
        components: n,
    })
}
