//! A small arithmetic expression language for user-defined right-hand sides
//! `f(t, x)`, so benchmark problems can be described on the command line
//! without recompiling.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//!   expr   := term (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := '-' factor | power
//!   power  := atom ('^' factor)?            // right-associative
//!   atom   := number | 't' | 'x' | name '(' expr {',' expr} ')' | '(' expr ')'
//! ```
//!
//! so `^` binds tighter than unary minus: `-x^2` is `-(x^2)`, and `2^-3` is
//! accepted. Known functions: `exp`, `sin`, `cos`, `sqrt`, `pow`, `gamma`,
//! `abs`. Errors carry byte offsets; evaluation reports domain failures
//! (square root of a negative, gamma poles, `0^negative`, fractional powers
//! of negatives) with the offending node's source span instead of returning
//! NaN.

use crate::specfun;
use crate::{cast, Real};
use thiserror::Error;

/// Byte range of a node in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl core::fmt::Display for Span {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error at {span} (`{fragment}`): {message}")]
pub struct EvalError {
    pub span: Span,
    pub fragment: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Pow,
    Gamma,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "sqrt" => (Func::Sqrt, 1),
            "pow" => (Func::Pow, 2),
            "gamma" => (Func::Gamma, 1),
            "abs" => (Func::Abs, 1),
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
            Func::Gamma => "gamma",
            Func::Abs => "abs",
        }
    }
}

/// Parsed expression tree. Every node keeps its source span.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Constant(f64),
    Variable(Var),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Vec<ExprAst>),
}

impl ExprAst {
    /// Structural equality, ignoring spans.
    pub fn ast_eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Constant(a), ExprKind::Constant(b)) => a == b,
            (ExprKind::Variable(a), ExprKind::Variable(b)) => a == b,
            (ExprKind::Unary(op_a, a), ExprKind::Unary(op_b, b)) => op_a == op_b && a.ast_eq(b),
            (ExprKind::Binary(op_a, la, ra), ExprKind::Binary(op_b, lb, rb)) => {
                op_a == op_b && la.ast_eq(lb) && ra.ast_eq(rb)
            }
            (ExprKind::Call(fa, args_a), ExprKind::Call(fb, args_b)) => {
                fa == fb
                    && args_a.len() == args_b.len()
                    && args_a.iter().zip(args_b).all(|(a, b)| a.ast_eq(b))
            }
            _ => false,
        }
    }

    /// Tree depth, counting leaves as 1.
    pub fn depth(&self) -> usize {
        match &self.kind {
            ExprKind::Constant(_) | ExprKind::Variable(_) => 1,
            ExprKind::Unary(_, c) => 1 + c.depth(),
            ExprKind::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            ExprKind::Call(_, args) => 1 + args.iter().map(|a| a.depth()).max().unwrap_or(0),
        }
    }

    /// Fully parenthesized source form; reparsing it yields a structurally
    /// identical tree.
    pub fn pretty(&self) -> String {
        match &self.kind {
            ExprKind::Constant(c) => {
                if *c < 0.0 || c.is_infinite() || c.is_nan() {
                    // Negative or non-finite literals never come out of the
                    // parser; wrap defensively so the output stays parseable.
                    format!("({c})")
                } else {
                    format!("{c}")
                }
            }
            ExprKind::Variable(Var::T) => "t".into(),
            ExprKind::Variable(Var::X) => "x".into(),
            ExprKind::Unary(UnaryOp::Neg, c) => format!("(-{})", c.pretty()),
            ExprKind::Binary(op, l, r) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                format!("({} {} {})", l.pretty(), sym, r.pretty())
            }
            ExprKind::Call(f, args) => {
                let inner: Vec<String> = args.iter().map(|a| a.pretty()).collect();
                format!("{}({})", f.name(), inner.join(", "))
            }
        }
    }
}

const MAX_DEPTH: usize = 256;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.src.get(self.pos), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error("expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        self.enter()?;
        let mut node = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            let span = Span {
                start: node.span.start,
                end: rhs.span.end,
            };
            node = ExprAst {
                kind: ExprKind::Binary(op, Box::new(node), Box::new(rhs)),
                span,
            };
        }
        self.depth -= 1;
        Ok(node)
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        self.enter()?;
        let mut node = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            let span = Span {
                start: node.span.start,
                end: rhs.span.end,
            };
            node = ExprAst {
                kind: ExprKind::Binary(op, Box::new(node), Box::new(rhs)),
                span,
            };
        }
        self.depth -= 1;
        Ok(node)
    }

    fn factor(&mut self) -> Result<ExprAst, ParseError> {
        self.enter()?;
        let node = if self.peek() == Some(b'-') {
            let start = self.pos;
            self.pos += 1;
            let child = self.factor()?;
            let span = Span {
                start,
                end: child.span.end,
            };
            ExprAst {
                kind: ExprKind::Unary(UnaryOp::Neg, Box::new(child)),
                span,
            }
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        self.enter()?;
        let base = self.atom()?;
        let node = if self.eat(b'^') {
            let exponent = self.factor()?;
            let span = Span {
                start: base.span.start,
                end: exponent.span.end,
            };
            ExprAst {
                kind: ExprKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                span,
            }
        } else {
            base
        };
        self.depth -= 1;
        Ok(node)
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        self.enter()?;
        let node = match self.peek() {
            Some(b'(') => {
                let start = self.pos;
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                ExprAst {
                    kind: inner.kind,
                    span: Span {
                        start,
                        end: self.pos,
                    },
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number()?,
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier()?,
            Some(c) => return Err(self.error(format!("unexpected character `{}`", c as char))),
            None => return Err(self.error("unexpected end of input")),
        };
        self.depth -= 1;
        Ok(node)
    }

    fn number(&mut self) -> Result<ExprAst, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut saw_digit = false;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
            saw_digit = true;
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                saw_digit = true;
                self.pos += 1;
            }
        }
        if !saw_digit {
            self.pos = start;
            return Err(self.error("expected a number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let mut exp_digits = false;
            while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                exp_digits = true;
                self.pos += 1;
            }
            if !exp_digits {
                self.pos = mark; // bare `e` is not part of the literal
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok(ExprAst {
            kind: ExprKind::Constant(value),
            span: Span {
                start,
                end: self.pos,
            },
        })
    }

    fn identifier(&mut self) -> Result<ExprAst, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match name {
            "t" => Ok(ExprAst {
                kind: ExprKind::Variable(Var::T),
                span: Span {
                    start,
                    end: self.pos,
                },
            }),
            "x" => Ok(ExprAst {
                kind: ExprKind::Variable(Var::X),
                span: Span {
                    start,
                    end: self.pos,
                },
            }),
            _ => {
                let Some((func, arity)) = Func::lookup(name) else {
                    return Err(ParseError {
                        offset: start,
                        message: format!("unknown identifier `{name}`"),
                    });
                };
                if !self.eat(b'(') {
                    return Err(self.error(format!("expected `(` after function `{name}`")));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return Err(self.error("expected `)` or `,` in argument list"));
                }
                if args.len() != arity {
                    return Err(ParseError {
                        offset: start,
                        message: format!(
                            "function `{name}` takes {arity} argument(s), got {}",
                            args.len()
                        ),
                    });
                }
                Ok(ExprAst {
                    kind: ExprKind::Call(func, args),
                    span: Span {
                        start,
                        end: self.pos,
                    },
                })
            }
        }
    }
}

/// Parses an expression over the variables `t` and `x`.
pub fn parse(src: &str) -> Result<ExprAst, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input after expression"));
    }
    Ok(node)
}

fn domain_error(src_node: &ExprAst, source: &str, message: impl Into<String>) -> EvalError {
    let span = src_node.span;
    let fragment = source
        .get(span.start..span.end.min(source.len()))
        .unwrap_or("")
        .to_string();
    EvalError {
        span,
        fragment,
        message: message.into(),
    }
}

/// Evaluates a parsed expression at `(t, x)`.
///
/// `source` is the original text, used to attach fragments to domain errors.
pub fn evaluate<R: Real>(ast: &ExprAst, source: &str, t: R, x: R) -> Result<R, EvalError> {
    let value = match &ast.kind {
        ExprKind::Constant(c) => cast::<R>(*c),
        ExprKind::Variable(Var::T) => t,
        ExprKind::Variable(Var::X) => x,
        ExprKind::Unary(UnaryOp::Neg, child) => -evaluate(child, source, t, x)?,
        ExprKind::Binary(op, lhs, rhs) => {
            let l = evaluate(lhs, source, t, x)?;
            let r = evaluate(rhs, source, t, x)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => l / r,
                BinaryOp::Pow => checked_pow(ast, source, l, r)?,
            }
        }
        ExprKind::Call(func, args) => {
            let a0 = evaluate(&args[0], source, t, x)?;
            match func {
                Func::Exp => a0.exp(),
                Func::Sin => a0.sin(),
                Func::Cos => a0.cos(),
                Func::Sqrt => {
                    if a0 < R::zero() {
                        return Err(domain_error(
                            ast,
                            source,
                            format!("square root of negative value {a0}"),
                        ));
                    }
                    a0.sqrt()
                }
                Func::Abs => a0.abs(),
                Func::Gamma => specfun::gamma(a0)
                    .map_err(|e| domain_error(ast, source, e.to_string()))?,
                Func::Pow => {
                    let a1 = evaluate(&args[1], source, t, x)?;
                    checked_pow(ast, source, a0, a1)?
                }
            }
        }
    };
    if value.is_nan() {
        return Err(domain_error(ast, source, "evaluation produced NaN"));
    }
    Ok(value)
}

fn checked_pow<R: Real>(node: &ExprAst, source: &str, base: R, exp: R) -> Result<R, EvalError> {
    if base == R::zero() && exp < R::zero() {
        return Err(domain_error(node, source, "zero raised to a negative power"));
    }
    if base < R::zero() && exp.fract() != R::zero() {
        return Err(domain_error(
            node,
            source,
            format!("fractional power {exp} of negative base {base}"),
        ));
    }
    if base < R::zero() {
        // Integer exponent of a negative base.
        let magnitude = base.abs().powf(exp);
        let half = exp / (R::one() + R::one());
        return Ok(if half.fract() == R::zero() {
            magnitude
        } else {
            -magnitude
        });
    }
    Ok(base.powf(exp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval_str(src: &str, t: f64, x: f64) -> Result<f64, EvalError> {
        let ast = parse(src).unwrap();
        evaluate(&ast, src, t, x)
    }

    #[test]
    fn parses_reference_expression() {
        let ast = parse("exp(-t)*(t^2 - t) - x").unwrap();
        assert_eq!(ast.depth(), 4);
    }

    #[test]
    fn syntax_error_offsets() {
        let err = parse("2*").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse("2 + (3").unwrap_err();
        assert_eq!(err.offset, 6);
        let err = parse("y + 1").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.message.contains("unknown identifier"));
        let err = parse("pow(2)").unwrap_err();
        assert!(err.message.contains("2 argument(s)"));
        assert!(parse("").is_err());
    }

    #[test]
    fn unary_minus_structure() {
        let ast = parse("-x").unwrap();
        assert!(matches!(
            &ast.kind,
            ExprKind::Unary(UnaryOp::Neg, child) if matches!(child.kind, ExprKind::Variable(Var::X))
        ));
        // ^ binds tighter than unary minus.
        assert_relative_eq!(eval_str("-2^2", 0.0, 0.0).unwrap(), -4.0);
        assert_relative_eq!(eval_str("(-2)^2", 0.0, 0.0).unwrap(), 4.0);
        // Power is right-associative.
        assert_relative_eq!(eval_str("2^3^2", 0.0, 0.0).unwrap(), 512.0);
        assert_relative_eq!(eval_str("2^-1", 0.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn evaluation_basics() {
        assert_relative_eq!(eval_str("t + x", 2.0, 3.0).unwrap(), 5.0);
        assert_relative_eq!(
            eval_str("gamma(0.5)^2", 1.0, 1.0).unwrap(),
            core::f64::consts::PI,
            max_relative = 1e-13
        );
        assert_relative_eq!(eval_str("pow(t, 3) / 2", 2.0, 0.0).unwrap(), 4.0);
        assert_relative_eq!(
            eval_str("exp(-t)*(t^2 - t) - x", 1.0, 0.25).unwrap(),
            -0.25
        );
        assert_relative_eq!(eval_str("1.5e2 + .5", 0.0, 0.0).unwrap(), 150.5);
    }

    #[test]
    fn domain_errors_have_spans() {
        let src = "x^(3/2)";
        let err = eval_str(src, 0.0, -1.0).unwrap_err();
        assert_eq!(&src[err.span.start..err.span.end], src);
        assert!(err.message.contains("fractional power"));

        assert!(eval_str("sqrt(-t)", 1.0, 0.0).is_err());
        assert!(eval_str("gamma(0)", 0.0, 0.0).is_err());
        assert!(eval_str("(0-1+1)^(0-1)", 0.0, 0.0).is_err());
        // 0/0 is NaN, reported not propagated.
        assert!(eval_str("(t-t)/(t-t)", 1.0, 0.0).is_err());
        // Integer powers of negatives are fine.
        assert_relative_eq!(eval_str("x^3", 0.0, -2.0).unwrap(), -8.0);
        assert_relative_eq!(eval_str("x^2", 0.0, -2.0).unwrap(), 4.0);
    }

    #[test]
    fn negation_evaluates() {
        for (t, x) in [(0.0, 1.0), (2.5, -3.5), (1.0, 0.0)] {
            assert_relative_eq!(eval_str("-x", t, x).unwrap(), -x);
        }
    }

    #[test]
    fn pretty_roundtrip_corpus() {
        let corpus = [
            "1",
            "t",
            "-x",
            "t + x",
            "t - x - 1",
            "2*t*x",
            "t/x/2",
            "t^2",
            "2^3^2",
            "-t^2",
            "2^-3",
            "(t + x)^2",
            "exp(t)",
            "sin(cos(t))",
            "sqrt(abs(x))",
            "pow(t, x)",
            "gamma(t + 1)",
            "exp(-t)*(t^2 - t) - x",
            "1.5e-3*t",
            ".5 + t",
            "t*(x + 1)*(x - 1)",
            "-(t + x)",
            "- - t",
            "abs(-x)/2",
            "t^(x + 1)",
            "exp(-1.0*t)*(t^2 - t + gamma(0.5))",
            "pow(abs(x), 1.5)",
            "((t))",
            "3.0e0",
            "t*t*t*t*t",
            "x - -t",
            "sin(t)^2 + cos(t)^2",
            "1/(1 + exp(-t))",
            "sqrt(t^2 + x^2)",
            "gamma(gamma(2.5))",
            "2.25*gamma(t + 0.5)",
            "abs(t - x)",
            "pow(2, pow(t, 2))",
            "(t + 1)/(x - 1)",
            "exp(t)^2",
            "t^2^2",
            "0.1 + 0.2*t + 0.3*t^2",
            "-1*t",
            "x/2 + x/3 + x/4",
            "cos(-t)",
            "sqrt(sqrt(16))",
            "t - (x - (t - x))",
            "pow(t + x, 2) - pow(t - x, 2)",
            "1e3",
            "42",
        ];
        for src in corpus {
            let ast = parse(src).unwrap_or_else(|e| panic!("corpus `{src}`: {e}"));
            let printed = ast.pretty();
            let reparsed =
                parse(&printed).unwrap_or_else(|e| panic!("pretty of `{src}` -> `{printed}`: {e}"));
            assert!(
                ast.ast_eq(&reparsed),
                "round-trip changed structure: `{src}` -> `{printed}`"
            );
        }
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert!(parse(&src).is_err());
    }
}
