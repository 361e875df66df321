//! Scalar expressions of one variable with named real parameters.
//!
//! Expressions are parsed from text (see [`parse_expr`]) or composed in code
//! through the arithmetic operators, and are evaluated together with their
//! exact derivatives through [`Jet`]s. There is no symbolic simplification:
//! composition is purely structural and derivatives come from Taylor-mode
//! evaluation.
//!
//! # Grammar
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | 'x' | 'pi' | param
//!          | func '(' expr ')' | 'deriv' '(' expr ',' integer ')'
//!          | '(' expr ')'
//! func    := sin | cos | tan | exp | ln | sinh | cosh | tanh | sqrt
//! ```
//!
//! Implicit multiplication (`2x`) and unary plus are rejected.

mod jet;
mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

pub use jet::{Jet, MAX_ORDER};
pub use parser::{parse_expr, parse_expr_in};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    EmptyInput,
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("domain error: {what} (argument {at})")]
    Domain { what: &'static str, at: f64 },
    #[error("derivative order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooHigh(usize),
}

/// Named parameter values used at evaluation time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, f64)]) -> Self {
        Bindings(
            pairs
                .iter()
                .map(|(k, v)| (k.as_ref().to_string(), *v))
                .collect(),
        )
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, a: &Jet) -> Result<Jet, ExprError> {
        match self {
            Func::Sin => Ok(a.sin_cos().0),
            Func::Cos => Ok(a.sin_cos().1),
            Func::Tan => a.tan(),
            Func::Exp => Ok(a.exp()),
            Func::Ln => a.ln(),
            Func::Sinh => Ok(a.sinh_cosh().0),
            Func::Cosh => Ok(a.sinh_cosh().1),
            Func::Tanh => Ok(a.tanh()),
            Func::Sqrt => a.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug)]
pub(crate) enum Node {
    Const(f64),
    Var,
    Param(String),
    Neg(Expr),
    Bin(BinOp, Expr, Expr),
    Call(Func, Expr),
    /// n-th derivative with respect to the variable.
    Deriv(usize, Expr),
}

/// Immutable expression tree; cheap to clone and share across threads.
#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub(crate) fn node(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn constant(value: f64) -> Expr {
        Expr::node(Node::Const(value))
    }

    /// The independent variable.
    pub fn var() -> Expr {
        Expr::node(Node::Var)
    }

    pub fn param(name: &str) -> Expr {
        Expr::node(Node::Param(name.to_string()))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::node(Node::Call(f, arg))
    }

    pub fn exp(&self) -> Expr {
        Expr::call(Func::Exp, self.clone())
    }

    pub fn sin(&self) -> Expr {
        Expr::call(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::call(Func::Cos, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        Expr::call(Func::Sqrt, self.clone())
    }

    pub fn powi(&self, n: i32) -> Expr {
        Expr::node(Node::Bin(
            BinOp::Pow,
            self.clone(),
            Expr::constant(n as f64),
        ))
    }

    pub fn pow(&self, e: Expr) -> Expr {
        Expr::node(Node::Bin(BinOp::Pow, self.clone(), e))
    }

    /// The `n`-th derivative of this expression, evaluated by jet shifting.
    pub fn deriv(&self, n: usize) -> Expr {
        if n == 0 {
            return self.clone();
        }
        match &*self.0 {
            Node::Const(_) => Expr::constant(0.0),
            Node::Deriv(m, inner) => Expr::node(Node::Deriv(m + n, inner.clone())),
            _ => Expr::node(Node::Deriv(n, self.clone())),
        }
    }

    /// `Some(c)` when the expression is a literal constant.
    pub fn as_constant(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Highest derivative of the variable this expression needs internally
    /// when evaluated at order 0.
    pub fn derivative_depth(&self) -> usize {
        match &*self.0 {
            Node::Const(_) | Node::Var | Node::Param(_) => 0,
            Node::Neg(a) | Node::Call(_, a) => a.derivative_depth(),
            Node::Bin(_, a, b) => a.derivative_depth().max(b.derivative_depth()),
            Node::Deriv(n, a) => n + a.derivative_depth(),
        }
    }

    /// Names of all parameters referenced by the expression.
    pub fn params(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match &*e.0 {
                Node::Const(_) | Node::Var => {}
                Node::Param(p) => {
                    if !out.contains(p) {
                        out.push(p.clone())
                    }
                }
                Node::Neg(a) | Node::Call(_, a) | Node::Deriv(_, a) => walk(a, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Substitutes bound parameters by constants.
    pub fn bind(&self, b: &Bindings) -> Expr {
        match &*self.0 {
            Node::Const(_) | Node::Var => self.clone(),
            Node::Param(p) => match b.get(p) {
                Some(v) => Expr::constant(v),
                None => self.clone(),
            },
            Node::Neg(a) => Expr::node(Node::Neg(a.bind(b))),
            Node::Call(f, a) => Expr::call(*f, a.bind(b)),
            Node::Deriv(n, a) => Expr::node(Node::Deriv(*n, a.bind(b))),
            Node::Bin(op, l, r) => Expr::node(Node::Bin(*op, l.bind(b), r.bind(b))),
        }
    }

    /// Jet of order `order` at `x`.
    pub fn jet(&self, x: f64, order: usize, b: &Bindings) -> Result<Jet, ExprError> {
        if order > MAX_ORDER {
            return Err(ExprError::OrderTooHigh(order));
        }
        self.jet_inner(x, order, b)
    }

    fn jet_inner(&self, x: f64, order: usize, b: &Bindings) -> Result<Jet, ExprError> {
        Ok(match &*self.0 {
            Node::Const(c) => Jet::constant(*c, order),
            Node::Var => Jet::variable(x, order),
            Node::Param(p) => Jet::constant(
                b.get(p)
                    .ok_or_else(|| ExprError::UnboundParameter(p.clone()))?,
                order,
            ),
            Node::Neg(a) => -a.jet_inner(x, order, b)?,
            Node::Call(f, a) => f.apply(&a.jet_inner(x, order, b)?)?,
            Node::Deriv(n, a) => {
                let inner = order + n;
                if inner > MAX_ORDER {
                    return Err(ExprError::OrderTooHigh(inner));
                }
                a.jet_inner(x, inner, b)?.shift(*n)?
            }
            Node::Bin(op, l, r) => {
                let lj = l.jet_inner(x, order, b)?;
                let rj = r.jet_inner(x, order, b)?;
                match op {
                    BinOp::Add => lj + rj,
                    BinOp::Sub => lj - rj,
                    BinOp::Mul => lj * rj,
                    BinOp::Div => lj.div(&rj)?,
                    BinOp::Pow => lj.pow(&rj)?,
                }
            }
        })
    }

    /// Value at `x` with no parameters.
    pub fn eval(&self, x: f64) -> Result<f64, ExprError> {
        self.eval_with(x, &Bindings::default())
    }

    pub fn eval_with(&self, x: f64, b: &Bindings) -> Result<f64, ExprError> {
        Ok(self.jet(x, 0, b)?.value())
    }

    /// Value and derivatives up to `order` at `x` with no parameters.
    pub fn derivs(&self, x: f64, order: usize) -> Result<Vec<f64>, ExprError> {
        Ok(self.jet(x, order, &Bindings::default())?.derivatives())
    }
}

/// Evaluates `e` and its first `order` derivatives at `x`.
pub fn eval_jet(e: &Expr, x: f64, order: usize, bindings: &Bindings) -> Result<Jet, ExprError> {
    e.jet(x, order, bindings)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var => write!(f, "x"),
            Node::Param(p) => write!(f, "{p}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Deriv(n, a) => write!(f, "deriv({a}, {n})"),
            Node::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::node(Node::Bin($op, self, rhs))
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::node(Node::Bin($op, self, rhs.clone()))
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::node(Node::Bin($op, self.clone(), rhs))
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::node(Node::Bin($op, self.clone(), rhs.clone()))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::node(Node::Bin($op, self, Expr::constant(rhs)))
            }
        }
        impl $tr<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::node(Node::Bin($op, self.clone(), Expr::constant(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::node(Node::Bin($op, Expr::constant(self), rhs))
            }
        }
        impl $tr<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::node(Node::Bin($op, Expr::constant(self), rhs.clone()))
            }
        }
    };
}

binop!(Add, add, BinOp::Add);
binop!(Sub, sub, BinOp::Sub);
binop!(Mul, mul, BinOp::Mul);
binop!(Div, div, BinOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::node(Node::Neg(self))
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::node(Node::Neg(self.clone()))
    }
}
