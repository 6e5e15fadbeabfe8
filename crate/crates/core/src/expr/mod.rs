//! Scalar expression trees over `x1..xm` and the reserved symbol `sigma`.
//!
//! Every function, modifier map and constraint handled by the toolkit is an
//! [`Expr`]. Trees are immutable once built; the smart constructors in this
//! module perform the only simplification the toolkit does, which is
//! constant folding plus the identities `x + 0`, `x * 1`, `x * 0`, `x ^ 1`
//! and `x ^ 0`.

mod diff;
mod eval;
mod parser;
mod print;

pub use diff::{central_gradient, differentiate, gradient, NonDifferentiable};
pub use eval::{EvalError, EvalPoint};
pub use parser::{parse, parse_with_s, ParseError};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Abs,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Abs => "abs",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NaryOp {
    Max,
    Min,
}

impl NaryOp {
    pub fn name(self) -> &'static str {
        match self {
            NaryOp::Max => "max",
            NaryOp::Min => "min",
        }
    }
}

/// Expression tree node.
///
/// `Var(i)` is zero-based: `Var(0)` prints as `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sigma,
    Neg(Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Nary(NaryOp, Vec<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Negation; folds constants so that `-2` is a single constant node.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), None) if x == 0.0 => b,
            (None, Some(y)) if y == 0.0 => a,
            _ => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), None) if x == 0.0 => Expr::neg(b),
            (None, Some(y)) if y == 0.0 => a,
            _ => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), None) if x == 1.0 => b,
            (None, Some(y)) if y == 1.0 => a,
            _ => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(x), None) if x == 0.0 => Expr::Const(0.0),
            (None, Some(y)) if y == 1.0 => a,
            _ => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => match eval::pow_checked(x, y) {
                Ok(v) => Expr::Const(v),
                Err(_) => Expr::Binary(BinaryOp::Pow, Box::new(a), Box::new(b)),
            },
            (_, Some(y)) if y == 1.0 => a,
            (_, Some(y)) if y == 0.0 => Expr::Const(1.0),
            _ => Expr::Binary(BinaryOp::Pow, Box::new(a), Box::new(b)),
        }
    }

    /// N-ary max/min; a single operand collapses to itself.
    pub fn nary(op: NaryOp, mut args: Vec<Expr>) -> Expr {
        if args.len() == 1 {
            args.pop().unwrap()
        } else {
            Expr::Nary(op, args)
        }
    }

    /// Highest variable index referenced plus one, i.e. the minimum arity.
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Sigma => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Unary(_, e) => e.min_arity(),
            Expr::Binary(_, a, b) => a.min_arity().max(b.min_arity()),
            Expr::Nary(_, args) => args.iter().map(Expr::min_arity).max().unwrap_or(0),
        }
    }

    pub fn uses_sigma(&self) -> bool {
        match self {
            Expr::Sigma => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Unary(_, e) => e.uses_sigma(),
            Expr::Binary(_, a, b) => a.uses_sigma() || b.uses_sigma(),
            Expr::Nary(_, args) => args.iter().any(Expr::uses_sigma),
        }
    }

    pub fn depends_on(&self, index: usize) -> bool {
        match self {
            Expr::Var(i) => *i == index,
            Expr::Const(_) | Expr::Sigma => false,
            Expr::Neg(e) | Expr::Unary(_, e) => e.depends_on(index),
            Expr::Binary(_, a, b) => a.depends_on(index) || b.depends_on(index),
            Expr::Nary(_, args) => args.iter().any(|a| a.depends_on(index)),
        }
    }

    /// Shifts every variable index by `offset`. Used to lift one-point maps
    /// into the two-point `(b1, b2)` variable layout.
    pub fn shift_vars(&self, offset: usize) -> Expr {
        self.map_vars(&|i| Expr::Var(i + offset))
    }

    /// Substitutes each variable `x(i+1)` with `replacement(i)`.
    pub fn map_vars(&self, replacement: &dyn Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Var(i) => replacement(*i),
            Expr::Const(_) | Expr::Sigma => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_vars(replacement))),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map_vars(replacement))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.map_vars(replacement)),
                Box::new(b.map_vars(replacement)),
            ),
            Expr::Nary(op, args) => {
                Expr::Nary(*op, args.iter().map(|a| a.map_vars(replacement)).collect())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Sigma => 1,
            Expr::Neg(e) | Expr::Unary(_, e) => 1 + e.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
            Expr::Nary(_, args) => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(self))
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
