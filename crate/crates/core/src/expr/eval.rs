use super::{BinaryOp, Expr, NaryOp, UnaryOp};
use thiserror::Error;

/// Point at which an expression is evaluated: the vector `b` plus, when the
/// expression references it, the scalar `sigma`.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub b: &'a [f64],
    pub sigma: Option<f64>,
}

impl<'a> EvalPoint<'a> {
    pub fn new(b: &'a [f64]) -> Self {
        EvalPoint { b, sigma: None }
    }

    pub fn with_sigma(b: &'a [f64], sigma: f64) -> Self {
        EvalPoint {
            b,
            sigma: Some(sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// The sample point lies outside the natural domain of some node.
    #[error("domain error at `{node}`: {reason}")]
    Domain { node: String, reason: String },
    #[error("variable x{index} referenced but the point has dimension {dim}")]
    Arity { index: usize, dim: usize },
    #[error("expression references sigma but no sigma was supplied")]
    MissingSigma,
}

impl EvalError {
    fn domain(node: &Expr, reason: impl Into<String>) -> Self {
        let mut text = node.to_string();
        if text.len() > 80 {
            text.truncate(77);
            text.push_str("...");
        }
        EvalError::Domain {
            node: text,
            reason: reason.into(),
        }
    }
}

/// `base ^ exponent` over the reals: negative bases need an integral
/// exponent, `0 ^ negative` is undefined and `0 ^ positive` is `0`.
pub(crate) fn pow_checked(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if base == 0.0 {
        return if exponent > 0.0 {
            Ok(0.0)
        } else if exponent == 0.0 {
            Ok(1.0)
        } else {
            Err("zero raised to a negative power")
        };
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err("negative base under a non-integer exponent");
    }
    let v = base.powf(exponent);
    if v.is_finite() {
        Ok(v)
    } else {
        Err("power overflow")
    }
}

impl Expr {
    /// Evaluates the tree at `p`. The result is always finite; anything else
    /// is reported as an [`EvalError`].
    pub fn eval(&self, p: &EvalPoint<'_>) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *p.b.get(*i).ok_or(EvalError::Arity {
                index: i + 1,
                dim: p.b.len(),
            })?,
            Expr::Sigma => p.sigma.ok_or(EvalError::MissingSigma)?,
            Expr::Neg(e) => -e.eval(p)?,
            Expr::Unary(op, e) => {
                let x = e.eval(p)?;
                match op {
                    UnaryOp::Abs => x.abs(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::domain(self, "log of a nonpositive value"));
                        }
                        x.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::domain(self, "sqrt of a negative value"));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(p)?;
                let y = b.eval(p)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::domain(self, "division by zero"));
                        }
                        x / y
                    }
                    BinaryOp::Pow => {
                        pow_checked(x, y).map_err(|reason| EvalError::domain(self, reason))?
                    }
                }
            }
            Expr::Nary(op, args) => {
                let mut acc: Option<f64> = None;
                for a in args {
                    let v = a.eval(p)?;
                    acc = Some(match (acc, op) {
                        (None, _) => v,
                        (Some(m), NaryOp::Max) => m.max(v),
                        (Some(m), NaryOp::Min) => m.min(v),
                    });
                }
                acc.ok_or_else(|| EvalError::domain(self, "empty argument list"))?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::domain(self, "non-finite result"))
        }
    }

    pub fn eval_at(&self, b: &[f64]) -> Result<f64, EvalError> {
        self.eval(&EvalPoint::new(b))
    }

    pub fn eval_with_sigma(&self, b: &[f64], sigma: f64) -> Result<f64, EvalError> {
        self.eval(&EvalPoint::with_sigma(b, sigma))
    }
}
