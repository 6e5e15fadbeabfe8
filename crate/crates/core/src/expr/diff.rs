use super::{BinaryOp, EvalError, EvalPoint, Expr, UnaryOp};
use thiserror::Error;

/// `abs`, `max` and `min` have no symbolic derivative here; callers fall back
/// to finite differences.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("`{node}` is not symbolically differentiable")]
pub struct NonDifferentiable {
    pub node: String,
}

/// Exact symbolic partial derivative with respect to `x{wrt+1}`.
///
/// Subtrees that do not depend on the variable differentiate to zero even if
/// they contain `abs`/`max`/`min`.
pub fn differentiate(e: &Expr, wrt: usize) -> Result<Expr, NonDifferentiable> {
    if !e.depends_on(wrt) {
        return Ok(Expr::zero());
    }
    Ok(match e {
        Expr::Const(_) | Expr::Sigma => Expr::zero(),
        Expr::Var(i) => Expr::constant(if *i == wrt { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(differentiate(a, wrt)?),
        Expr::Unary(op, a) => {
            let da = differentiate(a, wrt)?;
            let a = (**a).clone();
            match op {
                UnaryOp::Exp => Expr::mul(Expr::unary(UnaryOp::Exp, a), da),
                UnaryOp::Log => Expr::div(da, a),
                UnaryOp::Sqrt => Expr::div(
                    da,
                    Expr::mul(Expr::constant(2.0), Expr::unary(UnaryOp::Sqrt, a)),
                ),
                UnaryOp::Abs => return Err(non_diff(e)),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = differentiate(a, wrt)?;
            let db = differentiate(b, wrt)?;
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => Expr::add(da, db),
                BinaryOp::Sub => Expr::sub(da, db),
                BinaryOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                BinaryOp::Div => Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                    Expr::pow(b, Expr::constant(2.0)),
                ),
                BinaryOp::Pow => {
                    if !b.depends_on(wrt) {
                        // d(a^c) = c * a^(c-1) * da
                        let reduced = Expr::sub(b.clone(), Expr::constant(1.0));
                        Expr::mul(Expr::mul(b, Expr::pow(a, reduced)), da)
                    } else {
                        // d(a^b) = a^b * (db * log(a) + b * da / a)
                        let log_term = Expr::mul(db, Expr::unary(UnaryOp::Log, a.clone()));
                        let ratio = Expr::div(Expr::mul(b.clone(), da), a.clone());
                        Expr::mul(Expr::pow(a, b), Expr::add(log_term, ratio))
                    }
                }
            }
        }
        Expr::Nary(..) => return Err(non_diff(e)),
    })
}

fn non_diff(e: &Expr) -> NonDifferentiable {
    NonDifferentiable {
        node: e.to_string(),
    }
}

/// Symbolic gradient with respect to `x1..x{arity}`.
pub fn gradient(e: &Expr, arity: usize) -> Result<Vec<Expr>, NonDifferentiable> {
    (0..arity).map(|i| differentiate(e, i)).collect()
}

/// Central finite-difference gradient with step `1e-5 * max(1, |x_i|)`.
pub fn central_gradient(e: &Expr, p: &EvalPoint<'_>) -> Result<Vec<f64>, EvalError> {
    let mut shifted = p.b.to_vec();
    let mut out = Vec::with_capacity(p.b.len());
    for i in 0..p.b.len() {
        let h = 1e-5 * p.b[i].abs().max(1.0);
        shifted[i] = p.b[i] + h;
        let fp = e.eval(&EvalPoint {
            b: &shifted,
            sigma: p.sigma,
        })?;
        shifted[i] = p.b[i] - h;
        let fm = e.eval(&EvalPoint {
            b: &shifted,
            sigma: p.sigma,
        })?;
        shifted[i] = p.b[i];
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}
