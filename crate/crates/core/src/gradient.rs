//! Gradient evaluation with a finite-difference fallback chain.

use crate::expr::{central_gradient, gradient, EvalError, EvalPoint, Expr};
use serde::Serialize;

/// Step of the one-sided directional difference quotient.
pub const ONE_SIDED_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    Symbolic,
    CentralDifference,
    /// The gradient is singular or undefined at the base point and the
    /// directional term was estimated by `[h(b + t u) - h(b)] / t`.
    SingularGradientFallback,
}

/// A function together with its symbolic gradient, when one exists.
#[derive(Debug, Clone)]
pub struct Differentiable {
    pub f: Expr,
    pub arity: usize,
    pub symbolic: Option<Vec<Expr>>,
}

impl Differentiable {
    pub fn new(f: &Expr, arity: usize) -> Self {
        Differentiable {
            f: f.clone(),
            arity,
            symbolic: gradient(f, arity).ok(),
        }
    }

    /// Gradient at `b`: symbolic if it evaluates, central differences otherwise.
    pub fn grad(&self, b: &[f64]) -> Result<(Vec<f64>, GradientSource), EvalError> {
        let p = EvalPoint::new(b);
        if let Some(sym) = &self.symbolic {
            if let Ok(g) = sym.iter().map(|d| d.eval(&p)).collect::<Result<Vec<_>, _>>() {
                return Ok((g, GradientSource::Symbolic));
            }
        }
        let g = central_gradient(&self.f, &p)?;
        if g.iter().all(|v| v.is_finite()) {
            Ok((g, GradientSource::CentralDifference))
        } else {
            Err(EvalError::Domain {
                node: self.f.to_string(),
                reason: "non-finite finite-difference gradient".into(),
            })
        }
    }

    /// Symbolic gradient at `b` if available and evaluable.
    pub fn symbolic_grad(&self, b: &[f64]) -> Option<Vec<f64>> {
        let p = EvalPoint::new(b);
        self.symbolic
            .as_ref()
            .and_then(|sym| sym.iter().map(|d| d.eval(&p)).collect::<Result<Vec<_>, _>>().ok())
    }

    /// `grad f(base)^T (target - base)`, falling back to a one-sided
    /// difference quotient along `target - base` when neither the symbolic
    /// nor the central-difference gradient exists at `base`.
    pub fn directional_term(
        &self,
        base: &[f64],
        target: &[f64],
    ) -> Result<(f64, GradientSource), EvalError> {
        match self.grad(base) {
            Ok((g, src)) => Ok((dot_diff(&g, target, base), src)),
            Err(err) => {
                let norm = base
                    .iter()
                    .zip(target)
                    .map(|(b, t)| (t - b) * (t - b))
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 {
                    return Ok((0.0, GradientSource::SingularGradientFallback));
                }
                let f0 = self.f.eval_at(base).map_err(|_| err.clone())?;
                let stepped: Vec<f64> = base
                    .iter()
                    .zip(target)
                    .map(|(b, t)| b + ONE_SIDED_STEP * (t - b) / norm)
                    .collect();
                let f1 = self.f.eval_at(&stepped).map_err(|_| err)?;
                Ok((
                    (f1 - f0) / ONE_SIDED_STEP * norm,
                    GradientSource::SingularGradientFallback,
                ))
            }
        }
    }
}

pub fn dot_diff(g: &[f64], target: &[f64], base: &[f64]) -> f64 {
    g.iter()
        .zip(target.iter().zip(base))
        .map(|(gi, (t, b))| gi * (t - b))
        .sum()
}

/// `|a - b| / max(1, |a|)`, the relative gap used for gradient agreement.
pub fn relative_gap(symbolic: f64, numeric: f64) -> f64 {
    (symbolic - numeric).abs() / symbolic.abs().max(1.0)
}
