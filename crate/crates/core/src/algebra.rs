//! Closure constructions: sums, nonnegative scalings, weighted sums, pointwise
//! maxima, nondecreasing affine compositions and finite suprema of certified
//! general s-convex instances.
//!
//! Constructors are pure and return the new function with its modifier map.
//! Whether the result is certified is decided by re-running the checker
//! ([`Construction::recheck`]), never assumed.

use crate::defcheck::{check_general_s_convex, CheckError, MapKind, ModifierMap};
use crate::expr::{Expr, NaryOp};
use crate::report::{CheckReport, Tolerance};
use crate::sampling::{BoxDomain, SamplePlan};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("instances use different s ({0} vs {1})")]
    MismatchedS(f64, f64),
    #[error("instances live on different domains")]
    MismatchedDomain,
    #[error("scaling factor {0} is negative")]
    NegativeAlpha(f64),
    #[error("composition slope {0} is negative; the outer map must be nondecreasing")]
    DecreasingComposition(f64),
    #[error("at least one instance is required")]
    EmptyList,
    #[error("{instances} instances but {alphas} weights")]
    LengthMismatch { instances: usize, alphas: usize },
    #[error("instances do not share a common modifier map")]
    MixedModifierMaps,
    #[error("modifier map must be one-point")]
    NotOnePoint,
    #[error("instance is not certified on samples (verdict {0:?})")]
    NotCertified(crate::report::Verdict),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A function whose general s-convexity with respect to `theta` has been
/// certified on samples of `domain`.
#[derive(Debug, Clone)]
pub struct CertifiedInstance {
    pub h: Expr,
    pub theta: ModifierMap,
    pub s: f64,
    pub domain: BoxDomain,
    pub report: CheckReport,
}

impl CertifiedInstance {
    /// Runs the checker and keeps the instance only if it certifies.
    pub fn certify(
        h: Expr,
        theta: ModifierMap,
        domain: BoxDomain,
        plan: &SamplePlan,
        tol: &Tolerance,
    ) -> Result<Self, AlgebraError> {
        if theta.kind != MapKind::OnePoint {
            return Err(AlgebraError::NotOnePoint);
        }
        let report = check_general_s_convex(&h, &theta, &domain, plan, tol)?;
        if !report.is_certified() {
            return Err(AlgebraError::NotCertified(report.verdict));
        }
        Ok(CertifiedInstance {
            h,
            theta,
            s: plan.s,
            domain,
            report,
        })
    }
}

/// Output of a constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub h: Expr,
    pub theta: ModifierMap,
    pub notes: Vec<String>,
}

impl Construction {
    fn new(h: Expr, theta: Expr) -> Self {
        Construction {
            h,
            theta: ModifierMap::one_point(theta),
            notes: Vec::new(),
        }
    }

    fn note(mut self, text: &str) -> Self {
        self.notes.push(text.to_string());
        self
    }

    /// Re-runs the general s-convexity check on the constructed pair.
    pub fn recheck(
        &self,
        domain: &BoxDomain,
        plan: &SamplePlan,
        tol: &Tolerance,
    ) -> Result<CheckReport, CheckError> {
        let mut r = check_general_s_convex(&self.h, &self.theta, domain, plan, tol)?;
        r.notes.extend(self.notes.iter().cloned());
        Ok(r)
    }
}

fn same_setting(instances: &[&CertifiedInstance]) -> Result<(), AlgebraError> {
    let first = instances.first().ok_or(AlgebraError::EmptyList)?;
    for other in &instances[1..] {
        if other.s != first.s {
            return Err(AlgebraError::MismatchedS(first.s, other.s));
        }
        if other.domain != first.domain {
            return Err(AlgebraError::MismatchedDomain);
        }
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), AlgebraError> {
    if alpha >= 0.0 {
        Ok(())
    } else {
        Err(AlgebraError::NegativeAlpha(alpha))
    }
}

/// `(h1 + h2, theta1 + theta2)`.
pub fn combine_sum(
    a: &CertifiedInstance,
    b: &CertifiedInstance,
) -> Result<Construction, AlgebraError> {
    same_setting(&[a, b])?;
    let mut out = Construction::new(
        Expr::add(a.h.clone(), b.h.clone()),
        Expr::add(a.theta.expr.clone(), b.theta.expr.clone()),
    );
    if a.theta == b.theta {
        out = out.note(
            "summands share theta; the sum satisfies the inequality with the summed map 2*theta, \
             which is what is emitted",
        );
    }
    Ok(out)
}

/// `(alpha h, alpha theta)` for `alpha >= 0`.
pub fn combine_scale(a: &CertifiedInstance, alpha: f64) -> Result<Construction, AlgebraError> {
    check_alpha(alpha)?;
    Ok(Construction::new(
        Expr::mul(Expr::constant(alpha), a.h.clone()),
        Expr::mul(Expr::constant(alpha), a.theta.expr.clone()),
    ))
}

/// `(sum_k alpha_k h_k, sum_k alpha_k theta_k)`.
pub fn combine_weighted_sum(
    instances: &[CertifiedInstance],
    alphas: &[f64],
) -> Result<Construction, AlgebraError> {
    if instances.len() != alphas.len() {
        return Err(AlgebraError::LengthMismatch {
            instances: instances.len(),
            alphas: alphas.len(),
        });
    }
    let refs: Vec<&CertifiedInstance> = instances.iter().collect();
    same_setting(&refs)?;
    for &a in alphas {
        check_alpha(a)?;
    }
    let weighted = |pick: &dyn Fn(&CertifiedInstance) -> &Expr| {
        instances
            .iter()
            .zip(alphas)
            .map(|(inst, &a)| Expr::mul(Expr::constant(a), pick(inst).clone()))
            .reduce(Expr::add)
            .expect("non-empty")
    };
    Ok(Construction::new(
        weighted(&|i| &i.h),
        weighted(&|i| &i.theta.expr),
    ))
}

/// `(max_k h_k, max_k theta_k)`.
pub fn combine_max(instances: &[CertifiedInstance]) -> Result<Construction, AlgebraError> {
    let refs: Vec<&CertifiedInstance> = instances.iter().collect();
    same_setting(&refs)?;
    Ok(Construction::new(
        Expr::nary(NaryOp::Max, instances.iter().map(|i| i.h.clone()).collect()),
        Expr::nary(
            NaryOp::Max,
            instances.iter().map(|i| i.theta.expr.clone()).collect(),
        ),
    ))
}

/// `(g o h, g o theta)` with `g(t) = slope * t + intercept`, `slope >= 0`.
pub fn combine_composition(
    a: &CertifiedInstance,
    slope: f64,
    intercept: f64,
) -> Result<Construction, AlgebraError> {
    if !(slope >= 0.0) {
        return Err(AlgebraError::DecreasingComposition(slope));
    }
    let g = |e: &Expr| {
        Expr::add(
            Expr::mul(Expr::constant(slope), e.clone()),
            Expr::constant(intercept),
        )
    };
    let out = Construction::new(g(&a.h), g(&a.theta.expr));
    Ok(if intercept != 0.0 {
        out.note("nonzero intercept: closure is not guaranteed pointwise; verdict is empirical")
    } else {
        out
    })
}

/// Pointwise supremum of finitely many instances sharing one map.
pub fn combine_sup(instances: &[CertifiedInstance]) -> Result<Construction, AlgebraError> {
    let refs: Vec<&CertifiedInstance> = instances.iter().collect();
    same_setting(&refs)?;
    let theta = &instances[0].theta;
    if instances.iter().any(|i| i.theta != *theta) {
        return Err(AlgebraError::MixedModifierMaps);
    }
    Ok(Construction::new(
        Expr::nary(NaryOp::Max, instances.iter().map(|i| i.h.clone()).collect()),
        theta.expr.clone(),
    ))
}
