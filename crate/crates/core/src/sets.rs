//! Epigraph-shaped general s-convex sets in `R^(m+1)`.
//!
//! A set is the intersection of the epigraphs `{(b, a) : h_k(b) <= a}` of
//! finitely many functions. It is general s-convex with respect to `theta`
//! when, for members `(b1, a)`, `(b2, c)` and every sigma, the point
//!
//! ```text
//! (sigma b1 + (1-sigma) b2,
//!  sigma^s [a + theta(b1)] + (1-sigma)^s [c + theta(b2)] + theta((b1+b2)/2))
//! ```
//!
//! is again a member.

use crate::defcheck::{check_general_s_convex, CheckError, MapKind, ModifierMap};
use crate::expr::{EvalError, Expr};
use crate::report::{self, CheckConfig, CheckReport, Sides, Tolerance, Witness};
use crate::sampling::{midpoint, mix, sample_pairs, BoxDomain, SamplePlan};
use thiserror::Error;

/// Default height offsets above the graph for sampled members.
pub const DEFAULT_OFFSETS: [f64; 2] = [0.0, 1.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("beta offsets must be a nonempty list of nonnegative reals")]
    BadOffsets,
    #[error("a set needs at least one epigraph")]
    Empty,
    #[error("sets do not share a common modifier map and s")]
    MixedModifierMaps,
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSConvexSetSpec {
    /// Functions whose epigraphs are intersected.
    pub epigraphs: Vec<Expr>,
    pub theta: ModifierMap,
    pub s: f64,
}

impl GeneralSConvexSetSpec {
    pub fn epigraph_of(h: Expr, theta: ModifierMap, s: f64) -> Self {
        GeneralSConvexSetSpec {
            epigraphs: vec![h],
            theta,
            s,
        }
    }

    /// Lowest height at `b` that is still inside the set.
    pub fn floor(&self, b: &[f64]) -> Result<f64, EvalError> {
        let mut best = f64::NEG_INFINITY;
        for h in &self.epigraphs {
            best = best.max(h.eval_at(b)?);
        }
        Ok(best)
    }

    /// `(b, a)` is a member iff `h_k(b) <= a + slack` for every k.
    pub fn contains(&self, b: &[f64], a: f64, tol: &Tolerance) -> Result<bool, EvalError> {
        Ok(self.floor(b)? <= a + tol.slack(a))
    }
}

fn validate(spec: &GeneralSConvexSetSpec, m: usize) -> Result<(), SetError> {
    if spec.epigraphs.is_empty() {
        return Err(SetError::Empty);
    }
    if spec.theta.kind != MapKind::OnePoint {
        return Err(CheckError::MapKind {
            what: "theta",
            expected: MapKind::OnePoint,
        }
        .into());
    }
    for e in spec.epigraphs.iter().chain([&spec.theta.expr]) {
        if e.min_arity() > m {
            return Err(CheckError::Arity {
                what: "set description",
                needed: e.min_arity(),
                dim: m,
            }
            .into());
        }
    }
    Ok(())
}

/// Checks closure of the set under the combination above, sampling members
/// at heights `floor(b) + offset` for every offset pair.
///
/// The margin at a sample is the combined height minus the set's floor at
/// the combined base point.
pub fn set_check(
    spec: &GeneralSConvexSetSpec,
    d: &BoxDomain,
    plan: &SamplePlan,
    beta_offsets: &[f64],
    tol: &Tolerance,
) -> Result<CheckReport, SetError> {
    if beta_offsets.is_empty() || beta_offsets.iter().any(|o| !(*o >= 0.0) || !o.is_finite()) {
        return Err(SetError::BadOffsets);
    }
    plan.validate().map_err(CheckError::from)?;
    validate(spec, d.dim())?;
    let s = spec.s;
    let pairs = sample_pairs(d, plan).map_err(CheckError::from)?;
    let n_pairs = pairs.len();

    // heights are resolved inside the sample closure so that a floor that
    // fails to evaluate is recorded as a domain error
    let mut samples = Vec::new();
    for (b1, b2) in &pairs {
        for &sg in &plan.sigma_grid {
            for &o1 in beta_offsets {
                for &o2 in beta_offsets {
                    let mut w = Witness::new(b1, b2, sg);
                    w.alpha = Some(o1);
                    w.beta = Some(o2);
                    samples.push(w);
                }
            }
        }
    }
    let sides = |w: &Witness| -> Result<Sides, EvalError> {
        let alpha = spec.floor(&w.b1)? + w.alpha.unwrap_or(0.0);
        let beta = spec.floor(&w.b2)? + w.beta.unwrap_or(0.0);
        let t1 = spec.theta.eval_one(&w.b1, w.sigma)?;
        let t2 = spec.theta.eval_one(&w.b2, w.sigma)?;
        let tm = spec.theta.eval_one(&midpoint(&w.b1, &w.b2), w.sigma)?;
        let height = w.sigma.powf(s) * (alpha + t1) + (1.0 - w.sigma).powf(s) * (beta + t2) + tm;
        let floor = spec.floor(&mix(w.sigma, &w.b1, &w.b2))?;
        Ok(Sides {
            lhs: floor,
            rhs: height,
            strict: false,
        })
    };
    let (_, summary) = report::evaluate(samples, tol, sides);

    let mut notes = vec![format!(
        "members sampled at heights floor(b) + offset; witness alpha/beta are the offsets, offsets = {beta_offsets:?}"
    )];
    if spec.epigraphs.len() > 1 {
        notes.push(format!("intersection of {} epigraphs", spec.epigraphs.len()));
    }
    let mut plan_s = plan.clone();
    plan_s.s = s;
    let config = CheckConfig::new(d, &plan_s, tol, false, n_pairs);
    Ok(summary.into_report("general_s_convex_set", config, notes))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Equivalence {
    pub function_report: CheckReport,
    pub set_report: CheckReport,
    pub agreement: bool,
}

/// Function-level check of `h` next to the set-level check of its epigraph.
/// A disagreement is reported, not raised.
pub fn epigraph_equivalence(
    h: &Expr,
    theta: &ModifierMap,
    d: &BoxDomain,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<Equivalence, SetError> {
    let function_report = check_general_s_convex(h, theta, d, plan, tol)?;
    let spec = GeneralSConvexSetSpec::epigraph_of(h.clone(), theta.clone(), plan.s);
    let set_report = set_check(&spec, d, plan, &DEFAULT_OFFSETS, tol)?;
    let agreement = function_report.verdict == set_report.verdict;
    Ok(Equivalence {
        function_report,
        set_report,
        agreement,
    })
}

/// Closure check of the intersection of sets sharing `theta` and `s`.
pub fn intersect_check(
    specs: &[GeneralSConvexSetSpec],
    d: &BoxDomain,
    plan: &SamplePlan,
    beta_offsets: &[f64],
    tol: &Tolerance,
) -> Result<CheckReport, SetError> {
    let first = specs.first().ok_or(SetError::Empty)?;
    if specs.iter().any(|sp| sp.theta != first.theta || sp.s != first.s) {
        return Err(SetError::MixedModifierMaps);
    }
    let joined = GeneralSConvexSetSpec {
        epigraphs: specs.iter().flat_map(|sp| sp.epigraphs.iter().cloned()).collect(),
        theta: first.theta.clone(),
        s: first.s,
    };
    set_check(&joined, d, plan, beta_offsets, tol)
}
