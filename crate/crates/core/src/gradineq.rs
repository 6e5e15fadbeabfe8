//! First-order inequalities for differentiable general s-convex functions.
//!
//! Every inequality here involves `L = lim_{sigma -> 0+} theta(mid, sigma) / sigma`
//! at the midpoint of a pair, estimated on the dyadic sequence `sigma_k = 2^-k`.
//! Samples use only the positive part of the sigma grid.

use crate::defcheck::{check_general_s_convex, CheckError, MapKind, ModifierMap};
use crate::expr::{EvalError, Expr};
use crate::gradient::{relative_gap, Differentiable, GradientSource};
use crate::report::{self, CheckConfig, MarginSummary, Sides, Tolerance, Verdict, Witness, SCOPE_NOTE};
use crate::sampling::{midpoint, sample_pairs, BoxDomain, Pair, SamplePlan};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub const LIMIT_DEPTH: usize = 40;
/// Sequence values beyond this magnitude mark the limit as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;
pub const CAUCHY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue {
    Converged(f64),
    Divergent,
}

impl Serialize for LimitValue {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            LimitValue::Converged(v) => ser.serialize_f64(*v),
            LimitValue::Divergent => ser.serialize_str("DIVERGENT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub value: LimitValue,
    /// `theta(b, 2^-k) / 2^-k` for `k = 1, 2, ...`; stops early on blow-up.
    pub sequence: Vec<f64>,
    /// First `k` from which every successive difference passes the Cauchy test.
    pub converged_at: Option<usize>,
}

impl LimitEstimate {
    pub fn finite(&self) -> Option<f64> {
        match self.value {
            LimitValue::Converged(v) => Some(v),
            LimitValue::Divergent => None,
        }
    }
}

fn close(prev: f64, next: f64) -> bool {
    (next - prev).abs() <= CAUCHY_TOL * next.abs().max(1.0)
}

pub fn limit_theta_over_sigma(theta: &ModifierMap, b: &[f64]) -> Result<LimitEstimate, EvalError> {
    limit_with_depth(theta, b, LIMIT_DEPTH)
}

/// Limit estimate from the first `depth` dyadic sigmas (`depth >= 2`).
pub fn limit_with_depth(theta: &ModifierMap, b: &[f64], depth: usize) -> Result<LimitEstimate, EvalError> {
    let depth = depth.max(2);
    let mut sequence = Vec::with_capacity(depth);
    for k in 1..=depth {
        let sg = 0.5f64.powi(k as i32);
        let v = theta.eval_one(b, sg)? / sg;
        sequence.push(v);
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Ok(LimitEstimate {
                value: LimitValue::Divergent,
                sequence,
                converged_at: None,
            });
        }
    }
    let last = sequence[depth - 1];
    if !close(sequence[depth - 2], last) {
        return Ok(LimitEstimate {
            value: LimitValue::Divergent,
            sequence,
            converged_at: None,
        });
    }
    let mut k = depth;
    while k >= 2 && close(sequence[k - 2], sequence[k - 1]) {
        k -= 1;
    }
    Ok(LimitEstimate {
        value: LimitValue::Converged(last),
        sequence,
        converged_at: Some(k),
    })
}

/// Sign conditions observed over the sampled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypothesisFlags {
    pub h_nonnegative: bool,
    pub h_negative: bool,
    /// `theta(b, sigma) <= 0` at both endpoints and the midpoint for every positive sigma.
    pub theta_nonpositive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    BoundA,
    BoundB,
    NonpositiveMap,
    Difference,
    DifferenceAlternate,
    DifferenceNegative,
}

impl Form {
    fn name(self) -> &'static str {
        match self {
            Form::BoundA => "gradient_bound_a",
            Form::BoundB => "gradient_bound_b",
            Form::NonpositiveMap => "gradient_bound_nonpositive_map",
            Form::Difference => "gradient_difference_bound",
            Form::DifferenceAlternate => "gradient_difference_bound_alternate",
            Form::DifferenceNegative => "gradient_difference_bound_negative",
        }
    }

    fn hypotheses(self) -> &'static str {
        match self {
            Form::BoundA | Form::BoundB | Form::Difference | Form::DifferenceAlternate => "h >= 0",
            Form::NonpositiveMap => "h >= 0 and theta <= 0",
            Form::DifferenceNegative => "h < 0 and theta <= 0",
        }
    }

    fn hypotheses_hold(self, f: &HypothesisFlags) -> bool {
        match self {
            Form::BoundA | Form::BoundB | Form::Difference | Form::DifferenceAlternate => f.h_nonnegative,
            Form::NonpositiveMap => f.h_nonnegative && f.theta_nonpositive,
            Form::DifferenceNegative => f.h_negative && f.theta_nonpositive,
        }
    }

    fn sides(self, s: f64, sg: f64, p: &PairData, t1: f64, t2: f64) -> Sides {
        let w = sg.powf(s - 1.0);
        let l = p.limit;
        let (lhs, rhs) = match self {
            Form::BoundA => (p.d2, w * (p.h1 + p.h2 + t1 + t2) + l),
            Form::BoundB => (p.d2, w * (p.h1 - p.h2 + t1 - t2) + p.h2 / sg + t2 / sg + l),
            Form::NonpositiveMap => (p.d2, w * (p.h1 - p.h2 + t1 - t2) + l),
            Form::Difference => (p.d2 - p.d1, (p.h1 + p.h2 + 2.0 * t2) / sg + 2.0 * l),
            Form::DifferenceAlternate => (p.d2 - p.d1, (p.h1 + p.h2 + t1 + t2) / sg + 2.0 * l),
            Form::DifferenceNegative => (p.d2 - p.d1, 2.0 * l),
        };
        Sides {
            lhs,
            rhs,
            strict: false,
        }
    }
}

/// Result for one inequality over all `(pair, sigma)` samples. Samples whose
/// midpoint limit diverges are counted as domain errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub hypotheses: String,
    pub hypotheses_satisfied: bool,
    #[serde(flatten)]
    pub margins: MarginSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub n_symbolic: usize,
    pub n_central_difference: usize,
    pub n_singular_fallback: usize,
    /// Points where both symbolic and central-difference gradients were compared.
    pub n_compared: usize,
    pub max_relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradIneqReport {
    pub analysis: String,
    /// Verdict over the inequalities whose hypotheses hold on an instance
    /// that itself certifies; `INCONCLUSIVE` when none apply.
    pub verdict: Verdict,
    pub scope: &'static str,
    pub certification: Verdict,
    pub flags: HypothesisFlags,
    pub inequalities: Vec<InequalityResult>,
    pub gradient: GradientCheck,
    pub n_divergent_limits: usize,
    pub config: CheckConfig,
    pub notes: Vec<String>,
}

impl GradIneqReport {
    pub fn inequality(&self, name: &str) -> Option<&InequalityResult> {
        self.inequalities.iter().find(|r| r.name == name)
    }

    pub fn applicable(&self) -> impl Iterator<Item = &InequalityResult> {
        let certified = self.certification == Verdict::CertifiedOnSamples;
        self.inequalities.iter().filter(move |r| certified && r.hypotheses_satisfied)
    }
}

#[derive(Debug, Clone)]
struct PairData {
    h1: f64,
    h2: f64,
    /// `grad h(b2)^T (b1 - b2)`
    d2: f64,
    /// `grad h(b1)^T (b1 - b2)`
    d1: f64,
    limit: f64,
}

struct Prepared {
    pairs: Vec<Pair>,
    data: Vec<Result<PairData, EvalError>>,
    sources: Vec<GradientSource>,
    gaps: Vec<f64>,
    n_divergent: usize,
}

fn divergent(theta: &ModifierMap) -> EvalError {
    EvalError::Domain {
        node: theta.expr.to_string(),
        reason: "limit of theta(mid, sigma)/sigma is divergent".into(),
    }
}

fn symbolic_fd_gaps(df: &Differentiable, b: &[f64]) -> Vec<f64> {
    let Some(sym) = df.symbolic_grad(b) else {
        return Vec::new();
    };
    match crate::expr::central_gradient(&df.f, &crate::expr::EvalPoint::new(b)) {
        Ok(fd) => vec![sym.iter().zip(&fd).map(|(a, n)| relative_gap(*a, *n)).fold(0.0, f64::max)],
        Err(_) => Vec::new(),
    }
}

fn prepare(h: &Expr, theta: &ModifierMap, d: &BoxDomain, plan: &SamplePlan) -> Result<Prepared, CheckError> {
    let m = d.dim();
    let pairs = sample_pairs(d, plan)?;
    let df = Differentiable::new(h, m);
    type PairOut = (Result<PairData, EvalError>, Vec<GradientSource>, Vec<f64>, bool);
    let out: Vec<PairOut> = pairs
        .par_iter()
        .map(|(b1, b2)| {
            let mut sources = Vec::new();
            let mut gaps = symbolic_fd_gaps(&df, b2);
            gaps.extend(symbolic_fd_gaps(&df, b1));
            let mut div = false;
            let data = (|| {
                let h1 = h.eval_at(b1)?;
                let h2 = h.eval_at(b2)?;
                let (d2, s2) = df.directional_term(b2, b1)?;
                let (back, s1) = df.directional_term(b1, b2)?;
                sources.extend([s2, s1]);
                let est = limit_theta_over_sigma(theta, &midpoint(b1, b2))?;
                let limit = match est.finite() {
                    Some(v) => v,
                    None => {
                        div = true;
                        return Err(divergent(theta));
                    }
                };
                Ok(PairData {
                    h1,
                    h2,
                    d2,
                    d1: -back,
                    limit,
                })
            })();
            (data, sources, gaps, div)
        })
        .collect();
    let mut prep = Prepared {
        pairs,
        data: Vec::with_capacity(out.len()),
        sources: Vec::new(),
        gaps: Vec::new(),
        n_divergent: 0,
    };
    for (data, sources, gaps, div) in out {
        prep.data.push(data);
        prep.sources.extend(sources);
        prep.gaps.extend(gaps);
        prep.n_divergent += div as usize;
    }
    Ok(prep)
}

fn flags(h: &Expr, theta: &ModifierMap, pairs: &[Pair], sigmas: &[f64]) -> HypothesisFlags {
    let per_pair: Vec<(bool, bool, bool)> = pairs
        .par_iter()
        .map(|(b1, b2)| {
            let hs: Vec<f64> = [b1, b2].iter().filter_map(|b| h.eval_at(b).ok()).collect();
            let mid = midpoint(b1, b2);
            let theta_ok = sigmas.iter().all(|&sg| {
                [b1.as_slice(), b2.as_slice(), mid.as_slice()]
                    .iter()
                    .filter_map(|b| theta.eval_one(b, sg).ok())
                    .all(|t| t <= 0.0)
            });
            (hs.iter().all(|v| *v >= 0.0), hs.iter().all(|v| *v < 0.0), theta_ok)
        })
        .collect();
    HypothesisFlags {
        h_nonnegative: per_pair.iter().all(|f| f.0),
        h_negative: per_pair.iter().all(|f| f.1),
        theta_nonpositive: per_pair.iter().all(|f| f.2),
    }
}

fn run(
    analysis: &str,
    forms: &[Form],
    h: &Expr,
    theta: &ModifierMap,
    d: &BoxDomain,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<GradIneqReport, CheckError> {
    plan.validate()?;
    d.validate()?;
    if theta.kind != MapKind::OnePoint {
        return Err(CheckError::MapKind {
            what: "theta",
            expected: MapKind::OnePoint,
        });
    }
    for (what, e) in [("h", h), ("theta", &theta.expr)] {
        if e.min_arity() > d.dim() {
            return Err(CheckError::Arity {
                what,
                needed: e.min_arity(),
                dim: d.dim(),
            });
        }
    }
    let certification = check_general_s_convex(h, theta, d, plan, tol)?.verdict;
    let sigmas = plan.positive_sigmas();
    let prep = prepare(h, theta, d, plan)?;
    let flags = flags(h, theta, &prep.pairs, &sigmas);

    let s = plan.s;
    let mut inequalities = Vec::new();
    for &form in forms {
        let samples: Vec<(usize, Witness)> = prep
            .pairs
            .iter()
            .enumerate()
            .flat_map(|(i, (b1, b2))| sigmas.iter().map(move |&sg| (i, Witness::new(b1, b2, sg))))
            .collect();
        let (_, sm) = report::evaluate_with(samples, tol, |i, w| {
            let p = prep.data[*i].as_ref().map_err(Clone::clone)?;
            let t1 = theta.eval_one(&w.b1, w.sigma)?;
            let t2 = theta.eval_one(&w.b2, w.sigma)?;
            Ok(form.sides(s, w.sigma, p, t1, t2))
        });
        inequalities.push(InequalityResult {
            name: form.name().to_string(),
            hypotheses: form.hypotheses().to_string(),
            hypotheses_satisfied: form.hypotheses_hold(&flags),
            margins: sm.into_margins(),
        });
    }

    let count = |src: GradientSource| prep.sources.iter().filter(|s| **s == src).count();
    let gradient = GradientCheck {
        n_symbolic: count(GradientSource::Symbolic),
        n_central_difference: count(GradientSource::CentralDifference),
        n_singular_fallback: count(GradientSource::SingularGradientFallback),
        n_compared: prep.gaps.len(),
        max_relative_gap: prep.gaps.iter().copied().reduce(f64::max),
    };

    let mut notes = vec!["sigma restricted to the positive part of the grid".to_string()];
    if certification != Verdict::CertifiedOnSamples {
        notes.push("instance is not certified general s-convex on this plan; margins are informational".into());
    }
    for r in &inequalities {
        if !r.hypotheses_satisfied {
            notes.push(format!("hypothesis violated for {}: requires {}", r.name, r.hypotheses));
        }
    }
    if gradient.n_singular_fallback > 0 {
        notes.push("one-sided difference quotient used where the gradient is singular".into());
    }
    if forms.contains(&Form::DifferenceAlternate) {
        notes.push("alternate form reads the second theta(b2, sigma)/sigma term as theta(b1, sigma)/sigma".into());
    }

    let verdict = {
        let applicable: Vec<&InequalityResult> = if certification == Verdict::CertifiedOnSamples {
            inequalities.iter().filter(|r| r.hypotheses_satisfied).collect()
        } else {
            Vec::new()
        };
        if applicable.is_empty() {
            Verdict::Inconclusive
        } else if applicable.iter().any(|r| r.margins.verdict == Verdict::Refuted) {
            Verdict::Refuted
        } else if applicable.iter().any(|r| r.margins.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::CertifiedOnSamples
        }
    };

    let mut cfg_plan = plan.clone();
    cfg_plan.sigma_grid = sigmas;
    Ok(GradIneqReport {
        analysis: analysis.to_string(),
        verdict,
        scope: SCOPE_NOTE,
        certification,
        flags,
        inequalities,
        gradient,
        n_divergent_limits: prep.n_divergent,
        config: CheckConfig::new(d, &cfg_plan, tol, false, prep.pairs.len()),
        notes,
    })
}

/// Both gradient bounds for nonnegative `h`.
pub fn verify_theorem4(
    h: &Expr,
    theta: &ModifierMap,
    d: &BoxDomain,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<GradIneqReport, CheckError> {
    run("gradient_bounds", &[Form::BoundA, Form::BoundB], h, theta, d, plan, tol)
}

/// The tighter gradient bound for nonnegative `h` and nonpositive `theta`.
pub fn verify_theorem5(
    h: &Expr,
    theta: &ModifierMap,
    d: &BoxDomain,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<GradIneqReport, CheckError> {
    run("gradient_bound_nonpositive_map", &[Form::NonpositiveMap], h, theta, d, plan, tol)
}

/// Bounds on `(grad h(b2) - grad h(b1))^T (b1 - b2)`.
pub fn verify_corollary2(
    h: &Expr,
    theta: &ModifierMap,
    d: &BoxDomain,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<GradIneqReport, CheckError> {
    run(
        "gradient_difference_bounds",
        &[Form::Difference, Form::DifferenceAlternate, Form::DifferenceNegative],
        h,
        theta,
        d,
        plan,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, parse_with_s};

    fn theta(t: &str) -> ModifierMap {
        ModifierMap::one_point(parse(t, 1).unwrap())
    }

    fn plan(s: f64) -> SamplePlan {
        SamplePlan::new(s, 5).unwrap().with_pairs(96)
    }

    #[test]
    fn limits() {
        let e = limit_theta_over_sigma(&theta("sigma*(2*x1+6)"), &[2.0]).unwrap();
        assert_eq!(e.value, LimitValue::Converged(10.0));
        assert_eq!(e.converged_at, Some(1));
        assert_eq!(e.sequence.len(), LIMIT_DEPTH);

        let e = limit_theta_over_sigma(&theta("sigma^2*x1"), &[7.0]).unwrap();
        assert!(e.finite().unwrap().abs() < 1e-9);
        assert!(e.converged_at.unwrap() > 1);

        let e = limit_theta_over_sigma(&theta("sqrt(sigma)"), &[0.0]).unwrap();
        assert_eq!(e.value, LimitValue::Divergent);
        assert!(e.converged_at.is_none());

        assert!(limit_theta_over_sigma(&theta("log(x1)*sigma"), &[-1.0]).is_err());
        assert_eq!(serde_json::to_string(&LimitValue::Divergent).unwrap(), "\"DIVERGENT\"");
    }

    #[test]
    fn worked_example_bounds() {
        let h = parse_with_s("((x1-1)^2+(x1-1))^s", 1, 0.5).unwrap();
        let d = BoxDomain::interval(1.1, 10.0).unwrap();
        let r = verify_theorem4(&h, &theta("sigma*(2*x1+6)"), &d, &plan(0.5), &Tolerance::default()).unwrap();
        assert_eq!(r.certification, Verdict::CertifiedOnSamples);
        assert!(r.flags.h_nonnegative);
        assert!(!r.flags.theta_nonpositive);
        assert_eq!(r.verdict, Verdict::CertifiedOnSamples);
        for ineq in &r.inequalities {
            assert!(ineq.margins.worst_margin.unwrap() >= -1e-7, "{ineq:?}");
        }
        assert!(r.gradient.max_relative_gap.unwrap() <= 1e-5);
        assert_eq!(r.gradient.n_singular_fallback, 0);
    }

    #[test]
    fn square_with_zero_map() {
        let h = parse("x1^2", 1).unwrap();
        let d = BoxDomain::interval(-5.0, 5.0).unwrap();
        let tol = Tolerance::default();
        let r4 = verify_theorem4(&h, &ModifierMap::zero(), &d, &plan(1.0), &tol).unwrap();
        assert_eq!(r4.verdict, Verdict::CertifiedOnSamples);
        let r5 = verify_theorem5(&h, &ModifierMap::zero(), &d, &plan(1.0), &tol).unwrap();
        assert!(r5.flags.theta_nonpositive);
        assert_eq!(r5.verdict, Verdict::CertifiedOnSamples);

        let c = verify_corollary2(&h, &ModifierMap::zero(), &d, &plan(1.0), &tol).unwrap();
        let lit = c.inequality("gradient_difference_bound").unwrap();
        assert!(lit.hypotheses_satisfied);
        assert_eq!(lit.margins.verdict, Verdict::CertifiedOnSamples);
        let neg = c.inequality("gradient_difference_bound_negative").unwrap();
        assert!(!neg.hypotheses_satisfied);
        assert_eq!(c.verdict, Verdict::CertifiedOnSamples);
    }

    #[test]
    fn sigma_one_margin_of_second_bound() {
        // at sigma = 1 with s = 1 the second bound is h(b1) - grad h(b2)(b1 - b2)
        let h = parse("x1^2", 1).unwrap();
        let f = Form::BoundB;
        for (b1, b2) in [(3.0, -1.0), (-2.0, 4.0), (0.5, 0.5)] {
            let p = PairData {
                h1: b1 * b1,
                h2: b2 * b2,
                d2: 2.0 * b2 * (b1 - b2),
                d1: 2.0 * b1 * (b1 - b2),
                limit: 0.0,
            };
            let sd = f.sides(1.0, 1.0, &p, 0.0, 0.0);
            let want = h.eval_at(&[b1]).unwrap() - 2.0 * b2 * (b1 - b2);
            assert!((sd.rhs - sd.lhs - want).abs() < 1e-12);
            assert!(want >= 0.0);
        }
    }

    #[test]
    fn positive_map_sets_flag() {
        let h = parse("x1^2", 1).unwrap();
        let d = BoxDomain::interval(-3.0, 3.0).unwrap();
        let r = verify_theorem5(&h, &theta("sigma"), &d, &plan(1.0), &Tolerance::default()).unwrap();
        assert!(!r.flags.theta_nonpositive);
        assert!(!r.inequalities[0].hypotheses_satisfied);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.notes.iter().any(|n| n.contains("hypothesis violated")));
    }

    #[test]
    fn negative_function_gating() {
        let h = parse("-1 - x1^2", 1).unwrap();
        let d = BoxDomain::interval(-1.0, 1.0).unwrap();
        let r = verify_corollary2(&h, &ModifierMap::zero(), &d, &plan(1.0), &Tolerance::default()).unwrap();
        assert!(r.flags.h_negative && !r.flags.h_nonnegative);
        assert_eq!(r.certification, Verdict::Refuted);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.inequality("gradient_difference_bound_negative").unwrap().hypotheses_satisfied);
    }

    #[test]
    fn divergent_limit_is_inconclusive() {
        let h = parse("x1^2", 1).unwrap();
        let d = BoxDomain::interval(-1.0, 1.0).unwrap();
        let r = verify_theorem4(&h, &theta("sqrt(sigma)"), &d, &plan(1.0), &Tolerance::default()).unwrap();
        assert_eq!(r.n_divergent_limits, 96);
        assert!(r.inequalities.iter().all(|i| i.margins.verdict == Verdict::Inconclusive && i.margins.n_evaluated == 0));
    }
}
