//! Sufficient optimality conditions and a brute-force grid oracle.
//!
//! Certificates are verified, never searched for: the caller supplies the
//! candidate point and, for constrained problems, the multipliers.

use crate::defcheck::{check_general_s_convex, check_sub_b_s_convex, CheckError, ModifierMap};
use crate::expr::{EvalError, Expr};
use crate::gradient::{Differentiable, GradientSource};
use crate::gradineq::limit_theta_over_sigma;
use crate::report::{self, CheckConfig, MarginSummary, Sides, Tolerance, Verdict, Witness, SCOPE_NOTE};
use crate::sampling::{midpoint, sample_pairs, BoxDomain, SamplePlan};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

/// Upper bound on the number of points a grid scan may visit.
pub const MAX_GRID_POINTS: usize = 20_000_000;
/// Points per side of the refinement grid around the incumbent.
const REFINE_HALF: usize = 10;
const MAX_REPORTED_MINIMIZERS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("instance is not certified general s-convex on this plan (verdict {0:?})")]
    NotCertified(Verdict),
    #[error("gradient of h is singular at {point:?} and no directional estimate exists")]
    SingularGradient { point: Vec<f64> },
    #[error("limit of theta(mid, sigma)/sigma diverges at midpoint {point:?}")]
    DivergentLimit { point: Vec<f64> },
    #[error("point {point:?} violates constraint {index}: f = {value}")]
    Infeasible { point: Vec<f64>, index: usize, value: f64 },
    #[error("multiplier {index} is negative: {value}")]
    NegativeMultiplier { index: usize, value: f64 },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("grid needs at least 2 points per dimension")]
    BadGrid,
    #[error("grid of {0} points exceeds the scan limit")]
    GridTooLarge(u128),
    #[error("no evaluable feasible grid point")]
    NoFeasiblePoint,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Certification {
    Certified,
    /// The sufficient condition failed somewhere; this is not a proof that
    /// the candidate is suboptimal.
    NotCertified,
    Inconclusive,
}

impl From<Verdict> for Certification {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::CertifiedOnSamples => Certification::Certified,
            Verdict::Refuted => Certification::NotCertified,
            Verdict::Inconclusive => Certification::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedProblem {
    pub h: Expr,
    pub theta: ModifierMap,
    pub s: f64,
    pub domain: BoxDomain,
}

impl UnconstrainedProblem {
    fn plan(&self, plan: &SamplePlan) -> SamplePlan {
        let mut p = plan.clone();
        p.s = self.s;
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Feasible where `f <= 0`.
    pub f: Expr,
    pub theta: ModifierMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    pub h: Expr,
    pub theta: ModifierMap,
    pub s: f64,
    pub constraints: Vec<Constraint>,
    pub domain: BoxDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KKTCertificate {
    pub b_star: Vec<f64>,
    pub multipliers: Vec<f64>,
}

/// Distinct sampled points of the plan, in lexicographic order.
fn sample_points(d: &BoxDomain, plan: &SamplePlan, extra: &[f64]) -> Result<Vec<Vec<f64>>, CheckError> {
    let pairs = sample_pairs(d, plan)?;
    let mut pts: Vec<Vec<f64>> = pairs.into_iter().flat_map(|(a, b)| [a, b]).collect();
    pts.push(extra.to_vec());
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    pts.dedup();
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub analysis: &'static str,
    pub certification: Certification,
    pub scope: &'static str,
    pub candidate: Vec<f64>,
    pub h_candidate: f64,
    pub instance_check: Verdict,
    pub gradient_source: GradientSource,
    pub singular_gradient_fallback: bool,
    pub inequality: MarginSummary,
    pub n_candidates: usize,
    pub config: CheckConfig,
    pub notes: Vec<String>,
}

/// Checks the first-order sufficient condition for `b2` to minimize `h`:
///
/// ```text
/// grad h(b2)^T (b1 - b2) - h(b2)/sigma - theta(b2, sigma)/sigma - L(b1, b2)
///     >= sigma^(s-1) [theta(b1, sigma) - theta(b2, sigma)]
/// ```
///
/// over every sampled `b1` and positive grid sigma. Where the gradient at
/// `b2` is singular, `grad h(b2)^T (b1 - b2)` is replaced by a one-sided
/// difference quotient along `b1 - b2`.
pub fn certify_unconstrained(
    p: &UnconstrainedProblem,
    b2: &[f64],
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<OptimalityReport, OptimError> {
    let plan = p.plan(plan);
    plan.validate().map_err(CheckError::from)?;
    let d = &p.domain;
    if b2.len() != d.dim() {
        return Err(OptimError::LengthMismatch {
            what: "candidate",
            expected: d.dim(),
            got: b2.len(),
        });
    }
    if !d.contains(b2) {
        return Err(OptimError::OutsideDomain(b2.to_vec()));
    }
    let instance_check = check_general_s_convex(&p.h, &p.theta, d, &plan, tol)?.verdict;
    if instance_check != Verdict::CertifiedOnSamples {
        return Err(OptimError::NotCertified(instance_check));
    }
    let h2 = p.h.eval_at(b2)?;
    let df = Differentiable::new(&p.h, d.dim());
    let points = sample_points(d, &plan, b2)?;

    let per_point: Vec<Result<(f64, GradientSource, f64), OptimError>> = points
        .par_iter()
        .map(|b1| {
            let (dt, src) = df
                .directional_term(b2, b1)
                .map_err(|_| OptimError::SingularGradient { point: b2.to_vec() })?;
            let mid = midpoint(b1, b2);
            let lim = limit_theta_over_sigma(&p.theta, &mid)?
                .finite()
                .ok_or(OptimError::DivergentLimit { point: mid })?;
            Ok((dt, src, lim))
        })
        .collect();
    let per_point = per_point.into_iter().collect::<Result<Vec<_>, _>>()?;
    let gradient_source = per_point
        .iter()
        .map(|x| x.1)
        .max()
        .unwrap_or(GradientSource::Symbolic);

    let sigmas = plan.positive_sigmas();
    let samples: Vec<(usize, Witness)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, b1)| sigmas.iter().map(move |&sg| (i, Witness::new(b1, b2, sg))))
        .collect();
    let s = p.s;
    let (_, sm) = report::evaluate_with(samples, tol, |i, w| {
        let (dt, _, lim) = per_point[*i];
        let t1 = p.theta.eval_one(&w.b1, w.sigma)?;
        let t2 = p.theta.eval_one(b2, w.sigma)?;
        Ok(Sides {
            lhs: w.sigma.powf(s - 1.0) * (t1 - t2),
            rhs: dt - h2 / w.sigma - t2 / w.sigma - lim,
            strict: false,
        })
    });
    let inequality = sm.into_margins();
    let singular = gradient_source == GradientSource::SingularGradientFallback;
    let mut notes = vec![
        "sigma restricted to the positive part of the grid".to_string(),
        "margin = [grad term - h(b2)/sigma - theta(b2)/sigma - L] - sigma^(s-1)[theta(b1) - theta(b2)]".to_string(),
    ];
    if singular {
        notes.push("gradient singular at the candidate; one-sided difference quotient used".into());
    }
    let mut cfg_plan = plan.clone();
    cfg_plan.sigma_grid = sigmas;
    Ok(OptimalityReport {
        analysis: "unconstrained_optimality",
        certification: inequality.verdict.into(),
        scope: SCOPE_NOTE,
        candidate: b2.to_vec(),
        h_candidate: h2,
        instance_check,
        gradient_source,
        singular_gradient_fallback: singular,
        n_candidates: points.len(),
        inequality,
        config: CheckConfig::new(d, &cfg_plan, tol, false, points.len()),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub b_min: Vec<f64>,
    pub value: f64,
    pub grid_n: usize,
    /// Grid spacing per dimension before refinement.
    pub spacing: Vec<f64>,
    pub n_points: usize,
    pub n_domain_errors: usize,
    pub n_infeasible: usize,
    /// Whether the refinement pass improved on the coarse incumbent.
    pub refined: bool,
}

struct Grid {
    lo: Vec<f64>,
    step: Vec<f64>,
    n: Vec<usize>,
    total: usize,
}

impl Grid {
    fn new(lo: Vec<f64>, hi: &[f64], n: usize) -> Result<Self, OptimError> {
        let total = (n as u128).checked_pow(lo.len() as u32).unwrap_or(u128::MAX);
        if total > MAX_GRID_POINTS as u128 {
            return Err(OptimError::GridTooLarge(total));
        }
        let step = lo.iter().zip(hi).map(|(l, h)| (h - l) / (n - 1) as f64).collect();
        Ok(Grid {
            n: vec![n; lo.len()],
            lo,
            step,
            total: total as usize,
        })
    }

    fn point(&self, mut idx: usize, hi: &[f64]) -> Vec<f64> {
        (0..self.lo.len())
            .map(|j| {
                let k = idx % self.n[j];
                idx /= self.n[j];
                // the last index lands exactly on the upper bound
                if k == self.n[j] - 1 {
                    hi[j]
                } else {
                    self.lo[j] + k as f64 * self.step[j]
                }
            })
            .collect()
    }
}

#[derive(Default)]
struct ScanOutcome {
    best: Option<(f64, usize)>,
    errors: usize,
    infeasible: usize,
}

/// Lowest value, ties to the lowest index.
fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
        Ordering::Greater => b,
        _ => a,
    }
}

fn scan(grid: &Grid, hi: &[f64], h: &Expr, feasible: &(dyn Fn(&[f64]) -> Option<bool> + Sync)) -> ScanOutcome {
    (0..grid.total)
        .into_par_iter()
        .map(|i| {
            let b = grid.point(i, hi);
            let mut out = ScanOutcome::default();
            match feasible(&b) {
                None => out.errors = 1,
                Some(false) => out.infeasible = 1,
                Some(true) => match h.eval_at(&b) {
                    Ok(v) => out.best = Some((v, i)),
                    Err(_) => out.errors = 1,
                },
            }
            out
        })
        .reduce(ScanOutcome::default, |a, b| ScanOutcome {
            best: match (a.best, b.best) {
                (Some(x), Some(y)) => Some(better(x, y)),
                (x, y) => x.or(y),
            },
            errors: a.errors + b.errors,
            infeasible: a.infeasible + b.infeasible,
        })
}

fn oracle(
    h: &Expr,
    d: &BoxDomain,
    grid_n: usize,
    feasible: &(dyn Fn(&[f64]) -> Option<bool> + Sync),
) -> Result<OracleResult, OptimError> {
    d.validate().map_err(CheckError::from)?;
    if grid_n < 2 {
        return Err(OptimError::BadGrid);
    }
    let (lo, hi) = (d.sample_lo(), d.sample_hi());
    let grid = Grid::new(lo.clone(), &hi, grid_n)?;
    let coarse = scan(&grid, &hi, h, feasible);
    let (value, idx) = coarse.best.ok_or(OptimError::NoFeasiblePoint)?;
    let incumbent = grid.point(idx, &hi);

    // local grid 10x finer spanning one coarse step either side, clipped to the box
    let fine_lo: Vec<f64> = incumbent
        .iter()
        .zip(&grid.step)
        .zip(&lo)
        .map(|((c, st), l)| (c - st).max(*l))
        .collect();
    let fine_hi: Vec<f64> = incumbent
        .iter()
        .zip(&grid.step)
        .zip(&hi)
        .map(|((c, st), u)| (c + st).min(*u))
        .collect();
    let fine = Grid::new(fine_lo, &fine_hi, 2 * REFINE_HALF + 1)?;
    let refine = scan(&fine, &fine_hi, h, feasible);
    let (b_min, value, refined) = match refine.best {
        Some((v, i)) if v < value => (fine.point(i, &fine_hi), v, true),
        _ => (incumbent, value, false),
    };
    Ok(OracleResult {
        b_min,
        value,
        grid_n,
        spacing: grid.step.clone(),
        n_points: grid.total + fine.total,
        n_domain_errors: coarse.errors + refine.errors,
        n_infeasible: coarse.infeasible + refine.infeasible,
        refined,
    })
}

/// Minimum of `h` over a uniform grid of `grid_n` points per dimension,
/// followed by one 10x finer local pass around the incumbent.
pub fn brute_force_min(h: &Expr, d: &BoxDomain, grid_n: usize) -> Result<OracleResult, OptimError> {
    oracle(h, d, grid_n, &|_| Some(true))
}

/// As [`brute_force_min`], restricted to grid points with every
/// `constraints[i] <= tol`.
pub fn brute_force_min_feasible(
    h: &Expr,
    constraints: &[Expr],
    d: &BoxDomain,
    grid_n: usize,
    tol: f64,
) -> Result<OracleResult, OptimError> {
    let feasible = |b: &[f64]| -> Option<bool> {
        let mut ok = true;
        for f in constraints {
            ok &= f.eval_at(b).ok()? <= tol;
        }
        Some(ok)
    };
    oracle(h, d, grid_n, &feasible)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KKTReport {
    pub analysis: &'static str,
    pub certification: Certification,
    pub scope: &'static str,
    pub certificate: KKTCertificate,
    pub stationarity_residual: f64,
    pub stationarity_ok: bool,
    pub complementarity_residuals: Vec<f64>,
    pub complementarity_ok: bool,
    /// The sampled inequality with `phi` read as `h` and `t1` read as `b1`.
    pub inequality: MarginSummary,
    /// Same inequality with each multiplier paired with its own constraint map's limit.
    pub inequality_alternate: MarginSummary,
    pub objective_check: Verdict,
    pub constraint_checks: Vec<Verdict>,
    pub gradient_sources: Vec<GradientSource>,
    pub config: CheckConfig,
    pub notes: Vec<String>,
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Verifies a supplied KKT point: stationarity, complementarity and the
/// sampled inequality
///
/// ```text
/// h(b*)/sigma + theta(b*, sigma)/sigma + L(b1, b*)
///     <= -sum_i v_i L(b1, b*) - 2 sigma^(s-1) [theta(b1, sigma) - theta(b*, sigma)]
/// ```
///
/// Certified only when all three parts pass.
pub fn certify_kkt(
    p: &ConstrainedProblem,
    cert: &KKTCertificate,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<KKTReport, OptimError> {
    let mut plan = plan.clone();
    plan.s = p.s;
    plan.validate().map_err(CheckError::from)?;
    let d = &p.domain;
    let m = d.dim();
    let bs = &cert.b_star;
    if bs.len() != m {
        return Err(OptimError::LengthMismatch {
            what: "b_star",
            expected: m,
            got: bs.len(),
        });
    }
    if cert.multipliers.len() != p.constraints.len() {
        return Err(OptimError::LengthMismatch {
            what: "multipliers",
            expected: p.constraints.len(),
            got: cert.multipliers.len(),
        });
    }
    if let Some((index, &value)) = cert.multipliers.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(OptimError::NegativeMultiplier { index, value });
    }
    let fvals = p
        .constraints
        .iter()
        .map(|c| c.f.eval_at(bs))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((index, &value)) = fvals.iter().enumerate().find(|(_, f)| **f > tol.abs) {
        return Err(OptimError::Infeasible {
            point: bs.clone(),
            index,
            value,
        });
    }

    let singular = |_| OptimError::SingularGradient { point: bs.clone() };
    let (mut grad, src) = Differentiable::new(&p.h, m).grad(bs).map_err(singular)?;
    let mut gradient_sources = vec![src];
    for (c, v) in p.constraints.iter().zip(&cert.multipliers) {
        let (g, src) = Differentiable::new(&c.f, m).grad(bs).map_err(singular)?;
        gradient_sources.push(src);
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += v * gi;
        }
    }
    let stationarity_residual = euclid(&grad);
    let complementarity_residuals: Vec<f64> = cert
        .multipliers
        .iter()
        .zip(&fvals)
        .map(|(v, f)| (v * f).abs())
        .collect();
    let stationarity_ok = stationarity_residual <= tol.abs;
    let complementarity_ok = complementarity_residuals.iter().all(|r| *r <= tol.abs);

    let objective_check = check_general_s_convex(&p.h, &p.theta, d, &plan, tol)?.verdict;
    let constraint_checks = p
        .constraints
        .iter()
        .map(|c| check_general_s_convex(&c.f, &c.theta, d, &plan, tol).map(|r| r.verdict))
        .collect::<Result<Vec<_>, _>>()?;

    let h_star = p.h.eval_at(bs)?;
    let points = sample_points(d, &plan, bs)?;
    let limits: Vec<(f64, f64)> = points
        .par_iter()
        .map(|b1| {
            let mid = midpoint(b1, bs);
            let div = || OptimError::DivergentLimit { point: mid.clone() };
            let own = limit_theta_over_sigma(&p.theta, &mid)?.finite().ok_or_else(div)?;
            let mut weighted = 0.0;
            for (c, v) in p.constraints.iter().zip(&cert.multipliers) {
                weighted += v * limit_theta_over_sigma(&c.theta, &mid)?.finite().ok_or_else(div)?;
            }
            Ok((own, weighted))
        })
        .collect::<Result<Vec<_>, OptimError>>()?;
    let v_sum: f64 = cert.multipliers.iter().sum();

    let sigmas = plan.positive_sigmas();
    let samples = || -> Vec<(usize, Witness)> {
        points
            .iter()
            .enumerate()
            .flat_map(|(i, b1)| sigmas.iter().map(move |&sg| (i, Witness::new(b1, bs, sg))))
            .collect()
    };
    let s = p.s;
    let side = |i: &usize, w: &Witness, alternate: bool| -> Result<Sides, EvalError> {
        let (own, weighted) = limits[*i];
        let t1 = p.theta.eval_one(&w.b1, w.sigma)?;
        let ts = p.theta.eval_one(bs, w.sigma)?;
        let penalty = if alternate { weighted } else { v_sum * own };
        Ok(Sides {
            lhs: h_star / w.sigma + ts / w.sigma + own,
            rhs: -penalty - 2.0 * w.sigma.powf(s - 1.0) * (t1 - ts),
            strict: false,
        })
    };
    let (_, lit) = report::evaluate_with(samples(), tol, |i, w| side(i, w, false));
    let (_, alt) = report::evaluate_with(samples(), tol, |i, w| side(i, w, true));
    let inequality = lit.into_margins();
    let inequality_alternate = alt.into_margins();

    let certification = if !stationarity_ok || !complementarity_ok {
        Certification::NotCertified
    } else {
        inequality.verdict.into()
    };
    let mut notes = vec![
        "phi(b*) read as h(b*) and t1 read as b1".to_string(),
        "sigma restricted to the positive part of the grid".to_string(),
    ];
    if objective_check != Verdict::CertifiedOnSamples
        || constraint_checks.iter().any(|v| *v != Verdict::CertifiedOnSamples)
    {
        notes.push("objective or a constraint is not certified general s-convex on this plan".into());
    }
    let mut cfg_plan = plan.clone();
    cfg_plan.sigma_grid = sigmas;
    Ok(KKTReport {
        analysis: "kkt_sufficiency",
        certification,
        scope: SCOPE_NOTE,
        certificate: cert.clone(),
        stationarity_residual,
        stationarity_ok,
        complementarity_residuals,
        complementarity_ok,
        inequality,
        inequality_alternate,
        objective_check,
        constraint_checks,
        gradient_sources,
        config: CheckConfig::new(d, &cfg_plan, tol, false, points.len()),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimizer {
    pub b: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub analysis: &'static str,
    pub candidate: Vec<f64>,
    pub h_candidate: f64,
    /// Strict general s-convexity on the plan, checked through the lifted two-point map.
    pub strict_check: Verdict,
    pub unique_on_grid: bool,
    pub n_other_minimizers: usize,
    pub other_minimizers: Vec<Minimizer>,
    pub grid_n: usize,
    pub exclusion_radius: Vec<f64>,
    pub n_domain_errors: usize,
}

/// Scans a grid of `perturbations` points per dimension for points away
/// from `b2` whose value is within tolerance of `h(b2)`.
///
/// Points within 1.5 grid spacings of `b2` in every coordinate are ignored.
pub fn check_uniqueness_note(
    p: &UnconstrainedProblem,
    b2: &[f64],
    perturbations: usize,
    plan: &SamplePlan,
    tol: &Tolerance,
) -> Result<UniquenessReport, OptimError> {
    let d = &p.domain;
    d.validate().map_err(CheckError::from)?;
    if b2.len() != d.dim() {
        return Err(OptimError::LengthMismatch {
            what: "candidate",
            expected: d.dim(),
            got: b2.len(),
        });
    }
    let n = perturbations.max(2);
    let plan = p.plan(plan);
    let lifted = p.theta.lift_to_two_point(d.dim(), p.s);
    let strict_check = check_sub_b_s_convex(&p.h, &lifted, d, &plan, tol, true)?.verdict;

    let h2 = p.h.eval_at(b2)?;
    let bound = h2 + tol.slack(h2);
    let (lo, hi) = (d.sample_lo(), d.sample_hi());
    let grid = Grid::new(lo, &hi, n)?;
    let radius: Vec<f64> = grid.step.iter().map(|st| 1.5 * st).collect();
    let hits: Vec<Result<Option<Minimizer>, ()>> = (0..grid.total)
        .into_par_iter()
        .map(|i| {
            let b = grid.point(i, &hi);
            let far = b.iter().zip(b2).zip(&radius).any(|((x, c), r)| (x - c).abs() > *r);
            if !far {
                return Ok(None);
            }
            match p.h.eval_at(&b) {
                Ok(v) if v <= bound => Ok(Some(Minimizer { b, value: v })),
                Ok(_) => Ok(None),
                Err(_) => Err(()),
            }
        })
        .collect();
    let n_domain_errors = hits.iter().filter(|h| h.is_err()).count();
    let found: Vec<Minimizer> = hits.into_iter().filter_map(|h| h.ok().flatten()).collect();
    Ok(UniquenessReport {
        analysis: "uniqueness_scan",
        candidate: b2.to_vec(),
        h_candidate: h2,
        strict_check,
        unique_on_grid: found.is_empty(),
        n_other_minimizers: found.len(),
        other_minimizers: found.into_iter().take(MAX_REPORTED_MINIMIZERS).collect(),
        grid_n: n,
        exclusion_radius: radius,
        n_domain_errors,
    })
}
