//! Verdicts, witnesses and the sample-reduction shared by every checker.

use crate::expr::EvalError;
use crate::sampling::{BoxDomain, SamplePlan};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;

/// Wording attached to every sample-based report.
pub const SCOPE_NOTE: &str = "inequality evaluated at sampled points only; not a proof";

/// Recorded domain errors are capped at this many examples per report.
const MAX_ERROR_EXAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedOnSamples,
    Refuted,
    Inconclusive,
}

/// Slack `abs + rel * |rhs|` allowed on a non-strict inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub fn uniform(t: f64) -> Self {
        Tolerance { abs: t, rel: t }
    }

    pub fn slack(&self, rhs: f64) -> f64 {
        self.abs + self.rel * rhs.abs()
    }
}

/// Sample coordinates: the two base points, the mixing parameter and, for
/// set-level checks, the heights attached to the base points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Witness {
    pub fn new(b1: &[f64], b2: &[f64], sigma: f64) -> Self {
        Witness {
            b1: b1.to_vec(),
            b2: b2.to_vec(),
            sigma,
            alpha: None,
            beta: None,
        }
    }

    fn key(&self) -> impl Iterator<Item = f64> + '_ {
        self.b1
            .iter()
            .chain(&self.b2)
            .copied()
            .chain([self.sigma, self.alpha.unwrap_or(0.0), self.beta.unwrap_or(0.0)])
    }

    /// Lexicographic total order, used to break margin ties.
    pub fn lex_cmp(&self, other: &Witness) -> Ordering {
        self.key()
            .zip(other.key())
            .map(|(a, b)| a.total_cmp(&b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Both sides of an inequality `lhs <= rhs` (or `<` when `strict`) at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub witness: Witness,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
}

impl SampleRecord {
    pub fn from_sides(witness: Witness, sides: Sides, tol: &Tolerance) -> Self {
        let margin = sides.rhs - sides.lhs;
        let violated = margin < -tol.slack(sides.rhs) || (sides.strict && margin <= 0.0);
        SampleRecord {
            witness,
            lhs: sides.lhs,
            rhs: sides.rhs,
            margin,
            violated,
        }
    }

    /// Violations first, then smaller margin, then lexicographic witness.
    fn worse_than(&self, other: &SampleRecord) -> bool {
        match other.violated.cmp(&self.violated) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => match self.margin.total_cmp(&other.margin) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.witness.lex_cmp(&other.witness).is_lt(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainErrorRecord {
    pub witness: Witness,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub s: f64,
    pub tolerance: Tolerance,
    pub strict: bool,
    pub n_pairs: usize,
    pub seed: u64,
    pub sigma_grid: Vec<f64>,
    pub domain: BoxDomain,
    pub truncated: bool,
}

impl CheckConfig {
    pub fn new(d: &BoxDomain, plan: &SamplePlan, tol: &Tolerance, strict: bool, n_pairs: usize) -> Self {
        CheckConfig {
            s: plan.s,
            tolerance: *tol,
            strict,
            n_pairs,
            seed: plan.seed,
            sigma_grid: plan.sigma_grid.clone(),
            domain: d.clone(),
            truncated: d.is_truncated(),
        }
    }
}

/// Outcome of one sampled inequality check.
///
/// `worst_margin` and `witness` refer to the same sample: a violating one if
/// any exists, otherwise the one with the smallest margin. `min_margin` is the
/// smallest margin over all evaluated samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub inequality: String,
    pub verdict: Verdict,
    pub scope: &'static str,
    pub worst_margin: Option<f64>,
    pub min_margin: Option<f64>,
    pub witness: Option<Witness>,
    pub witness_lhs: Option<f64>,
    pub witness_rhs: Option<f64>,
    pub n_evaluated: usize,
    pub n_domain_errors: usize,
    pub n_violations: usize,
    pub domain_errors: Vec<DomainErrorRecord>,
    pub config: CheckConfig,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedOnSamples
    }
}

/// Evaluates `sides` at every sample in parallel and reduces the outcomes.
///
/// The reduction is a pure minimum under a total order, so the report does
/// not depend on evaluation order or worker count.
pub(crate) fn evaluate<F>(
    samples: Vec<Witness>,
    tol: &Tolerance,
    sides: F,
) -> (Vec<Result<SampleRecord, DomainErrorRecord>>, Summary)
where
    F: Fn(&Witness) -> Result<Sides, EvalError> + Sync,
{
    let items = samples.into_iter().map(|w| ((), w)).collect();
    evaluate_with(items, tol, |_, w| sides(w))
}

/// Like [`evaluate`], with a per-sample context value passed to `sides`.
pub(crate) fn evaluate_with<T, F>(
    samples: Vec<(T, Witness)>,
    tol: &Tolerance,
    sides: F,
) -> (Vec<Result<SampleRecord, DomainErrorRecord>>, Summary)
where
    T: Send,
    F: Fn(&T, &Witness) -> Result<Sides, EvalError> + Sync,
{
    let records: Vec<Result<SampleRecord, DomainErrorRecord>> = samples
        .into_par_iter()
        .map(|(ctx, w)| match sides(&ctx, &w) {
            Ok(s) => Ok(SampleRecord::from_sides(w, s, tol)),
            Err(e) => Err(DomainErrorRecord {
                witness: w,
                message: e.to_string(),
            }),
        })
        .collect();
    let summary = Summary::of(&records);
    (records, summary)
}

/// Reduced outcome of one inequality, without the surrounding configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginSummary {
    pub verdict: Verdict,
    pub worst_margin: Option<f64>,
    pub min_margin: Option<f64>,
    pub witness: Option<Witness>,
    pub witness_lhs: Option<f64>,
    pub witness_rhs: Option<f64>,
    pub n_evaluated: usize,
    pub n_domain_errors: usize,
    pub n_violations: usize,
    pub domain_errors: Vec<DomainErrorRecord>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Summary {
    pub worst: Option<SampleRecord>,
    pub min_margin: Option<f64>,
    pub n_evaluated: usize,
    pub n_domain_errors: usize,
    pub n_violations: usize,
    pub errors: Vec<DomainErrorRecord>,
}

impl Summary {
    pub fn of(records: &[Result<SampleRecord, DomainErrorRecord>]) -> Self {
        let mut out = Summary::default();
        for r in records {
            match r {
                Ok(rec) => {
                    out.n_evaluated += 1;
                    if rec.violated {
                        out.n_violations += 1;
                    }
                    out.min_margin = Some(out.min_margin.map_or(rec.margin, |m| m.min(rec.margin)));
                    if out.worst.as_ref().map_or(true, |w| rec.worse_than(w)) {
                        out.worst = Some(rec.clone());
                    }
                }
                Err(e) => {
                    out.n_domain_errors += 1;
                    if out.errors.len() < MAX_ERROR_EXAMPLES {
                        out.errors.push(e.clone());
                    }
                }
            }
        }
        out
    }

    pub fn verdict(&self) -> Verdict {
        if self.n_violations > 0 {
            Verdict::Refuted
        } else if self.n_domain_errors > 0 || self.n_evaluated == 0 {
            Verdict::Inconclusive
        } else {
            Verdict::CertifiedOnSamples
        }
    }

    pub fn into_margins(self) -> MarginSummary {
        MarginSummary {
            verdict: self.verdict(),
            worst_margin: self.worst.as_ref().map(|w| w.margin),
            min_margin: self.min_margin,
            witness_lhs: self.worst.as_ref().map(|w| w.lhs),
            witness_rhs: self.worst.as_ref().map(|w| w.rhs),
            witness: self.worst.map(|w| w.witness),
            n_evaluated: self.n_evaluated,
            n_domain_errors: self.n_domain_errors,
            n_violations: self.n_violations,
            domain_errors: self.errors,
        }
    }

    pub fn into_report(self, inequality: &str, config: CheckConfig, notes: Vec<String>) -> CheckReport {
        let verdict = self.verdict();
        CheckReport {
            inequality: inequality.to_string(),
            verdict,
            scope: SCOPE_NOTE,
            worst_margin: self.worst.as_ref().map(|w| w.margin),
            min_margin: self.min_margin,
            witness_lhs: self.worst.as_ref().map(|w| w.lhs),
            witness_rhs: self.worst.as_ref().map(|w| w.rhs),
            witness: self.worst.map(|w| w.witness),
            n_evaluated: self.n_evaluated,
            n_domain_errors: self.n_domain_errors,
            n_violations: self.n_violations,
            domain_errors: self.errors,
            config,
            notes,
        }
    }
}
