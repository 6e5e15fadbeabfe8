//! Box domains and deterministic sample plans.
//!
//! Pairs `(b1, b2)` are drawn from a Cranley-Patterson rotated Kronecker
//! sequence in `2m` dimensions (additive recurrence on the generalized golden
//! ratio), after a fixed set of structural pairs: the center paired with
//! itself and every corner paired with its opposite corner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_TRUNCATION: f64 = 10.0;
pub const DEFAULT_PAIRS: usize = 512;
/// Boxes of higher dimension only contribute the `lo`/`hi` corners.
const MAX_CORNER_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("empty domain: lo[{index}] = {lo} > hi[{index}] = {hi}")]
    EmptyDomain { index: usize, lo: f64, hi: f64 },
    #[error("invalid domain: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("n_pairs must be at least 1")]
    NoPairs,
    #[error("s = {0} is outside (0, 1]")]
    BadS(f64),
    #[error("sigma grid must be sorted, inside [0, 1] and contain both 0 and 1")]
    BadSigmaGrid,
}

pub(crate) fn serialize_reals<S: Serializer>(v: &[f64], ser: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else if x.is_nan() {
            seq.serialize_element("nan")?;
        } else if *x > 0.0 {
            seq.serialize_element("inf")?;
        } else {
            seq.serialize_element("-inf")?;
        }
    }
    seq.end()
}

/// Axis-aligned box `[lo, hi]`; `hi` entries may be `+inf` and `lo` entries
/// `-inf`, in which case sampling uses `±truncation_bound` instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    #[serde(serialize_with = "serialize_reals")]
    pub lo: Vec<f64>,
    #[serde(serialize_with = "serialize_reals")]
    pub hi: Vec<f64>,
    pub truncation_bound: f64,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DomainError> {
        Self::with_truncation(lo, hi, DEFAULT_TRUNCATION)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, DomainError> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn with_truncation(
        lo: Vec<f64>,
        hi: Vec<f64>,
        truncation_bound: f64,
    ) -> Result<Self, DomainError> {
        let d = BoxDomain {
            lo,
            hi,
            truncation_bound,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.lo.len() != self.hi.len() {
            return Err(DomainError::Invalid(format!(
                "lo has {} entries but hi has {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self.lo.is_empty() {
            return Err(DomainError::Invalid("dimension must be at least 1".into()));
        }
        if !(self.truncation_bound.is_finite() && self.truncation_bound > 0.0) {
            return Err(DomainError::Invalid(
                "truncation_bound must be finite and positive".into(),
            ));
        }
        for (i, (&lo, &hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(DomainError::Invalid(format!("bad bounds [{lo}, {hi}] at {i}")));
            }
            if lo > hi {
                return Err(DomainError::EmptyDomain { index: i, lo, hi });
            }
            if hi == f64::INFINITY && lo.is_finite() && self.truncation_bound <= lo {
                return Err(DomainError::Invalid(format!(
                    "truncation_bound {} does not exceed lo[{i}] = {lo}",
                    self.truncation_bound
                )));
            }
            if lo == f64::NEG_INFINITY && hi.is_finite() && -self.truncation_bound >= hi {
                return Err(DomainError::Invalid(format!(
                    "-truncation_bound {} is not below hi[{i}] = {hi}",
                    -self.truncation_bound
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_truncated(&self) -> bool {
        self.lo.iter().chain(&self.hi).any(|v| v.is_infinite())
    }

    /// Finite lower bounds used for sampling.
    pub fn sample_lo(&self) -> Vec<f64> {
        self.lo
            .iter()
            .map(|&v| if v.is_infinite() { -self.truncation_bound } else { v })
            .collect()
    }

    /// Finite upper bounds used for sampling.
    pub fn sample_hi(&self) -> Vec<f64> {
        self.hi
            .iter()
            .map(|&v| if v.is_infinite() { self.truncation_bound } else { v })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.sample_lo()
            .iter()
            .zip(self.sample_hi())
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn contains(&self, b: &[f64]) -> bool {
        b.len() == self.dim()
            && b
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Point at unit-cube coordinates `u` in the truncated box.
    fn at(&self, lo: &[f64], hi: &[f64], u: &[f64]) -> Vec<f64> {
        lo.iter()
            .zip(hi)
            .zip(u)
            .map(|((l, h), t)| if l == h { *l } else { (l + t * (h - l)).clamp(*l, *h) })
            .collect()
    }

    fn corners(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let lo = self.sample_lo();
        let hi = self.sample_hi();
        let m = self.dim();
        if m > MAX_CORNER_DIM {
            return vec![(lo.clone(), hi.clone()), (hi, lo)];
        }
        (0..1usize << m)
            .map(|mask| {
                let pick = |flip: bool| -> Vec<f64> {
                    (0..m)
                        .map(|i| if ((mask >> i) & 1 == 1) != flip { hi[i] } else { lo[i] })
                        .collect()
                };
                (pick(false), pick(true))
            })
            .collect()
    }
}

/// Default mixing grid `{0, 0.05, ..., 1} ∪ {1e-6, 1e-3}`, sorted.
pub fn default_sigma_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    g.push(1e-3);
    g.push(1e-6);
    g.sort_by(f64::total_cmp);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub n_pairs: usize,
    pub sigma_grid: Vec<f64>,
    pub seed: u64,
    pub s: f64,
}

impl SamplePlan {
    pub fn new(s: f64, seed: u64) -> Result<Self, PlanError> {
        let p = SamplePlan {
            n_pairs: DEFAULT_PAIRS,
            sigma_grid: default_sigma_grid(),
            seed,
            s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_pairs(mut self, n_pairs: usize) -> Self {
        self.n_pairs = n_pairs;
        self
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.n_pairs == 0 {
            return Err(PlanError::NoPairs);
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(PlanError::BadS(self.s));
        }
        let g = &self.sigma_grid;
        let sorted = g.windows(2).all(|w| w[0] <= w[1]);
        let inside = g.iter().all(|v| (0.0..=1.0).contains(v));
        if !sorted || !inside || g.first() != Some(&0.0) || g.last() != Some(&1.0) {
            return Err(PlanError::BadSigmaGrid);
        }
        Ok(())
    }

    /// Grid points in `(0, 1]`, for inequalities that divide by sigma.
    pub fn positive_sigmas(&self) -> Vec<f64> {
        self.sigma_grid.iter().copied().filter(|v| *v > 0.0).collect()
    }
}

pub type Pair = (Vec<f64>, Vec<f64>);

/// Additive-recurrence constants `1 / phi_d^(k+1)`, where `phi_d` is the
/// positive root of `x^(d+1) = x + 1`.
fn kronecker_alphas(dim: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|k| phi.powi(-(k as i32)).fract()).collect()
}

/// Deterministic sample pairs for `(domain, plan)`.
///
/// The list has `max(n_pairs, 1 + #corners)` entries: structural pairs first,
/// quasi-random pairs after. Every coordinate lies in the truncated box.
pub fn sample_pairs(d: &BoxDomain, plan: &SamplePlan) -> Result<Vec<Pair>, DomainError> {
    d.validate()?;
    let lo = d.sample_lo();
    let hi = d.sample_hi();
    let m = d.dim();

    let mut pairs: Vec<Pair> = Vec::with_capacity(plan.n_pairs.max(1 + (1 << m.min(4))));
    let c = d.center();
    pairs.push((c.clone(), c));
    pairs.extend(d.corners());

    let alphas = kronecker_alphas(2 * m);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let shift: Vec<f64> = (0..2 * m).map(|_| rng.gen::<f64>()).collect();
    let mut k: u64 = 1;
    while pairs.len() < plan.n_pairs {
        let u: Vec<f64> = alphas
            .iter()
            .zip(&shift)
            .map(|(a, s)| (s + (k as f64) * a).fract())
            .collect();
        pairs.push((d.at(&lo, &hi, &u[..m]), d.at(&lo, &hi, &u[m..])));
        k += 1;
    }
    Ok(pairs)
}

/// `sigma * b1 + (1 - sigma) * b2`, clamped to the segment so rounding never
/// leaves the box.
pub fn mix(sigma: f64, b1: &[f64], b2: &[f64]) -> Vec<f64> {
    b1.iter()
        .zip(b2)
        .map(|(x, y)| (y + sigma * (x - y)).clamp(x.min(*y), x.max(*y)))
        .collect()
}

pub fn midpoint(b1: &[f64], b2: &[f64]) -> Vec<f64> {
    b1.iter().zip(b2).map(|(x, y)| 0.5 * (x + y)).collect()
}
