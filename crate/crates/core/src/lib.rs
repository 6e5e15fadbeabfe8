//! Numerical toolkit for general s-convexity.
//!
//! Functions and modifier maps are [`expr::Expr`] trees. The [`defcheck`]
//! module certifies or refutes membership in the convexity-type classes on a
//! deterministic sample plan ([`sampling`]); [`algebra`] builds new members
//! from certified ones; [`sets`] handles epigraph-shaped general s-convex
//! sets; [`gradineq`] checks the differentiable characterizations; [`optim`]
//! verifies sufficient optimality conditions; [`cli`] is the batch front end.
//!
//! A `CERTIFIED_ON_SAMPLES` verdict means the inequality held at every
//! sampled point. It is evidence, not a proof.

pub mod algebra;
pub mod cli;
pub mod defcheck;
pub mod expr;
pub mod gradient;
pub mod gradineq;
pub mod optim;
pub mod report;
pub mod sampling;
pub mod sets;

pub use defcheck::{Definition, MapKind, ModifierMap};
pub use expr::{parse, parse_with_s, Expr};
pub use report::{CheckReport, Tolerance, Verdict, Witness};
pub use sampling::{BoxDomain, SamplePlan};
