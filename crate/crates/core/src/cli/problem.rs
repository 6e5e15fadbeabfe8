//! Problem files: a versioned TOML document with named expressions.
//!
//! ```toml
//! schema_version = 1
//! arity = 1
//! s = 0.5
//!
//! [domain]
//! lo = [1.0]
//! hi = [10.0]            # "inf" / inf allowed; sampled up to truncation_bound
//!
//! [plan]
//! n_pairs = 512
//! seed = 7
//!
//! [functions]
//! h = "((x1-1)^2+(x1-1))^s"
//!
//! [maps]
//! theta = "sigma*(2*x1+6)"
//!
//! [check]
//! definition = "general_s_convex"
//! function = "h"
//! map = "theta"
//! ```

use crate::defcheck::ModifierMap;
use crate::expr::{parse_with_s, Expr};
use crate::report::Tolerance;
use crate::sampling::{default_sigma_grid, BoxDomain, SamplePlan, DEFAULT_PAIRS, DEFAULT_TRUNCATION};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_GRID_N: usize = 10001;
pub const DEFAULT_PERTURBATIONS: usize = 1001;

/// A schema or resolution failure, located by its path in the document.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        SchemaError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    fn value(&self, path: &str) -> Result<f64, SchemaError> {
        match self {
            Real::Num(v) => Ok(*v),
            Real::Text(t) => match t.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| SchemaError::at(path, format!("expected a number or \"inf\", found {t:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<Real>,
    pub hi: Vec<Real>,
    pub truncation_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub n_pairs: Option<usize>,
    pub seed: Option<u64>,
    pub sigma_grid: Option<Vec<f64>>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub grid_n: Option<usize>,
    pub beta_offsets: Option<Vec<f64>>,
    pub perturbations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionName {
    GeneralSConvex,
    SConvexSecondSense,
    SubBConvex,
    SubBSConvex,
    Convex,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub definition: DefinitionName,
    pub function: String,
    /// One-point map for `general_s_convex`, two-point map for the sub-b forms.
    pub map: Option<String>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetsMode {
    /// Closure check of the intersection of the listed epigraphs.
    Set,
    /// Function-level and set-level verdicts side by side (one function).
    #[default]
    Equivalence,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSection {
    #[serde(default)]
    pub mode: SetsMode,
    pub epigraphs: Vec<String>,
    pub map: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraOp {
    Sum,
    Scale,
    WeightedSum,
    Max,
    Composition,
    Sup,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRef {
    pub function: String,
    pub map: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    pub op: AlgebraOp,
    pub instances: Vec<InstanceRef>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradAnalysis {
    #[default]
    Bounds,
    NonpositiveMap,
    DifferenceBounds,
    All,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradIneqSection {
    pub function: String,
    pub map: Option<String>,
    #[serde(default)]
    pub analysis: GradAnalysis,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub function: String,
    pub map: Option<String>,
    pub candidate: Vec<f64>,
    #[serde(default)]
    pub uniqueness: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KktSection {
    pub function: String,
    pub map: Option<String>,
    #[serde(default)]
    pub constraints: Vec<InstanceRef>,
    pub b_star: Vec<f64>,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub function: String,
    /// Names of functions `f` restricting the scan to `f <= 0`.
    #[serde(default)]
    pub constraints: Vec<String>,
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub arity: usize,
    pub s: f64,
    pub domain: DomainSpec,
    #[serde(default)]
    pub plan: PlanSpec,
    #[serde(default)]
    pub functions: BTreeMap<String, String>,
    #[serde(default)]
    pub maps: BTreeMap<String, String>,
    #[serde(default)]
    pub two_point_maps: BTreeMap<String, String>,
    pub check: Option<CheckSection>,
    pub sets: Option<SetsSection>,
    pub algebra: Option<AlgebraSection>,
    pub gradineq: Option<GradIneqSection>,
    pub certify: Option<CertifySection>,
    pub kkt: Option<KktSection>,
    pub oracle: Option<OracleSection>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub pairs: Option<usize>,
    pub truncate: Option<f64>,
    pub strict: bool,
}

/// A problem file with every expression parsed and every setting resolved.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub arity: usize,
    pub s: f64,
    pub domain: BoxDomain,
    pub plan: SamplePlan,
    pub tol: Tolerance,
    pub grid_n: usize,
    pub beta_offsets: Vec<f64>,
    pub perturbations: usize,
    pub strict: bool,
    pub functions: BTreeMap<String, Expr>,
    pub maps: BTreeMap<String, ModifierMap>,
    pub two_point_maps: BTreeMap<String, ModifierMap>,
}

pub fn parse_document(text: &str) -> Result<ProblemFile, SchemaError> {
    let de = toml::Deserializer::parse(text).map_err(|e| SchemaError::at("", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        SchemaError::at(path, inner.trim_end())
    })
}

fn expr_table(
    section: &str,
    table: &BTreeMap<String, String>,
    arity: usize,
    s: f64,
) -> Result<BTreeMap<String, Expr>, SchemaError> {
    table
        .iter()
        .map(|(name, text)| {
            parse_with_s(text, arity, s)
                .map(|e| (name.clone(), e))
                .map_err(|e| SchemaError::at(format!("{section}.{name}"), e))
        })
        .collect()
}

impl Problem {
    pub fn from_text(text: &str, ov: &Overrides) -> Result<Self, SchemaError> {
        Self::resolve(parse_document(text)?, ov)
    }

    pub fn resolve(file: ProblemFile, ov: &Overrides) -> Result<Self, SchemaError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::at(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
            ));
        }
        let m = file.arity;
        if m == 0 {
            return Err(SchemaError::at("arity", "must be at least 1"));
        }
        let s = file.s;
        if !(s > 0.0 && s <= 1.0) {
            return Err(SchemaError::at("s", format!("{s} is outside (0, 1]")));
        }
        let reals = |key: &str, v: &[Real]| -> Result<Vec<f64>, SchemaError> {
            if v.len() != m {
                return Err(SchemaError::at(
                    format!("domain.{key}"),
                    format!("expected {m} entries (arity), found {}", v.len()),
                ));
            }
            v.iter()
                .enumerate()
                .map(|(i, r)| r.value(&format!("domain.{key}[{i}]")))
                .collect()
        };
        let lo = reals("lo", &file.domain.lo)?;
        let hi = reals("hi", &file.domain.hi)?;
        let bound = ov
            .truncate
            .or(file.domain.truncation_bound)
            .unwrap_or(DEFAULT_TRUNCATION);
        let domain = BoxDomain::with_truncation(lo, hi, bound).map_err(|e| SchemaError::at("domain", e))?;

        let ps = &file.plan;
        let plan = SamplePlan {
            n_pairs: ov.pairs.or(ps.n_pairs).unwrap_or(DEFAULT_PAIRS),
            sigma_grid: ps.sigma_grid.clone().unwrap_or_else(default_sigma_grid),
            seed: ov.seed.or(ps.seed).unwrap_or(0),
            s,
        };
        plan.validate().map_err(|e| SchemaError::at("plan", e))?;
        let mut tol = Tolerance::new(ps.tol_abs.unwrap_or(1e-9), ps.tol_rel.unwrap_or(1e-9));
        if let Some(t) = ov.tol {
            tol = Tolerance::uniform(t);
        }
        if !(tol.abs >= 0.0 && tol.rel >= 0.0) || !tol.abs.is_finite() || !tol.rel.is_finite() {
            return Err(SchemaError::at("plan.tol_abs", "tolerances must be finite and nonnegative"));
        }
        let grid_n = ps.grid_n.unwrap_or(DEFAULT_GRID_N);
        if grid_n < 2 {
            return Err(SchemaError::at("plan.grid_n", "must be at least 2"));
        }
        let beta_offsets = ps.beta_offsets.clone().unwrap_or_else(|| crate::sets::DEFAULT_OFFSETS.to_vec());

        let functions = expr_table("functions", &file.functions, m, s)?;
        let maps = expr_table("maps", &file.maps, m, s)?
            .into_iter()
            .map(|(k, e)| (k, ModifierMap::one_point(e)))
            .collect();
        let two_point_maps = expr_table("two_point_maps", &file.two_point_maps, 2 * m, s)?
            .into_iter()
            .map(|(k, e)| (k, ModifierMap::two_point(e)))
            .collect();

        let strict = ov.strict || file.check.as_ref().is_some_and(|c| c.strict);
        Ok(Problem {
            arity: m,
            s,
            domain,
            plan,
            tol,
            grid_n,
            beta_offsets,
            perturbations: ps.perturbations.unwrap_or(DEFAULT_PERTURBATIONS),
            strict,
            functions,
            maps,
            two_point_maps,
            file,
        })
    }

    pub fn function(&self, path: &str, name: &str) -> Result<&Expr, SchemaError> {
        self.functions
            .get(name)
            .ok_or_else(|| SchemaError::at(path, format!("unknown function {name:?}")))
    }

    /// A one-point map by name; absent means the zero map.
    pub fn map(&self, path: &str, name: Option<&str>) -> Result<ModifierMap, SchemaError> {
        match name {
            None => Ok(ModifierMap::zero()),
            Some(n) => self
                .maps
                .get(n)
                .cloned()
                .ok_or_else(|| SchemaError::at(path, format!("unknown one-point map {n:?}"))),
        }
    }

    /// A two-point map by name; absent means the zero map. A one-point map
    /// of the same name is rejected with a pointer to the right table.
    pub fn two_point_map(&self, path: &str, name: Option<&str>) -> Result<ModifierMap, SchemaError> {
        match name {
            None => Ok(ModifierMap::zero_two_point()),
            Some(n) => self.two_point_maps.get(n).cloned().ok_or_else(|| {
                let hint = if self.maps.contains_key(n) {
                    " (it is a one-point map; declare it under [two_point_maps])"
                } else {
                    ""
                };
                SchemaError::at(path, format!("unknown two-point map {n:?}{hint}"))
            }),
        }
    }

    pub fn point(&self, path: &str, v: &[f64]) -> Result<Vec<f64>, SchemaError> {
        if v.len() != self.arity {
            return Err(SchemaError::at(
                path,
                format!("expected {} coordinates, found {}", self.arity, v.len()),
            ));
        }
        Ok(v.to_vec())
    }
}
