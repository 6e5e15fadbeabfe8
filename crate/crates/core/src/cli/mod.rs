//! Command-line front end.
//!
//! Every subcommand reads a problem file (see [`problem`]), runs one analysis
//! and writes a canonical JSON document to standard output. Exit codes:
//! 0 certified / agreeing, 1 refuted / not certified, 2 inconclusive,
//! 3 usage or schema error.

pub mod json;
pub mod problem;

use crate::algebra::{self, AlgebraError, CertifiedInstance};
use crate::defcheck::{self, CheckError};
use crate::expr::Expr;
use crate::gradineq;
use crate::optim::{self, Certification, ConstrainedProblem, Constraint, KKTCertificate, OptimError, UnconstrainedProblem};
use crate::report::Verdict;
use crate::sets::{self, GeneralSConvexSetSpec, SetError};
use clap::{Parser, Subcommand};
use problem::{AlgebraOp, DefinitionName, GradAnalysis, Overrides, Problem, SchemaError, SetsMode};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Auxiliary oracle scans inside other commands stay below this many points.
const AUX_GRID_POINTS: usize = 2_000_000;

#[derive(Debug, Parser)]
#[command(name = "sconvex", version, about = "Sample-based certification of general s-convexity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// Problem file (TOML)
    file: PathBuf,
    /// Absolute and relative tolerance, overriding the file
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampled pairs
    #[arg(long)]
    pairs: Option<usize>,
    /// Sampling bound used in place of infinite domain bounds
    #[arg(long)]
    truncate: Option<f64>,
    /// Enforce strict inequalities where the definition supports it
    #[arg(long)]
    strict: bool,
    /// Emit the JSON report (the only output format; always on)
    #[arg(long)]
    json: bool,
    /// Suppress diagnostics on standard error
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a convexity definition from the [check] section
    Check(CommonArgs),
    /// Epigraph set closure or function/set equivalence from [sets]
    Sets(CommonArgs),
    /// Build and re-check a closure construction from [algebra]
    Algebra(CommonArgs),
    /// Gradient inequalities from [gradineq]
    Gradineq(CommonArgs),
    /// Certify a candidate minimizer from [certify]
    #[command(name = "certify-min")]
    CertifyMin(CommonArgs),
    /// Verify a KKT certificate from [kkt]
    Kkt(CommonArgs),
    /// Brute-force grid minimum from [oracle]
    #[command(name = "oracle-min")]
    OracleMin(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Check(a) => ("check", a),
            Command::Sets(a) => ("sets", a),
            Command::Algebra(a) => ("algebra", a),
            Command::Gradineq(a) => ("gradineq", a),
            Command::CertifyMin(a) => ("certify-min", a),
            Command::Kkt(a) => ("kkt", a),
            Command::OracleMin(a) => ("oracle-min", a),
        }
    }
}

/// Failure of a command before a result document exists.
#[derive(Debug)]
enum Failure {
    Schema(SchemaError),
    /// Analysis stopped early; reported as a document with an `error` field.
    Analysis { kind: &'static str, message: String, exit: i32 },
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e)
    }
}

fn verdict_exit(v: Verdict) -> i32 {
    match v {
        Verdict::CertifiedOnSamples => EXIT_OK,
        Verdict::Refuted => EXIT_FAILED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn certification_exit(c: Certification) -> i32 {
    match c {
        Certification::Certified => EXIT_OK,
        Certification::NotCertified => EXIT_FAILED,
        Certification::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn check_failure(path: &str, e: CheckError) -> Failure {
    Failure::Schema(SchemaError::at(path, e))
}

fn algebra_failure(e: AlgebraError) -> Failure {
    match e {
        AlgebraError::NotCertified(v) => Failure::Analysis {
            kind: "input_not_certified",
            message: e.to_string(),
            exit: verdict_exit(v),
        },
        other => Failure::Schema(SchemaError::at("algebra", other)),
    }
}

fn set_failure(e: SetError) -> Failure {
    Failure::Schema(SchemaError::at("sets", e))
}

fn optim_failure(section: &str, e: OptimError) -> Failure {
    let (kind, exit) = match &e {
        OptimError::NotCertified(v) => ("instance_not_certified", verdict_exit(*v)),
        OptimError::SingularGradient { .. } => ("singular_gradient", EXIT_INCONCLUSIVE),
        OptimError::DivergentLimit { .. } => ("divergent_limit", EXIT_INCONCLUSIVE),
        OptimError::Eval(_) => ("domain_error", EXIT_INCONCLUSIVE),
        OptimError::NoFeasiblePoint => ("no_feasible_point", EXIT_INCONCLUSIVE),
        _ => return Failure::Schema(SchemaError::at(section, e)),
    };
    Failure::Analysis {
        kind,
        message: e.to_string(),
        exit,
    }
}

fn section<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    v.as_ref()
        .ok_or_else(|| Failure::Schema(SchemaError::at(name, format!("section [{name}] is required"))))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Largest `n <= grid_n` with `n^m` within the auxiliary scan budget.
fn fit_grid(grid_n: usize, m: usize) -> usize {
    let mut n = grid_n;
    while n > 2 && (n as f64).powi(m as i32) > AUX_GRID_POINTS as f64 {
        n = ((AUX_GRID_POINTS as f64).powf(1.0 / m as f64).floor() as usize).clamp(2, n - 1);
    }
    n
}

fn run_check(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.check, "check")?;
    let h = p.function("check.function", &c.function)?;
    let no_map = |def: &str| -> Result<(), Failure> {
        match &c.map {
            Some(_) => Err(SchemaError::at("check.map", format!("definition {def} takes no map")).into()),
            None => Ok(()),
        }
    };
    let (d, plan, tol) = (&p.domain, &p.plan, &p.tol);
    let r = match c.definition {
        DefinitionName::GeneralSConvex => {
            let theta = p.map("check.map", c.map.as_deref())?;
            defcheck::check_general_s_convex(h, &theta, d, plan, tol)
        }
        DefinitionName::SConvexSecondSense => {
            no_map("s_convex_second_sense")?;
            defcheck::check_s_convex_second_sense(h, d, plan, tol, p.strict)
        }
        DefinitionName::SubBConvex => {
            let b = p.two_point_map("check.map", c.map.as_deref())?;
            defcheck::check_sub_b_convex(h, &b, d, plan, tol)
        }
        DefinitionName::SubBSConvex => {
            let b = p.two_point_map("check.map", c.map.as_deref())?;
            defcheck::check_sub_b_s_convex(h, &b, d, plan, tol, p.strict)
        }
        DefinitionName::Convex => {
            no_map("convex")?;
            defcheck::check_convex(h, d, plan, tol)
        }
    }
    .map_err(|e| check_failure("check", e))?;
    Ok((to_value(&r), verdict_exit(r.verdict)))
}

fn run_sets(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.sets, "sets")?;
    if c.epigraphs.is_empty() {
        return Err(SchemaError::at("sets.epigraphs", "at least one function is required").into());
    }
    let theta = p.map("sets.map", c.map.as_deref())?;
    let hs = c
        .epigraphs
        .iter()
        .enumerate()
        .map(|(i, n)| p.function(&format!("sets.epigraphs[{i}]"), n).cloned())
        .collect::<Result<Vec<Expr>, _>>()?;
    match c.mode {
        SetsMode::Set => {
            let spec = GeneralSConvexSetSpec {
                epigraphs: hs,
                theta,
                s: p.s,
            };
            let r = sets::set_check(&spec, &p.domain, &p.plan, &p.beta_offsets, &p.tol).map_err(set_failure)?;
            Ok((to_value(&r), verdict_exit(r.verdict)))
        }
        SetsMode::Equivalence => {
            if hs.len() != 1 {
                return Err(SchemaError::at("sets.epigraphs", "equivalence mode takes exactly one function").into());
            }
            let r = sets::epigraph_equivalence(&hs[0], &theta, &p.domain, &p.plan, &p.tol).map_err(set_failure)?;
            let exit = if r.agreement { EXIT_OK } else { EXIT_FAILED };
            Ok((to_value(&r), exit))
        }
    }
}

fn run_algebra(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.algebra, "algebra")?;
    let mut inputs = Vec::new();
    for (i, r) in c.instances.iter().enumerate() {
        let path = format!("algebra.instances[{i}]");
        let h = p.function(&format!("{path}.function"), &r.function)?.clone();
        let theta = p.map(&format!("{path}.map"), r.map.as_deref())?;
        inputs.push(CertifiedInstance::certify(h, theta, p.domain.clone(), &p.plan, &p.tol).map_err(algebra_failure)?);
    }
    let need = |v: Option<f64>, key: &str| -> Result<f64, Failure> {
        v.ok_or_else(|| SchemaError::at(format!("algebra.{key}"), "required for this op").into())
    };
    let first = || -> Result<&CertifiedInstance, Failure> {
        inputs
            .first()
            .ok_or_else(|| SchemaError::at("algebra.instances", "at least one instance is required").into())
    };
    let built = match c.op {
        AlgebraOp::Sum => {
            if inputs.len() != 2 {
                return Err(SchemaError::at("algebra.instances", "sum takes exactly two instances").into());
            }
            algebra::combine_sum(&inputs[0], &inputs[1])
        }
        AlgebraOp::Scale => algebra::combine_scale(first()?, need(c.alpha, "alpha")?),
        AlgebraOp::WeightedSum => {
            let alphas = c
                .alphas
                .as_ref()
                .ok_or_else(|| Failure::Schema(SchemaError::at("algebra.alphas", "required for this op")))?;
            algebra::combine_weighted_sum(&inputs, alphas)
        }
        AlgebraOp::Max => algebra::combine_max(&inputs),
        AlgebraOp::Composition => algebra::combine_composition(first()?, need(c.slope, "slope")?, c.intercept.unwrap_or(0.0)),
        AlgebraOp::Sup => algebra::combine_sup(&inputs),
    }
    .map_err(algebra_failure)?;
    let r = built
        .recheck(&p.domain, &p.plan, &p.tol)
        .map_err(|e| check_failure("algebra", e))?;
    let out = json!({
        "op": to_value(&c.op),
        "inputs": inputs.iter().map(|i| to_value(&i.report)).collect::<Vec<_>>(),
        "construction": {
            "h": built.h.to_string(),
            "theta": built.theta.expr.to_string(),
            "notes": built.notes,
        },
        "report": to_value(&r),
    });
    Ok((out, verdict_exit(r.verdict)))
}

fn run_gradineq(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.gradineq, "gradineq")?;
    let h = p.function("gradineq.function", &c.function)?;
    let theta = p.map("gradineq.map", c.map.as_deref())?;
    type Verify = fn(
        &Expr,
        &defcheck::ModifierMap,
        &crate::sampling::BoxDomain,
        &crate::sampling::SamplePlan,
        &crate::report::Tolerance,
    ) -> Result<gradineq::GradIneqReport, CheckError>;
    let runs: Vec<Verify> = match c.analysis {
        GradAnalysis::Bounds => vec![gradineq::verify_theorem4],
        GradAnalysis::NonpositiveMap => vec![gradineq::verify_theorem5],
        GradAnalysis::DifferenceBounds => vec![gradineq::verify_corollary2],
        GradAnalysis::All => vec![
            gradineq::verify_theorem4,
            gradineq::verify_theorem5,
            gradineq::verify_corollary2,
        ],
    };
    let reports = runs
        .iter()
        .map(|f| f(h, &theta, &p.domain, &p.plan, &p.tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| check_failure("gradineq", e))?;
    let verdict = if reports.iter().any(|r| r.verdict == Verdict::Refuted) {
        Verdict::Refuted
    } else if reports.iter().all(|r| r.verdict == Verdict::CertifiedOnSamples) {
        Verdict::CertifiedOnSamples
    } else {
        Verdict::Inconclusive
    };
    let out = json!({
        "verdict": to_value(&verdict),
        "reports": reports.iter().map(to_value).collect::<Vec<_>>(),
    });
    Ok((out, verdict_exit(verdict)))
}

fn run_certify(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.certify, "certify")?;
    let problem = UnconstrainedProblem {
        h: p.function("certify.function", &c.function)?.clone(),
        theta: p.map("certify.map", c.map.as_deref())?,
        s: p.s,
        domain: p.domain.clone(),
    };
    let b2 = p.point("certify.candidate", &c.candidate)?;
    let cert = optim::certify_unconstrained(&problem, &b2, &p.plan, &p.tol).map_err(|e| optim_failure("certify", e))?;
    let oracle = optim::brute_force_min(&problem.h, &p.domain, fit_grid(p.grid_n, p.arity))
        .map_err(|e| optim_failure("certify", e))?;
    let floor = cert.h_candidate - 1e-6 - p.tol.slack(cert.h_candidate);
    let consistent = cert.certification != Certification::Certified || oracle.value >= floor;
    let uniqueness = if c.uniqueness {
        let u = optim::check_uniqueness_note(&problem, &b2, p.perturbations, &p.plan, &p.tol)
            .map_err(|e| optim_failure("certify", e))?;
        to_value(&u)
    } else {
        Value::Null
    };
    let out = json!({
        "certification": to_value(&cert),
        "oracle": to_value(&oracle),
        "oracle_consistent": consistent,
        "uniqueness": uniqueness,
    });
    Ok((out, certification_exit(cert.certification)))
}

fn run_kkt(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.kkt, "kkt")?;
    let mut constraints = Vec::new();
    for (i, r) in c.constraints.iter().enumerate() {
        let path = format!("kkt.constraints[{i}]");
        constraints.push(Constraint {
            f: p.function(&format!("{path}.function"), &r.function)?.clone(),
            theta: p.map(&format!("{path}.map"), r.map.as_deref())?,
        });
    }
    let problem = ConstrainedProblem {
        h: p.function("kkt.function", &c.function)?.clone(),
        theta: p.map("kkt.map", c.map.as_deref())?,
        s: p.s,
        constraints,
        domain: p.domain.clone(),
    };
    let cert = KKTCertificate {
        b_star: p.point("kkt.b_star", &c.b_star)?,
        multipliers: c.multipliers.clone(),
    };
    let r = optim::certify_kkt(&problem, &cert, &p.plan, &p.tol).map_err(|e| optim_failure("kkt", e))?;
    let fs: Vec<Expr> = problem.constraints.iter().map(|c| c.f.clone()).collect();
    let oracle = optim::brute_force_min_feasible(&problem.h, &fs, &p.domain, fit_grid(p.grid_n, p.arity), p.tol.abs)
        .map_err(|e| optim_failure("kkt", e))?;
    let out = json!({ "kkt": to_value(&r), "oracle": to_value(&oracle) });
    Ok((out, certification_exit(r.certification)))
}

fn run_oracle(p: &Problem) -> Result<(Value, i32), Failure> {
    let c = section(&p.file.oracle, "oracle")?;
    let h = p.function("oracle.function", &c.function)?;
    let fs = c
        .constraints
        .iter()
        .enumerate()
        .map(|(i, n)| p.function(&format!("oracle.constraints[{i}]"), n).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let grid_n = c.grid_n.unwrap_or(p.grid_n);
    let r = if fs.is_empty() {
        optim::brute_force_min(h, &p.domain, grid_n)
    } else {
        optim::brute_force_min_feasible(h, &fs, &p.domain, grid_n, p.tol.abs)
    }
    .map_err(|e| optim_failure("oracle", e))?;
    Ok((json!({ "function": c.function, "oracle": to_value(&r) }), EXIT_OK))
}

fn echo(p: &Problem) -> Value {
    let exprs = |m: &std::collections::BTreeMap<String, String>, parsed: &dyn Fn(&str) -> String| -> Value {
        m.keys().map(|k| (k.clone(), Value::String(parsed(k)))).collect::<serde_json::Map<_, _>>().into()
    };
    json!({
        "arity": p.arity,
        "s": p.s,
        "domain": to_value(&p.domain),
        "plan": to_value(&p.plan),
        "tolerance": to_value(&p.tol),
        "strict": p.strict,
        "grid_n": p.grid_n,
        "functions": exprs(&p.file.functions, &|k| p.functions[k].to_string()),
        "maps": exprs(&p.file.maps, &|k| p.maps[k].expr.to_string()),
        "two_point_maps": exprs(&p.file.two_point_maps, &|k| p.two_point_maps[k].expr.to_string()),
    })
}

/// Runs the CLI on `args` (including the program name), writing the report
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (name, a) = cli.command.parts();
    let started = Instant::now();
    let diag = |err: &mut dyn Write, msg: &str| {
        if !a.quiet {
            let _ = writeln!(err, "sconvex {name}: {msg}");
        }
    };

    let text = match std::fs::read_to_string(&a.file) {
        Ok(t) => t,
        Err(e) => {
            diag(err, &format!("cannot read {}: {e}", a.file.display()));
            return EXIT_USAGE;
        }
    };
    let ov = Overrides {
        tol: a.tol,
        seed: a.seed,
        pairs: a.pairs,
        truncate: a.truncate,
        strict: a.strict,
    };
    let p = match Problem::from_text(&text, &ov) {
        Ok(p) => p,
        Err(e) => {
            diag(err, &format!("schema error: {e}"));
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::Check(_) => run_check(&p),
        Command::Sets(_) => run_sets(&p),
        Command::Algebra(_) => run_algebra(&p),
        Command::Gradineq(_) => run_gradineq(&p),
        Command::CertifyMin(_) => run_certify(&p),
        Command::Kkt(_) => run_kkt(&p),
        Command::OracleMin(_) => run_oracle(&p),
    };
    let (body, exit) = match result {
        Ok((v, exit)) => (("result", v), exit),
        Err(Failure::Schema(e)) => {
            diag(err, &format!("schema error: {e}"));
            return EXIT_USAGE;
        }
        Err(Failure::Analysis { kind, message, exit }) => {
            diag(err, &message);
            (("error", json!({ "kind": kind, "message": message })), exit)
        }
    };
    let mut doc = json!({
        "tool": "sconvex",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "schema_version": problem::SCHEMA_VERSION,
        "input": echo(&p),
        "exit_code": exit,
    });
    doc[body.0] = body.1;
    let rendered = json::to_canonical(&doc).expect("document serializes");
    if out.write_all(rendered.as_bytes()).is_err() {
        return EXIT_USAGE;
    }
    diag(err, &format!("exit {exit}, wall time {:.3} s", started.elapsed().as_secs_f64()));
    exit
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
