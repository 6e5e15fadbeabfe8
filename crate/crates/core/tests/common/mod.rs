//! Shared fixtures and independent oracles for the integration tests.
//!
//! Oracles evaluate the inequalities with plain Rust closures, never through
//! the crate's expression evaluator.

#![allow(dead_code)]

use sconvex::defcheck::{self, ModifierMap};
use sconvex::report::{CheckReport, Tolerance, Verdict, Witness};
use sconvex::sampling::{BoxDomain, SamplePlan};
use sconvex::sets::{self, GeneralSConvexSetSpec};
use sconvex::{parse, parse_with_s, Expr};
use std::path::PathBuf;
use std::sync::Arc;

pub type F = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Theta = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type BMap = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn worked_h(b: &[f64]) -> f64 {
    let t = b[0] - 1.0;
    (t * t + t).sqrt()
}

pub fn worked_theta(b: &[f64], sigma: f64) -> f64 {
    sigma * (2.0 * b[0] + 6.0)
}

/// One test instance, given both as expression text and as closures.
#[derive(Clone)]
pub struct Instance {
    pub name: &'static str,
    pub h_src: &'static str,
    pub theta_src: &'static str,
    pub b_src: Option<&'static str>,
    pub s: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: F,
    pub theta: Theta,
    pub b: Option<BMap>,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.lo.len()
    }

    pub fn h_expr(&self) -> Expr {
        parse_with_s(self.h_src, self.m(), self.s).unwrap()
    }

    pub fn theta_map(&self) -> ModifierMap {
        ModifierMap::one_point(parse(self.theta_src, self.m()).unwrap())
    }

    pub fn b_map(&self) -> Option<ModifierMap> {
        self.b_src
            .map(|t| ModifierMap::two_point(parse(t, 2 * self.m()).unwrap()))
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain::new(self.lo.clone(), self.hi.clone()).unwrap()
    }

    pub fn plan(&self, seed: u64, pairs: usize) -> SamplePlan {
        SamplePlan::new(self.s, seed).unwrap().with_pairs(pairs)
    }

    pub fn oracle(&self) -> Oracle {
        Oracle {
            h: self.h.clone(),
            theta: self.theta.clone(),
            b: self.b.clone(),
            s: self.s,
        }
    }
}

fn zero_theta() -> Theta {
    Arc::new(|_, _| 0.0)
}

/// Mixed corpus of certified and refuted instances in one and two dimensions.
pub fn corpus() -> Vec<Instance> {
    let one = |lo: f64, hi: f64| (vec![lo], vec![hi]);
    let mut out = Vec::new();
    let mut push = |name, h_src, theta_src, b_src, s, (lo, hi): (Vec<f64>, Vec<f64>), h: F, theta: Theta, b: Option<BMap>| {
        out.push(Instance {
            name,
            h_src,
            theta_src,
            b_src,
            s,
            lo,
            hi,
            h,
            theta,
            b,
        })
    };
    push(
        "worked_example",
        "((x1-1)^2+(x1-1))^s",
        "sigma*(2*x1+6)",
        None,
        0.5,
        one(1.0, 10.0),
        Arc::new(worked_h),
        Arc::new(worked_theta),
        None,
    );
    push(
        "square",
        "x1^2",
        "0",
        Some("sigma*(1-sigma)*(x1-x2)^2"),
        1.0,
        one(-5.0, 5.0),
        Arc::new(|b| b[0] * b[0]),
        zero_theta(),
        Some(Arc::new(|p, q, sg| sg * (1.0 - sg) * (p[0] - q[0]).powi(2))),
    );
    push(
        "negative_square",
        "-x1^2",
        "0",
        Some("0.5*sigma*(1-sigma)*(x1-x2)^2"),
        1.0,
        one(-5.0, 5.0),
        Arc::new(|b| -b[0] * b[0]),
        zero_theta(),
        Some(Arc::new(|p, q, sg| 0.5 * sg * (1.0 - sg) * (p[0] - q[0]).powi(2))),
    );
    push(
        "cube",
        "x1^3",
        "0",
        None,
        1.0,
        one(-2.0, 2.0),
        Arc::new(|b| b[0].powi(3)),
        zero_theta(),
        None,
    );
    push(
        "square_root",
        "sqrt(x1)",
        "0",
        None,
        1.0,
        one(0.0, 4.0),
        Arc::new(|b| b[0].sqrt()),
        zero_theta(),
        None,
    );
    push(
        "abs_half",
        "abs(x1)",
        "0",
        None,
        0.5,
        one(-1.0, 1.0),
        Arc::new(|b| b[0].abs()),
        zero_theta(),
        None,
    );
    push(
        "tent_half",
        "1 - abs(x1)",
        "0",
        None,
        0.5,
        one(-1.0, 1.0),
        Arc::new(|b| 1.0 - b[0].abs()),
        zero_theta(),
        None,
    );
    push(
        "negative_exp",
        "-exp(x1)",
        "-0.01*sigma",
        None,
        1.0,
        one(-2.0, 0.0),
        Arc::new(|b| -b[0].exp()),
        Arc::new(|_, sg| -0.01 * sg),
        None,
    );
    push(
        "square_negative_map",
        "x1^2",
        "-sigma",
        None,
        1.0,
        one(-3.0, 3.0),
        Arc::new(|b| b[0] * b[0]),
        Arc::new(|_, sg| -sg),
        None,
    );
    push(
        "linear",
        "2*x1 + 1",
        "sigma",
        Some("sigma*(1-sigma)"),
        1.0,
        one(0.0, 1.0),
        Arc::new(|b| 2.0 * b[0] + 1.0),
        Arc::new(|_, sg| sg),
        Some(Arc::new(|_, _, sg| sg * (1.0 - sg))),
    );
    push(
        "saddle",
        "x1*x2",
        "0",
        None,
        1.0,
        (vec![-1.0, -1.0], vec![1.0, 1.0]),
        Arc::new(|b| b[0] * b[1]),
        zero_theta(),
        None,
    );
    push(
        "bowl_2d",
        "x1^2 + x2^2 + 1",
        "sigma*(x1 + x2 + 1)",
        Some("sigma*(1-sigma)*((x1-x3)^2 + (x2-x4)^2)"),
        0.5,
        (vec![0.0, 0.0], vec![3.0, 3.0]),
        Arc::new(|b| b[0] * b[0] + b[1] * b[1] + 1.0),
        Arc::new(|b, sg| sg * (b[0] + b[1] + 1.0)),
        Some(Arc::new(|p, q, sg| {
            sg * (1.0 - sg) * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        })),
    );
    push(
        "shifted_exp_half",
        "exp(-x1) - 1",
        "0",
        None,
        0.5,
        one(-1.0, 2.0),
        Arc::new(|b| (-b[0]).exp() - 1.0),
        zero_theta(),
        None,
    );
    out
}

/// Closure-based re-evaluation of every inequality the checkers report.
#[derive(Clone)]
pub struct Oracle {
    pub h: F,
    pub theta: Theta,
    pub b: Option<BMap>,
    pub s: f64,
}

pub fn mix(sg: f64, b1: &[f64], b2: &[f64]) -> Vec<f64> {
    b1.iter().zip(b2).map(|(x, y)| y + sg * (x - y)).collect()
}

pub fn mid(b1: &[f64], b2: &[f64]) -> Vec<f64> {
    b1.iter().zip(b2).map(|(x, y)| 0.5 * (x + y)).collect()
}

impl Oracle {
    /// `(lhs, rhs)` of `inequality` at `w`.
    pub fn sides(&self, inequality: &str, w: &Witness) -> (f64, f64) {
        let (b1, b2, sg, s) = (&w.b1, &w.b2, w.sigma, self.s);
        let h = &self.h;
        let lhs = h(&mix(sg, b1, b2));
        let (p, q) = (sg.powf(s), (1.0 - sg).powf(s));
        let bmap = || (self.b.as_ref().expect("two-point map"))(b1, b2, sg);
        let rhs = match inequality {
            "general_s_convex" => {
                let t = &self.theta;
                p * (h(b1) + t(b1, sg)) + q * (h(b2) + t(b2, sg)) + t(&mid(b1, b2), sg)
            }
            "s_convex_second_sense" => p * h(b1) + q * h(b2),
            "sub_b_convex" => sg * h(b1) + (1.0 - sg) * h(b2) + bmap(),
            "sub_b_s_convex" => p * h(b1) + q * h(b2) + bmap(),
            "convex" => sg * h(b1) + (1.0 - sg) * h(b2),
            "general_s_convex_set" => {
                let t = &self.theta;
                let a = h(b1) + w.alpha.unwrap();
                let c = h(b2) + w.beta.unwrap();
                p * (a + t(b1, sg)) + q * (c + t(b2, sg)) + t(&mid(b1, b2), sg)
            }
            other => panic!("no oracle for {other}"),
        };
        (lhs, rhs)
    }

    /// Whether the report's witness violates its inequality under the
    /// report's own tolerance and strictness.
    pub fn violates(&self, r: &CheckReport) -> (bool, f64) {
        let w = r.witness.as_ref().expect("witness");
        let (lhs, rhs) = self.sides(&r.inequality, w);
        let margin = rhs - lhs;
        let tol = r.config.tolerance;
        let interior = w.sigma > 0.0 && w.sigma < 1.0 && w.b1 != w.b2;
        let strict_hit = r.config.strict && interior && margin <= 0.0;
        (margin < -tol.slack(rhs) || strict_hit, margin)
    }
}

/// Every check the corpus supports for `inst`, as `(report, label)`.
pub fn corpus_reports(inst: &Instance, seed: u64, pairs: usize) -> Vec<(CheckReport, String)> {
    let d = inst.domain();
    let plan = inst.plan(seed, pairs);
    let tol = Tolerance::default();
    let h = inst.h_expr();
    let theta = inst.theta_map();
    let mut out = vec![
        defcheck::check_general_s_convex(&h, &theta, &d, &plan, &tol).unwrap(),
        defcheck::check_s_convex_second_sense(&h, &d, &plan, &tol, false).unwrap(),
        defcheck::check_s_convex_second_sense(&h, &d, &plan, &tol, true).unwrap(),
        defcheck::check_convex(&h, &d, &plan, &tol).unwrap(),
        sets::set_check(
            &GeneralSConvexSetSpec::epigraph_of(h.clone(), theta.clone(), inst.s),
            &d,
            &plan,
            &[0.0, 0.5, 2.0],
            &tol,
        )
        .unwrap(),
    ];
    if let Some(b) = inst.b_map() {
        out.push(defcheck::check_sub_b_convex(&h, &b, &d, &plan, &tol).unwrap());
        out.push(defcheck::check_sub_b_s_convex(&h, &b, &d, &plan, &tol, false).unwrap());
        out.push(defcheck::check_sub_b_s_convex(&h, &b, &d, &plan, &tol, true).unwrap());
    }
    out.into_iter()
        .map(|r| {
            let label = format!("{}/{}{}", inst.name, r.inequality, if r.config.strict { "/strict" } else { "" });
            (r, label)
        })
        .collect()
}

pub fn count_verdicts<'a>(rs: impl Iterator<Item = &'a CheckReport>) -> (usize, usize, usize) {
    rs.fold((0, 0, 0), |(c, r, i), x| match x.verdict {
        Verdict::CertifiedOnSamples => (c + 1, r, i),
        Verdict::Refuted => (c, r + 1, i),
        Verdict::Inconclusive => (c, r, i + 1),
    })
}

/// Runs the CLI in-process and returns `(exit, stdout, stderr)`.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["sconvex"];
    full.extend_from_slice(args);
    let code = sconvex::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Every `(command, fixture)` combination with a matching section.
pub const CLI_SUITE: &[(&str, &str)] = &[
    ("check", "worked_example.toml"),
    ("sets", "worked_example.toml"),
    ("certify-min", "worked_example.toml"),
    ("oracle-min", "worked_example.toml"),
    ("gradineq", "worked_example_gradient.toml"),
    ("check", "negative_square.toml"),
    ("sets", "negative_square.toml"),
    ("check", "square.toml"),
    ("gradineq", "square.toml"),
    ("certify-min", "square.toml"),
    ("algebra", "square.toml"),
    ("oracle-min", "square.toml"),
    ("certify-min", "square_bad_candidate.toml"),
    ("kkt", "kkt.toml"),
    ("oracle-min", "kkt.toml"),
    ("kkt", "kkt_interior.toml"),
    ("check", "two_dim.toml"),
    ("sets", "two_dim.toml"),
    ("oracle-min", "two_dim.toml"),
    ("check", "partial_domain.toml"),
    ("check", "bad_schema.toml"),
];

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sconvex::algebra::CertifiedInstance;

/// A generated polynomial instance `(text, s, domain)`.
pub struct PolyInstance {
    pub text: String,
    pub h: Expr,
    pub s: f64,
    pub domain: BoxDomain,
}

/// `n` random polynomials of degree at most 4; every other one has `s = 1`.
pub fn polynomial_instances(n: usize, seed: u64) -> Vec<PolyInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let coeffs: Vec<f64> = (0..5).map(|_| (rng.gen_range(-2.0f64..2.0) * 100.0).round() / 100.0).collect();
            let text = coeffs
                .iter()
                .enumerate()
                .map(|(p, c)| format!("({c})*x1^{p}"))
                .collect::<Vec<_>>()
                .join(" + ");
            let s = if k % 2 == 0 { 1.0 } else { [0.25, 0.5, 0.75][rng.gen_range(0..3)] };
            let (lo, hi) = if rng.gen_bool(0.5) { (-2.0, 2.0) } else { (0.0, 3.0) };
            PolyInstance {
                h: parse_with_s(&text, 1, s).unwrap(),
                text,
                s,
                domain: BoxDomain::interval(lo, hi).unwrap(),
            }
        })
        .collect()
}

/// Random certified instances `a (x - c)^2 + e` with nonnegative maps,
/// grouped into `n` pairs sharing `s` and the domain.
pub fn certified_pairs(n: usize, seed: u64, plan_pairs: usize) -> Vec<(CertifiedInstance, CertifiedInstance, SamplePlan)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = BoxDomain::interval(-2.0, 2.0).unwrap();
    let tol = Tolerance::default();
    let mut draw = |s: f64, plan: &SamplePlan| -> Option<CertifiedInstance> {
        let a = rng.gen_range(0.2f64..2.0);
        let c = rng.gen_range(-1.0f64..1.0);
        let e = rng.gen_range(0.0f64..2.0);
        let k = rng.gen_range(0.0f64..3.0);
        let h = format!("{a}*(x1 - ({c}))^2 + {e}");
        let theta = match rng.gen_range(0..3) {
            0 => format!("{k}*sigma"),
            1 => format!("{k}*sigma*(1 - sigma)"),
            _ => "0".to_string(),
        };
        CertifiedInstance::certify(
            parse_with_s(&h, 1, s).unwrap(),
            ModifierMap::one_point(parse(&theta, 1).unwrap()),
            d.clone(),
            plan,
            &tol,
        )
        .ok()
    };
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < 50 * n, "could not generate certified pairs");
        let s = if attempts % 2 == 0 { 1.0 } else { 0.5 };
        let plan = SamplePlan::new(s, seed + attempts as u64).unwrap().with_pairs(plan_pairs);
        if let (Some(a), Some(b)) = (draw(s, &plan), draw(s, &plan)) {
            out.push((a, b, plan));
        }
    }
    out
}

/// `(name, h, theta, s, domain, expected certified)`.
pub fn equivalence_fixtures() -> Vec<(&'static str, Expr, ModifierMap, f64, BoxDomain, bool)> {
    let names_certified = ["worked_example", "square", "bowl_2d", "abs_half"];
    let names_refuted = ["negative_square", "cube", "tent_half", "saddle"];
    let insts = corpus();
    names_certified
        .iter()
        .map(|n| (*n, true))
        .chain(names_refuted.iter().map(|n| (*n, false)))
        .map(|(n, cert)| {
            let i = insts.iter().find(|i| i.name == n).unwrap();
            (i.name, i.h_expr(), i.theta_map(), i.s, i.domain(), cert)
        })
        .collect()
}

/// Certified instances whose gradient-inequality hypotheses hold:
/// `(name, h, theta, s, domain)`.
pub fn gradient_fixtures() -> Vec<(&'static str, Expr, ModifierMap, f64, BoxDomain)> {
    let one = |t: &str, m: usize| ModifierMap::one_point(parse(t, m).unwrap());
    vec![
        (
            "worked_example_off_singularity",
            parse_with_s("((x1-1)^2+(x1-1))^s", 1, 0.5).unwrap(),
            one("sigma*(2*x1+6)", 1),
            0.5,
            BoxDomain::interval(1.1, 10.0).unwrap(),
        ),
        ("square", parse("x1^2", 1).unwrap(), ModifierMap::zero(), 1.0, BoxDomain::interval(-5.0, 5.0).unwrap()),
        (
            "square_plus_one",
            parse("x1^2 + 1", 1).unwrap(),
            one("sigma", 1),
            1.0,
            BoxDomain::interval(-3.0, 3.0).unwrap(),
        ),
        (
            "bowl_2d",
            parse("x1^2 + x2^2 + 1", 2).unwrap(),
            one("sigma*(x1 + x2 + 1)", 2),
            0.5,
            BoxDomain::new(vec![0.0, 0.0], vec![3.0, 3.0]).unwrap(),
        ),
        (
            "shifted_bowl_2d",
            parse("(x1-1)^2 + x2^2", 2).unwrap(),
            ModifierMap::zero(),
            1.0,
            BoxDomain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        ),
        (
            "exp_quadratic",
            parse("exp(x1) + x1^2", 1).unwrap(),
            one("sigma*(1-sigma)*x1^2", 1),
            1.0,
            BoxDomain::interval(-1.0, 2.0).unwrap(),
        ),
    ]
}
