use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::schema::{BuiltProblem, FileError, InjectPreset, ProblemFile};
use super::templates::{describe, template, TEMPLATE_NAMES};
use crate::fbf::{assemble_q, dual_solution_certificate, Termination};
use crate::linalg::{adjoint_mismatch, gaussian_vector, norm, Vector};
use crate::minimize::{solve_minimization, MinimizationReport, MinimizeOptions};
use crate::operators::{check_monotone, firm_nonexpansiveness_violation, LipschitzOperator, ResolventOperator, PropertyViolation};
use crate::prox::{gradient_check, moreau_residual, ProxFunction, SmoothFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;
pub const EXIT_MAX_ITER: i32 = 4;
pub const EXIT_DIVERGED: i32 = 5;

pub const CERTIFICATE_TOL: f64 = 1e-6;

const ADJOINT_TOL: f64 = 1e-10;
const MOREAU_TOL: f64 = 1e-9;
const FIRM_TOL: f64 = 1e-9;
const PAIRS: usize = 1000;
const SAMPLES: usize = 100;

/// Outcome of one sampled property check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: &'static str,
    pub subject: String,
    pub passed: bool,
    pub detail: String,
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn monotone_check(op: &LipschitzOperator, subject: &str, seed: u64) -> PropertyCheck {
    let r = check_monotone(op, PAIRS, seed);
    match &r.violation {
        None => PropertyCheck {
            property: "monotone",
            subject: subject.to_string(),
            passed: true,
            detail: format!(
                "min inner {:.3e}, max ratio {:.6e} <= declared {:.6e}",
                r.min_inner, r.max_ratio, r.declared_lipschitz
            ),
        },
        Some(v) => {
            let detail = match v {
                PropertyViolation::Monotone { inner, x, y } => {
                    format!("<x-y, Tx-Ty> = {inner:.6e} at x = {}, y = {}", fmt_vec(x), fmt_vec(y))
                }
                PropertyViolation::Lipschitz { ratio, x, y } => format!(
                    "ratio {ratio:.6e} > declared {:.6e} at x = {}, y = {}",
                    r.declared_lipschitz,
                    fmt_vec(x),
                    fmt_vec(y)
                ),
            };
            PropertyCheck {
                property: v.name(),
                subject: subject.to_string(),
                passed: false,
                detail,
            }
        }
    }
}

fn moreau_check(f: &ProxFunction, subject: &str, seed: u64) -> PropertyCheck {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0;
    let mut worst_y = None;
    for _ in 0..SAMPLES {
        let y = gaussian_vector(&mut rng, f.space().dim()) * 3.0;
        for gamma in [0.1, 1.0, 10.0] {
            let r = moreau_residual(f, gamma, &y) / (1.0 + norm(&y));
            if r > worst {
                worst = r;
                worst_y = Some((gamma, y.clone()));
            }
        }
    }
    let passed = worst <= MOREAU_TOL;
    let detail = match (&worst_y, passed) {
        (Some((g, y)), false) => format!("residual {worst:.6e} at gamma {g}, y = {}", fmt_vec(y)),
        _ => format!("max relative residual {worst:.3e}"),
    };
    PropertyCheck {
        property: "moreau",
        subject: subject.to_string(),
        passed,
        detail,
    }
}

fn firm_check(op: &ResolventOperator, subject: &str, seed: u64) -> PropertyCheck {
    let w = firm_nonexpansiveness_violation(op, SAMPLES, seed);
    PropertyCheck {
        property: "firm_nonexpansive",
        subject: subject.to_string(),
        passed: w <= FIRM_TOL,
        detail: format!("max violation {w:.3e}"),
    }
}

fn gradient_property(h: &SmoothFunction, subject: &str, seed: u64) -> Option<PropertyCheck> {
    let r = gradient_check(h, SAMPLES, seed).ok()?;
    let detail = match (&r.worst_point, r.passed) {
        (Some(x), false) => format!("relative error {:.6e} at x = {}", r.max_relative_error, fmt_vec(x)),
        _ => format!("max relative error {:.3e}", r.max_relative_error),
    };
    Some(PropertyCheck {
        property: "gradient",
        subject: subject.to_string(),
        passed: r.passed,
        detail,
    })
}

/// Sampled checks of everything the solver assumes about a problem.
pub fn property_checks(built: &BuiltProblem, seed: u64) -> Vec<PropertyCheck> {
    let m = &built.minimization;
    let p = &built.problem;
    let mut out = Vec::new();
    for (i, b) in m.blocks().iter().enumerate() {
        let w = adjoint_mismatch(&b.l, SAMPLES, seed);
        out.push(PropertyCheck {
            property: "adjoint",
            subject: format!("L_{}", i + 1),
            passed: w <= ADJOINT_TOL,
            detail: format!("max relative mismatch {w:.3e}"),
        });
    }
    out.extend(gradient_property(m.h(), "h", seed));
    out.push(monotone_check(p.c(), "grad h", seed));
    out.push(moreau_check(m.f(), "f", seed));
    out.push(firm_check(p.a(), "prox f", seed));
    for (i, (b, blk)) in m.blocks().iter().zip(p.blocks()).enumerate() {
        let k = i + 1;
        out.extend(gradient_property(&b.l_star, &format!("l_star_{k}"), seed));
        out.push(monotone_check(&blk.d_inv, &format!("grad l_star_{k}"), seed));
        out.push(moreau_check(&b.g, &format!("g_{k}"), seed));
        out.push(firm_check(&blk.b, &format!("prox g_{k}"), seed));
    }
    if let Ok(q) = assemble_q(p) {
        out.push(monotone_check(&q, "Q", seed));
    }
    out
}

fn load(path: &Path) -> Result<ProblemFile, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| FileError {
        path: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    ProblemFile::from_json(&text)
}

pub fn cmd_validate(path: &Path, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let built = match load(path).and_then(|f| f.build()) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "schema error: {e}");
            return EXIT_SCHEMA;
        }
    };
    validate_built(&built, seed, out, err)
}

pub fn validate_built(built: &BuiltProblem, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let checks = property_checks(built, seed);
    let mut code = EXIT_OK;
    for c in &checks {
        if c.passed {
            let _ = writeln!(out, "ok   {:<18} {:<16} {}", c.property, c.subject, c.detail);
        } else {
            let _ = writeln!(err, "FAIL {:<18} {:<16} {}", c.property, c.subject, c.detail);
            code = EXIT_PROPERTY;
        }
    }
    code
}

#[derive(Debug, Clone, Default)]
pub struct SolveArgs {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub trace: Option<PathBuf>,
    pub trace_every: usize,
    pub seed: Option<u64>,
    pub inject: Option<InjectPreset>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: MinimizationReport,
    pub trace: Option<String>,
    pub result: serde_json::Value,
    pub exit_code: i32,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Trace CSV with header `n,gamma,primal_res,dual_res_1..m,kkt,primal_obj,dual_obj,gap`.
pub fn trace_csv(report: &MinimizationReport, m: usize, every: usize) -> String {
    let mut s = String::from("n,gamma,primal_res");
    for i in 1..=m {
        let _ = write!(s, ",dual_res_{i}");
    }
    s.push_str(",kkt,primal_obj,dual_obj,gap\n");
    let every = every.max(1);
    for (rec, obj) in report.solve.residual_history.iter().zip(&report.objective_history) {
        if rec.n % every != 0 {
            continue;
        }
        let _ = write!(s, "{},{},{}", rec.n, cell(Some(rec.gamma)), cell(Some(rec.primal)));
        for d in &rec.dual {
            let _ = write!(s, ",{}", cell(Some(*d)));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            cell(rec.kkt),
            cell(obj.map(|o| o.primal)),
            cell(obj.map(|o| o.dual)),
            cell(obj.map(|o| o.gap))
        );
    }
    s
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        serde_json::Value::Null
    }
}

/// Run a problem file with command-line overrides.
pub fn run_solve(file: &ProblemFile, args: &SolveArgs) -> Result<SolveOutcome, FileError> {
    let mut file = file.clone();
    if let Some(t) = args.tol {
        file.solver.tol = t;
    }
    if let Some(n) = args.max_iter {
        file.solver.max_iter = n;
    }
    if let Some(s) = args.seed {
        file.solver.seed = s;
    }
    if let Some(i) = args.inject {
        file.solver.inject = i;
    }
    let built = file.build()?;
    let every = args.trace_every.max(1);
    let tracing = args.trace.is_some();
    let mut stop = built.stop;
    stop.kkt_every = if tracing { every } else { 0 };
    let options = MinimizeOptions {
        policy: Some(built.policy.clone()),
        injector: file.solver.inject.injector(&built.problem, file.solver.seed),
        init: None,
        stop,
        objective_every: if tracing { every } else { 0 },
    };
    let report = solve_minimization(&built.minimization, &options).map_err(|e| FileError {
        path: "solver".into(),
        message: e.to_string(),
    })?;
    let m = built.problem.m();
    let trace = tracing.then(|| trace_csv(&report, m, every));

    let fin = &report.solve.final_state;
    let cert = dual_solution_certificate(&built.problem, fin, CERTIFICATE_TOL);
    let mut certificate = json!({
        "kkt": finite_or_null(cert.kkt),
        "primal_residual": finite_or_null(cert.primal_residual),
        "block_residuals": cert.block_residuals.iter().map(|r| finite_or_null(*r)).collect::<Vec<_>>(),
        "passed": cert.passed,
        "termination": report.solve.termination.as_str(),
    });
    if let Some(o) = report.objectives {
        certificate["primal_objective"] = finite_or_null(o.primal);
        certificate["dual_objective"] = finite_or_null(o.dual);
        certificate["gap"] = finite_or_null(o.gap);
    }
    let mut result = json!({
        "name": file.name,
        "termination": report.solve.termination.as_str(),
        "iterations": report.solve.iterations,
        "gamma": built.policy.gamma(0).ok(),
        "beta": built.policy.beta(),
        "x": fin.x.iter().copied().map(finite_or_null).collect::<Vec<_>>(),
        "v": fin.v.iter().map(|vi| vi.iter().copied().map(finite_or_null).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "certificate": certificate,
    });
    if let Some(r) = &built.reference {
        let dx = (&fin.x - &r.x).amax();
        let dv = fin.v.iter().zip(&r.v).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        result["reference_error"] = json!({ "x": finite_or_null(dx), "v": finite_or_null(dv) });
    }
    let exit_code = match report.solve.termination {
        Termination::ResidualTolerance => EXIT_OK,
        Termination::MaxIterations => EXIT_MAX_ITER,
        Termination::Diverged => EXIT_DIVERGED,
    };
    Ok(SolveOutcome {
        report,
        trace,
        result,
        exit_code,
    })
}

pub fn cmd_solve(path: &Path, args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = match load(path).and_then(|f| run_solve(&f, args)) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "schema error: {e}");
            return EXIT_SCHEMA;
        }
    };
    if let (Some(p), Some(t)) = (&args.trace, &outcome.trace) {
        if let Err(e) = std::fs::write(p, t) {
            let _ = writeln!(err, "cannot write trace {}: {e}", p.display());
            return EXIT_SCHEMA;
        }
    }
    let mut text = serde_json::to_string_pretty(&outcome.result).expect("result serializes");
    text.push('\n');
    match &args.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                let _ = writeln!(err, "cannot write output {}: {e}", p.display());
                return EXIT_SCHEMA;
            }
            let _ = writeln!(
                out,
                "{} after {} iterations, kkt {:.3e}",
                outcome.report.solve.termination.as_str(),
                outcome.report.solve.iterations,
                outcome.report.solve.kkt
            );
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    outcome.exit_code
}

pub fn cmd_templates_list(out: &mut dyn Write) -> i32 {
    for name in TEMPLATE_NAMES {
        let _ = writeln!(out, "{name:<18} {}", describe(name).unwrap_or_default());
    }
    EXIT_OK
}

pub fn cmd_templates_emit(name: &str, output: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(t) = template(name) else {
        let _ = writeln!(err, "unknown template {name:?}; available: {}", TEMPLATE_NAMES.join(", "));
        return EXIT_SCHEMA;
    };
    let text = t.to_json();
    match output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                let _ = writeln!(err, "cannot write {}: {e}", p.display());
                return EXIT_SCHEMA;
            }
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    EXIT_OK
}
