//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use nalgebra::{dmatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pdfbf_core::cli::schema::SmoothSpec;
use pdfbf_core::cli::templates::{self, example18_matrix, lasso};
use pdfbf_core::cli::{ProblemFile, TEMPLATE_NAMES};
use pdfbf_core::fbf::{
    assemble_m, assemble_q, compute_beta, fbf_step, fbf_step_compact, solve, Block, ErrorInjector,
    GammaSchedule, PrimalDualState, ProblemSpec, ProductErrors, StepPolicy, StoppingRule,
};
use pdfbf_core::linalg::{LinearOperator, Space, Vector};
use pdfbf_core::minimize::{prox_fbf_step, solve_minimization, MinimizeOptions};
use pdfbf_core::operators::{
    check_monotone, parallel_sum_resolvent_pair, LipschitzOperator, ResolventOperator,
};
use pdfbf_core::oracle::{soft_threshold_oracle, subgradient_oracle};
use pdfbf_core::prox::moreau_residual;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn all_templates() -> Vec<(String, ProblemFile)> {
    let mut out: Vec<_> = TEMPLATE_NAMES
        .iter()
        .map(|n| (n.to_string(), templates::template(n).unwrap()))
        .collect();
    out.push(("lasso".into(), shipped_lasso()));
    out
}

fn shipped_lasso() -> ProblemFile {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems/lasso.json");
    ProblemFile::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let file = templates::template("example18").unwrap();
    let built = file.build().map_err(|e| e.to_string())?;
    let stop = StoppingRule::default().with_max_iter(20_000);
    let t0 = Instant::now();
    let report = solve(
        &built.problem,
        &built.policy,
        &ErrorInjector::none(),
        PrimalDualState::zeros(&built.problem),
        &stop,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();

    // Independent check: subgradient descent on the primal objective with the
    // ball constraint replaced by an exact penalty.
    let l2 = example18_matrix();
    let c = match &file.h {
        SmoothSpec::SquaredNorm { center: Some(c), .. } => Vector::from_vec(c.clone()),
        _ => return Err("unexpected h".into()),
    };
    let r2 = Vector::from_vec(file.blocks[1].r.clone().unwrap());
    let penalty = 5.0;
    let objective = |x: &Vector| {
        let w = &l2 * x - &r2;
        0.5 * (x - &c).norm_squared() + x.lp_norm(1) + penalty * (w.norm() - 1.0).max(0.0)
    };
    let subgradient = |x: &Vector| {
        let w = &l2 * x - &r2;
        let mut s = x - &c + x.map(|t| if t == 0.0 { 0.0 } else { t.signum() });
        let nw = w.norm();
        if nw > 1.0 {
            s += l2.transpose() * (w * (penalty / nw));
        }
        s
    };
    let oracle = subgradient_oracle(&objective, &subgradient, &Vector::zeros(5), 100_000);
    let err = (&report.final_state.x - &oracle).amax();
    check(
        report.converged() && err <= 1e-3 && report.kkt <= 1e-7 && report.iterations <= 20_000 && elapsed < 5.0,
        format!(
            "|x - oracle| = {err:.2e}, kkt = {:.2e}, {} iterations, {elapsed:.3} s",
            report.kkt, report.iterations
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = common::gauss(&mut rng, 8) * 2.0;
    let lambda = 0.7;
    let built = lasso(&b, lambda).build().map_err(|e| e.to_string())?;
    let options = MinimizeOptions {
        policy: Some(built.policy.clone()),
        stop: StoppingRule::default().with_tol(1e-12).with_max_iter(20_000),
        objective_every: 0,
        ..MinimizeOptions::default()
    };
    let report = solve_minimization(&built.minimization, &options).map_err(|e| e.to_string())?;
    let exact = soft_threshold_oracle(&b, lambda).map_err(|e| e.to_string())?;
    let err = (&report.solve.final_state.x - &exact).amax();
    let gap = report.objectives.map(|o| o.gap).unwrap_or(f64::INFINITY);
    check(
        err <= 1e-8 && gap.abs() <= 1e-6,
        format!("|x - soft threshold| = {err:.2e}, gap = {gap:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mspec = common::random_minimization(seed);
        let spec = mspec.to_problem_spec().map_err(|e| e.to_string())?;
        let gamma = StepPolicy::default_for(&spec).unwrap().gamma(0).unwrap();
        let m_op = assemble_m(&spec);
        let q_op = assemble_q(&spec).map_err(|e| e.to_string())?;
        let layout = spec.layout();
        let injector = ErrorInjector::none();
        let init = common::random_state(&spec, seed + 1000, 1.0);
        let (mut expanded, mut direct) = (init.clone(), init.clone());
        let mut compact = init.flatten();
        for n in 0..50 {
            let errors = injector.at(n);
            expanded = fbf_step(&spec, &expanded, gamma, &errors, None)
                .map_err(|e| format!("seed {seed}: {e}"))?
                .0;
            compact = fbf_step_compact(&m_op, &q_op, &compact, gamma, &ProductErrors::from_iteration(&spec, &errors)).next;
            direct = prox_fbf_step(&mspec, &direct, gamma);
            let e = expanded.flatten();
            let c = PrimalDualState::from_flat(&layout, &compact, n + 1).unwrap().flatten();
            worst = worst.max((&e - &c).amax()).max((&e - direct.flatten()).amax());
        }
        if !worst.is_finite() {
            return Err(format!("seed {seed}: non-finite deviation"));
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e} over 100 instances x 50 iterations"))
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, file) in all_templates() {
        let built = file.build().map_err(|e| e.to_string())?;
        let sol = built.reference.clone().unwrap();
        let gamma = built.policy.gamma(0).unwrap();
        let (next, _) = fbf_step(&built.problem, &sol, gamma, &ErrorInjector::none().at(0), None)
            .map_err(|e| e.to_string())?;
        let moved = (next.flatten() - sol.flatten()).amax();
        let report = solve(&built.problem, &built.policy, &ErrorInjector::none(), sol, &built.stop)
            .map_err(|e| e.to_string())?;
        ok &= moved <= 1e-10 && report.converged() && report.iterations == 1;
        lines.push(format!("{name}: moved {moved:.1e}, n = {}", report.iterations));
    }
    check(ok, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let mut worst_inner = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 0..10u64 {
        let spec = common::random_minimization(500 + seed)
            .to_problem_spec()
            .map_err(|e| e.to_string())?;
        let beta = compute_beta(&spec).map_err(|e| e.to_string())?;
        let report = check_monotone(&assemble_q(&spec).map_err(|e| e.to_string())?, 1000, seed);
        worst_inner = worst_inner.min(report.min_inner);
        worst_excess = worst_excess.max(report.max_ratio - beta);
    }
    check(
        worst_inner >= -1e-9 && worst_excess <= 1e-9,
        format!("min inner {worst_inner:.2e}, max ratio - beta {worst_excess:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for k in 0..200 {
        let space = Space::new(1 + k % 5).unwrap();
        let catalog = common::prox_catalog(space, &mut rng);
        if worst.is_empty() {
            worst = catalog.iter().map(|(n, _)| (*n, 0.0)).collect();
        }
        let y = common::gauss(&mut rng, space.dim()) * 3.0;
        for (slot, (_, f)) in worst.iter_mut().zip(&catalog) {
            for gamma in [0.1, 1.0, 10.0] {
                slot.1 = slot.1.max(moreau_residual(f, gamma, &y));
            }
        }
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let names: Vec<_> = worst.iter().map(|w| w.0).collect();
    check(max <= 1e-11, format!("max residual {max:.2e} over {}", names.join(",")))
}

fn criterion_7() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, file) in all_templates() {
        let built = file.build().map_err(|e| e.to_string())?;
        let run = |injector: &ErrorInjector| {
            solve(
                &built.problem,
                &built.policy,
                injector,
                PrimalDualState::zeros(&built.problem),
                &built.stop,
            )
        };
        let clean = run(&ErrorInjector::none()).map_err(|e| e.to_string())?;
        let decay = run(&ErrorInjector::decay(&built.problem, 0.1, 7)).map_err(|e| e.to_string())?;
        let spike = run(&ErrorInjector::spike(&built.problem, 10.0, 7)).map_err(|e| e.to_string())?;
        let dx = (&spike.final_state.x - &clean.final_state.x).amax();
        ok &= clean.converged() && decay.converged() && spike.converged();
        ok &= decay.kkt <= 10.0 * clean.kkt && dx <= 1e-6;
        lines.push(format!(
            "{name}: kkt {:.1e} vs {:.1e}, spike dx {dx:.1e}",
            decay.kkt, clean.kkt
        ));
    }
    check(ok, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, file) in all_templates() {
        let built = file.build().map_err(|e| e.to_string())?;
        let report = solve(
            &built.problem,
            &built.policy,
            &ErrorInjector::none(),
            PrimalDualState::zeros(&built.problem),
            &built.stop,
        )
        .map_err(|e| e.to_string())?;
        if !report.converged() {
            continue;
        }
        let frac = report.tail_fraction();
        ok &= frac <= 0.01;
        lines.push(format!("{name}: {frac:.1e}"));
    }
    check(ok && !lines.is_empty(), format!("tail share {}", lines.join(", ")))
}

/// `A = C = 0`, one block with `B⁻¹ = 0`, `D⁻¹ = 0` and `L` a quarter turn:
/// the product operator is purely skew.
fn skew_instance() -> ProblemSpec {
    let h = Space::new(2).unwrap();
    let pair = parallel_sum_resolvent_pair(ResolventOperator::zero(h).inverse(), LipschitzOperator::zero(h)).unwrap();
    let rot = LinearOperator::dense(dmatrix![0.0, -1.0; 1.0, 0.0]).unwrap().with_norm(1.0);
    let blk = Block::new(pair, rot, h.zeros()).unwrap();
    ProblemSpec::new(h, h.zeros(), ResolventOperator::zero(h), LipschitzOperator::zero(h), vec![blk]).unwrap()
}

fn residuals(spec: &ProblemSpec, gamma: f64, iterations: usize) -> Vec<f64> {
    let mut state = PrimalDualState::new(DVector::from_vec(vec![1.0, 0.5]), vec![DVector::from_vec(vec![-0.3, 0.8])]);
    let mut out = Vec::new();
    for n in 0..iterations {
        let (next, ws) = fbf_step(spec, &state, gamma, &ErrorInjector::none().at(n), None).unwrap();
        let dual: f64 = state.v.iter().zip(&ws.p2).map(|(v, p)| (v - p).norm_squared()).sum();
        out.push(((&state.x - &ws.p1).norm_squared() + dual).sqrt());
        state = next;
    }
    out
}

fn criterion_9() -> Outcome {
    let spec = skew_instance();
    let policy = StepPolicy::default_for(&spec).map_err(|e| e.to_string())?;
    let (_, upper) = policy.bounds();
    let doubled = 2.0 * upper;
    let bad = residuals(&spec, doubled, 40);
    let non_decreasing = bad.windows(2).all(|w| w[1] >= w[0]);
    let good = residuals(&spec, 0.5 * upper, 40);
    let decreasing = good.windows(2).all(|w| w[1] < w[0]);
    let rejected_constant = StepPolicy::constant(&spec, doubled).is_err();
    let schedule = GammaSchedule::Sequence(std::sync::Arc::new(move |_| doubled));
    let rejected_sequence = match StepPolicy::new(policy.beta(), policy.epsilon(), schedule) {
        Err(_) => true,
        Ok(p) => solve(&spec, &p, &ErrorInjector::none(), PrimalDualState::zeros(&spec), &StoppingRule::default()).is_err(),
    };
    check(
        non_decreasing && decreasing && rejected_constant && rejected_sequence,
        format!(
            "doubled step: residual {:.2e} -> {:.2e}; half step: {:.2e} -> {:.2e}; guard rejects {}",
            bad[0],
            bad[bad.len() - 1],
            good[0],
            good[good.len() - 1],
            rejected_constant && rejected_sequence
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let problem = dir.path().join("example18.json");
    std::fs::write(&problem, templates::template("example18").unwrap().to_json()).map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    for k in 0..2 {
        let trace = dir.path().join(format!("trace{k}.csv"));
        let out = dir.path().join(format!("out{k}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_pdfbf"))
            .arg("solve")
            .arg(&problem)
            .args(["--inject", "decay", "--seed", "11", "--trace"])
            .arg(&trace)
            .arg("--output")
            .arg(&out)
            .stderr(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("solve exited with {status}"));
        }
        traces.push((std::fs::read(&trace).unwrap(), std::fs::read(&out).unwrap()));
    }
    let rows = traces[0].0.iter().filter(|&&b| b == b'\n').count();
    check(
        traces[0] == traces[1] && rows > 1,
        format!("{rows} trace lines and result JSON identical across runs"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-block quadratic data fit vs subgradient oracle", criterion_1),
        ("LASSO vs soft thresholding", criterion_2),
        ("compact, expanded and prox recursions agree", criterion_3),
        ("stationarity at reference solutions", criterion_4),
        ("Q monotone and beta-Lipschitz", criterion_5),
        ("Moreau decomposition over the prox catalog", criterion_6),
        ("error tolerance under injected errors", criterion_7),
        ("residual tail share", criterion_8),
        ("step bound violation on a skew instance", criterion_9),
        ("deterministic traces", criterion_10),
    ];
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2}: PASS  {title}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {title}: {detail}", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
