use super::policy::{ErrorInjector, StepPolicy};
use super::problem::ProblemSpec;
use super::step::{fbf_step, EvaluationCounts, PrimalDualState};
use crate::error::{Error, Result};
use crate::linalg::{norm, Vector};
use crate::operators::resolvent_of_inverse;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    /// Stop once `max(‖x_n − p1_n‖, max_i ‖v_{i,n} − p2_{i,n}‖) ≤ tol·(1 + ‖x_n‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the KKT residual every `kkt_every` iterations; 0 disables it.
    pub kkt_every: usize,
    pub kkt_gamma: f64,
    pub divergence_bound: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            tol: 1e-8,
            max_iter: 100_000,
            kkt_every: 1,
            kkt_gamma: 1.0,
            divergence_bound: 1e12,
        }
    }
}

impl StoppingRule {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_kkt_every(mut self, every: usize) -> Self {
        self.kkt_every = every;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ResidualTolerance,
    MaxIterations,
    Diverged,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ResidualTolerance => "ResidualTolerance",
            Termination::MaxIterations => "MaxIterations",
            Termination::Diverged => "Diverged",
        }
    }
}

/// Residuals of iteration `n`, measured at `(x_n, v_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub n: usize,
    pub gamma: f64,
    pub primal: f64,
    pub dual: Vec<f64>,
    pub kkt: Option<f64>,
}

impl ResidualRecord {
    pub fn joint(&self) -> f64 {
        self.dual.iter().copied().fold(self.primal, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_state: PrimalDualState,
    pub residual_history: Vec<ResidualRecord>,
    pub termination: Termination,
    pub iterations: usize,
    /// KKT residual of `final_state` at `kkt_gamma`.
    pub kkt: f64,
    pub counts: EvaluationCounts,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::ResidualTolerance
    }

    /// Share of `Σ_n ‖x_n − p1_n‖²` contributed by the last quarter of the run.
    pub fn tail_fraction(&self) -> f64 {
        let sq: Vec<f64> = self
            .residual_history
            .iter()
            .map(|r| r.primal * r.primal)
            .collect();
        let total: f64 = sq.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let start = sq.len() - sq.len() / 4;
        sq[start..].iter().sum::<f64>() / total
    }

    /// Geometric mean contraction factor of the joint residual over the second
    /// half of the run. Diagnostic only.
    pub fn estimated_rate(&self) -> Option<f64> {
        let h = &self.residual_history;
        if h.len() < 4 {
            return None;
        }
        let mid = h.len() / 2;
        let (a, b) = (h[mid].joint(), h[h.len() - 1].joint());
        if a <= 0.0 || b <= 0.0 {
            return None;
        }
        Some((b / a).powf(1.0 / (h.len() - 1 - mid) as f64))
    }
}

pub fn solve(
    spec: &ProblemSpec,
    policy: &StepPolicy,
    injector: &ErrorInjector,
    init: PrimalDualState,
    stop: &StoppingRule,
) -> Result<SolveReport> {
    solve_with_observer(spec, policy, injector, init, stop, |_, _| {})
}

/// Like [`solve`], calling `observer(record, state_n)` after every iteration.
pub fn solve_with_observer<F>(
    spec: &ProblemSpec,
    policy: &StepPolicy,
    injector: &ErrorInjector,
    init: PrimalDualState,
    stop: &StoppingRule,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(&ResidualRecord, &PrimalDualState),
{
    policy.consistent_with(spec)?;
    injector.validate(spec)?;
    init.check(spec)?;
    if !(stop.tol >= 0.0) || !(stop.kkt_gamma > 0.0) {
        return Err(Error::Config("tol must be >= 0 and kkt_gamma > 0".into()));
    }

    let mut counts = EvaluationCounts::for_spec(spec);
    let mut history = Vec::new();
    let mut state = init;
    let mut termination = Termination::MaxIterations;

    for n in 0..stop.max_iter {
        state.n = n;
        let gamma = policy.gamma(n)?;
        let errors = injector.at(n);
        let (next, ws) = match fbf_step(spec, &state, gamma, &errors, Some(&mut counts)) {
            Ok(r) => r,
            Err(Error::NonFinite { .. }) => {
                termination = Termination::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let primal = norm(&(&state.x - &ws.p1));
        let dual: Vec<f64> = state
            .v
            .iter()
            .zip(&ws.p2)
            .map(|(v, p)| norm(&(v - p)))
            .collect();
        let kkt = (stop.kkt_every > 0 && n % stop.kkt_every == 0)
            .then(|| kkt_residual(spec, &state, stop.kkt_gamma));
        let record = ResidualRecord {
            n,
            gamma,
            primal,
            dual,
            kkt,
        };
        observer(&record, &state);
        let joint = record.joint();
        let scale = 1.0 + norm(&state.x);
        history.push(record);

        state = next;
        let size = state.norm();
        if !size.is_finite() || size > stop.divergence_bound {
            termination = Termination::Diverged;
            break;
        }
        if joint <= stop.tol * scale {
            termination = Termination::ResidualTolerance;
            break;
        }
    }

    let iterations = history.len();
    state.n = iterations;
    let kkt = kkt_residual(spec, &state, stop.kkt_gamma);
    Ok(SolveReport {
        final_state: state,
        residual_history: history,
        termination,
        iterations,
        kkt,
        counts,
    })
}

/// Fixed-point defects of the resolvent form of the primal-dual conditions:
/// `‖x − J_{γA}(x + γ(z − Σ L_i*v_i − Cx))‖` and, per block,
/// `‖v_i − J_{γB_i⁻¹}(v_i + γ(L_i x − r_i − D_i⁻¹v_i))‖`.
pub fn kkt_components(spec: &ProblemSpec, state: &PrimalDualState, gamma: f64) -> (f64, Vec<f64>) {
    let x = &state.x;
    let mut s = spec.c().apply(x);
    for (blk, vi) in spec.blocks().iter().zip(&state.v) {
        s += blk.l.apply_adjoint(vi);
    }
    let w: Vector = spec.z() - s;
    let primal = norm(&(x - spec.a().resolvent(gamma, &(x + w * gamma))));
    let blocks = spec
        .blocks()
        .iter()
        .zip(&state.v)
        .map(|(blk, vi)| {
            let t = blk.l.apply(x) - &blk.r - blk.d_inv.apply(vi);
            norm(&(vi - resolvent_of_inverse(&blk.b, gamma, &(vi + t * gamma))))
        })
        .collect();
    (primal, blocks)
}

/// Maximum of [`kkt_components`]; zero exactly at primal-dual solutions.
pub fn kkt_residual(spec: &ProblemSpec, state: &PrimalDualState, gamma: f64) -> f64 {
    let (p, b) = kkt_components(spec, state, gamma);
    b.into_iter().fold(p, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub primal_residual: f64,
    pub block_residuals: Vec<f64>,
    pub kkt: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks the dual inclusion through the joint primal-dual conditions at
/// `γ = 1`.
pub fn dual_solution_certificate(
    spec: &ProblemSpec,
    state: &PrimalDualState,
    tol: f64,
) -> CertificateReport {
    let (primal_residual, block_residuals) = kkt_components(spec, state, 1.0);
    let kkt = block_residuals.iter().copied().fold(primal_residual, f64::max);
    CertificateReport {
        primal_residual,
        block_residuals,
        kkt,
        tol,
        passed: kkt <= tol,
    }
}
