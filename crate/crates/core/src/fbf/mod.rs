//! Primal-dual forward-backward-forward splitting for monotone inclusions
//! with parallel-sum coupling.

mod policy;
mod problem;
mod solve;
mod step;

pub use policy::{
    default_epsilon, ErrorInjector, ErrorSequence, GammaSchedule, IterationErrors, StepPolicy,
};
pub use problem::{assemble_m, assemble_q, compute_beta, Block, ProblemSpec};
pub use solve::{
    dual_solution_certificate, kkt_components, kkt_residual, solve, solve_with_observer,
    CertificateReport, ResidualRecord, SolveReport, StoppingRule, Termination,
};
pub use step::{
    fbf_step, fbf_step_compact, CompactStep, EvaluationCounts, IterationWorkspace,
    PrimalDualState, ProductErrors,
};
