//! Composite minimization front-end:
//!
//! ```text
//! minimize  f(x) + Σ (g_i □ ℓ_i)(L_i x − r_i) + h(x) − <x, z>
//! ```
//!
//! together with its dual, solved through the generic [`crate::fbf`] solver
//! with `A = ∂f`, `C = ∇h`, `B_i = ∂g_i` and `D_i⁻¹ = ∇ℓ_i*`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fbf::{
    self, Block, ErrorInjector, PrimalDualState, ProblemSpec, SolveReport, StepPolicy,
    StoppingRule,
};
use crate::linalg::{dot, operator_norm, LinearOperator, Space, Vector};
use crate::operators::{parallel_sum_resolvent_pair, LipschitzOperator, ResolventOperator};
use crate::prox::{prox_conjugate, ProxFamily, ProxFunction, SmoothFamily, SmoothFunction, ValueFn};

/// One coupling term `(g □ ℓ)(L x − r)`, with `ℓ` given through `ℓ*`.
#[derive(Clone)]
pub struct MinimizationBlock {
    pub g: ProxFunction,
    pub l_star: SmoothFunction,
    pub l: LinearOperator,
    pub r: Vector,
    inf_conv: Option<ValueFn>,
}

impl fmt::Debug for MinimizationBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinimizationBlock")
            .field("g", &self.g)
            .field("l_star", &self.l_star)
            .field("l", &self.l)
            .field("r", &self.r)
            .field("inf_conv", &self.inf_conv.is_some())
            .finish()
    }
}

impl MinimizationBlock {
    pub fn new(g: ProxFunction, l_star: SmoothFunction, l: LinearOperator, r: Vector) -> Result<Self> {
        let gs = g.space();
        if l_star.space() != gs {
            return Err(Error::shape("l_star", gs.dim(), l_star.space().dim()));
        }
        if l.codomain() != gs {
            return Err(Error::shape("block operator codomain", gs.dim(), l.codomain().dim()));
        }
        gs.check(&r, "block offset r")?;
        Ok(MinimizationBlock {
            g,
            l_star,
            l,
            r,
            inf_conv: None,
        })
    }

    /// `ℓ = ι_{0}`, i.e. `ℓ* = 0`: the block is plain `g(L x − r)`.
    pub fn plain(g: ProxFunction, l: LinearOperator, r: Vector) -> Result<Self> {
        let s = g.space();
        Self::new(g, SmoothFunction::zero(s), l, r)
    }

    /// Value of `g □ ℓ` for pairs outside the built-in cases.
    pub fn with_inf_conv<V>(mut self, value: V) -> Self
    where
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.inf_conv = Some(Arc::new(value));
        self
    }

    pub fn space(&self) -> Space {
        self.g.space()
    }

    /// `(g □ ℓ)(y)`.
    pub fn inf_conv_value(&self, y: &Vector) -> Result<f64> {
        if let Some(f) = &self.inf_conv {
            return Ok(f(y));
        }
        let g_at = |p: &Vector| {
            self.g
                .value(p)
                .ok_or_else(|| Error::Unsupported("g has no value closure".into()))
        };
        match self.l_star.family() {
            SmoothFamily::Zero => g_at(y),
            // ℓ* = <·, a> means ℓ = ι_{a}
            SmoothFamily::Linear => {
                let a = self.l_star.linear_params().expect("linear parameters");
                g_at(&(y - a))
            }
            // ℓ* = (ν/2)‖· − c‖² means ℓ = <c, ·> + ‖·‖²/(2ν): a shifted Moreau envelope
            SmoothFamily::SquaredNorm => {
                let (nu, c) = self.l_star.squared_norm_params().expect("squared norm parameters");
                if nu == 0.0 {
                    return g_at(y);
                }
                let s = y + c * nu;
                let p = self.g.prox(nu, &s);
                let d = &s - &p;
                Ok(g_at(&p)? + dot(&d, &d) / (2.0 * nu) - 0.5 * nu * dot(c, c))
            }
            other => Err(Error::Unsupported(format!(
                "infimal convolution of {:?} with the conjugate of {other:?}",
                self.g.family()
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizationSpec {
    space: Space,
    z: Vector,
    f: ProxFunction,
    h: SmoothFunction,
    blocks: Vec<MinimizationBlock>,
}

impl MinimizationSpec {
    pub fn new(
        z: Vector,
        f: ProxFunction,
        h: SmoothFunction,
        blocks: Vec<MinimizationBlock>,
    ) -> Result<Self> {
        let space = f.space();
        space.check(&z, "z")?;
        if h.space() != space {
            return Err(Error::shape("h", space.dim(), h.space().dim()));
        }
        if blocks.is_empty() {
            return Err(Error::Config("at least one block is required".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.l.domain() != space {
                return Err(Error::shape(
                    format!("L_{} domain", i + 1),
                    space.dim(),
                    b.l.domain().dim(),
                ));
            }
        }
        Ok(MinimizationSpec {
            space,
            z,
            f,
            h,
            blocks,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn f(&self) -> &ProxFunction {
        &self.f
    }

    pub fn h(&self) -> &SmoothFunction {
        &self.h
    }

    pub fn blocks(&self) -> &[MinimizationBlock] {
        &self.blocks
    }

    /// The operator form: `A = ∂f`, `C = ∇h`, `B_i = ∂g_i`, `D_i⁻¹ = ∇ℓ_i*`.
    /// Missing `‖L_i‖` are estimated by power iteration.
    pub fn to_problem_spec(&self) -> Result<ProblemSpec> {
        let a = ResolventOperator::subdifferential(&self.f);
        let c = LipschitzOperator::gradient_of(&self.h);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let pair = parallel_sum_resolvent_pair(
                ResolventOperator::subdifferential(&b.g),
                LipschitzOperator::gradient_of(&b.l_star),
            )?;
            let norm = match b.l.exact_norm() {
                Some(n) => n,
                None => operator_norm(&b.l, 1e-12, 10_000)?,
            };
            if norm == 0.0 {
                return Err(Error::Config(format!("L_{} must be nonzero", i + 1)));
            }
            blocks.push(Block::new(pair, b.l.clone(), b.r.clone())?.with_norm(norm));
        }
        ProblemSpec::new(self.space, self.z.clone(), a, c, blocks)
    }

    /// `f(x) + Σ (g_i □ ℓ_i)(L_i x − r_i) + h(x) − <x, z>`.
    pub fn primal_objective(&self, x: &Vector) -> Result<f64> {
        self.space.check(x, "x")?;
        let fx = self
            .f
            .value(x)
            .ok_or_else(|| Error::Unsupported("f has no value closure".into()))?;
        let hx = self
            .h
            .value(x)
            .ok_or_else(|| Error::Unsupported("h has no value closure".into()))?;
        let mut total = fx + hx - dot(x, &self.z);
        for b in &self.blocks {
            total += b.inf_conv_value(&(b.l.apply(x) - &b.r))?;
        }
        Ok(if total.is_nan() { f64::INFINITY } else { total })
    }

    /// `(f* □ h*)(z − Σ L_i*v_i) + Σ (g_i*(v_i) + ℓ_i*(v_i) + <v_i, r_i>)`.
    pub fn dual_objective(&self, v: &[Vector]) -> Result<f64> {
        if v.len() != self.blocks.len() {
            return Err(Error::shape("dual blocks", self.blocks.len(), v.len()));
        }
        let mut u = self.z.clone();
        for (b, vi) in self.blocks.iter().zip(v) {
            b.space().check(vi, "v")?;
            u -= b.l.apply_adjoint(vi);
        }
        let mut total = self.conjugate_sum(&u)?;
        for (b, vi) in self.blocks.iter().zip(v) {
            let gs = b
                .g
                .conjugate_value(vi)
                .ok_or_else(|| Error::Unsupported("g has no conjugate value".into()))?;
            let ls = b
                .l_star
                .value(vi)
                .ok_or_else(|| Error::Unsupported("l_star has no value closure".into()))?;
            total += gs + ls + dot(vi, &b.r);
        }
        Ok(if total.is_nan() { f64::INFINITY } else { total })
    }

    /// `(f* □ h*)(u)` for the supported pairs.
    fn conjugate_sum(&self, u: &Vector) -> Result<f64> {
        let f_star = |w: &Vector| {
            self.f
                .conjugate_value(w)
                .ok_or_else(|| Error::Unsupported("f has no conjugate value".into()))
        };
        match self.h.family() {
            // h* = ι_{0}
            SmoothFamily::Zero => f_star(u),
            // h* = ι_{a}
            SmoothFamily::Linear => f_star(&(u - self.h.linear_params().expect("linear parameters"))),
            // f* □ h* = (f + h)*, attained at x̂ = prox_{f/κ}(c + u/κ)
            SmoothFamily::SquaredNorm => {
                let (kappa, c) = self.h.squared_norm_params().expect("squared norm parameters");
                if kappa == 0.0 {
                    return f_star(u);
                }
                let xh = self.f.prox(1.0 / kappa, &(c + u / kappa));
                let fx = self
                    .f
                    .value(&xh)
                    .ok_or_else(|| Error::Unsupported("f has no value closure".into()))?;
                let d = &xh - c;
                Ok(dot(&xh, u) - fx - 0.5 * kappa * dot(&d, &d))
            }
            SmoothFamily::Quadratic if self.f.family() == ProxFamily::Zero => {
                let (d, b) = self.h.quadratic_params().expect("quadratic parameters");
                let mut total = 0.0;
                for i in 0..u.len() {
                    if d[i] == 0.0 {
                        if u[i] != 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        total -= 0.5 * b[i] * b[i];
                    } else {
                        total += u[i] * u[i] / (2.0 * d[i] * d[i]) + b[i] * u[i] / d[i];
                    }
                }
                Ok(total)
            }
            other => Err(Error::Unsupported(format!(
                "conjugate of {:?} + {other:?}",
                self.f.family()
            ))),
        }
    }

    pub fn objective_report(&self, state: &PrimalDualState) -> Result<ObjectiveReport> {
        let primal = self.primal_objective(&state.x)?;
        let dual = self.dual_objective(&state.v)?;
        Ok(ObjectiveReport::new(primal, dual))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub primal: f64,
    pub dual: f64,
    /// `primal + dual`, nonnegative by weak duality.
    pub gap: f64,
}

impl ObjectiveReport {
    pub fn new(primal: f64, dual: f64) -> Self {
        ObjectiveReport {
            primal,
            dual,
            gap: primal + dual,
        }
    }
}

/// One step of the proximal recursion, written directly in terms of the
/// functions:
///
/// ```text
/// y1 = x − γ(∇h(x) + Σ L_i*v_i)
/// p1 = prox_{γf}(y1 + γz)
/// y2_i = v_i + γ(L_i x − ∇ℓ_i*(v_i))
/// p2_i = prox_{γg_i*}(y2_i − γr_i)
/// q2_i = p2_i + γ(L_i p1 − ∇ℓ_i*(p2_i))
/// v_i⁺ = v_i − y2_i + q2_i
/// q1 = p1 − γ(∇h(p1) + Σ L_i*p2_i)
/// x⁺ = x − y1 + q1
/// ```
pub fn prox_fbf_step(spec: &MinimizationSpec, state: &PrimalDualState, gamma: f64) -> PrimalDualState {
    let mut s = spec.h.gradient(&state.x);
    for (b, vi) in spec.blocks.iter().zip(&state.v) {
        s += b.l.apply_adjoint(vi);
    }
    let y1 = &state.x - s * gamma;
    let p1 = spec.f.prox(gamma, &(&y1 + &spec.z * gamma));
    let mut p2s = Vec::with_capacity(spec.blocks.len());
    let mut v_next = Vec::with_capacity(spec.blocks.len());
    for (b, vi) in spec.blocks.iter().zip(&state.v) {
        let y2 = vi + (b.l.apply(&state.x) - b.l_star.gradient(vi)) * gamma;
        let p2 = prox_conjugate(&b.g, gamma, &(&y2 - &b.r * gamma));
        let q2 = &p2 + (b.l.apply(&p1) - b.l_star.gradient(&p2)) * gamma;
        v_next.push(vi - &y2 + &q2);
        p2s.push(p2);
    }
    let mut s = spec.h.gradient(&p1);
    for (b, p2) in spec.blocks.iter().zip(&p2s) {
        s += b.l.apply_adjoint(p2);
    }
    let q1 = &p1 - s * gamma;
    PrimalDualState {
        x: &state.x - &y1 + &q1,
        v: v_next,
        n: state.n + 1,
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Defaults to the constant maximal step.
    pub policy: Option<StepPolicy>,
    pub injector: ErrorInjector,
    /// Defaults to zero.
    pub init: Option<PrimalDualState>,
    pub stop: StoppingRule,
    /// Evaluate objectives every `objective_every` iterations; 0 disables it.
    pub objective_every: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            policy: None,
            injector: ErrorInjector::none(),
            init: None,
            stop: StoppingRule::default(),
            objective_every: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizationReport {
    pub solve: SolveReport,
    /// Objectives at the final state, when they can be evaluated.
    pub objectives: Option<ObjectiveReport>,
    /// Aligned with `solve.residual_history`.
    pub objective_history: Vec<Option<ObjectiveReport>>,
}

pub fn solve_minimization(spec: &MinimizationSpec, options: &MinimizeOptions) -> Result<MinimizationReport> {
    let problem = spec.to_problem_spec()?;
    let policy = match &options.policy {
        Some(p) => p.clone(),
        None => StepPolicy::default_for(&problem)?,
    };
    let init = options
        .init
        .clone()
        .unwrap_or_else(|| PrimalDualState::zeros(&problem));
    let every = options.objective_every;
    let mut history = Vec::new();
    let solve = fbf::solve_with_observer(
        &problem,
        &policy,
        &options.injector,
        init,
        &options.stop,
        |rec, state| {
            let obj = (every > 0 && rec.n % every == 0)
                .then(|| spec.objective_report(state).ok())
                .flatten();
            history.push(obj);
        },
    )?;
    let objectives = spec.objective_report(&solve.final_state).ok();
    Ok(MinimizationReport {
        solve,
        objectives,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    use super::*;
    use crate::fbf::{fbf_step, IterationErrors, Termination};
    use crate::prox::huber_value;

    fn one() -> Space {
        Space::new(1).unwrap()
    }

    fn abs_spec() -> MinimizationSpec {
        let s = one();
        MinimizationSpec::new(
            s.zeros(),
            ProxFunction::nonneg_indicator(s),
            SmoothFunction::zero(s),
            vec![MinimizationBlock::plain(ProxFunction::l1(s, 1.0).unwrap(), LinearOperator::identity(s), s.zeros()).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn primal_objective_examples() {
        let m = abs_spec();
        assert_eq!(m.primal_objective(&dvector![1.0]).unwrap(), 1.0);
        assert_eq!(m.primal_objective(&dvector![-1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn moreau_envelope_block_is_huber() {
        let s = one();
        let blk = MinimizationBlock::new(
            ProxFunction::l1(s, 1.0).unwrap(),
            SmoothFunction::squared_norm(0.7, s.zeros()).unwrap(),
            LinearOperator::identity(s),
            s.zeros(),
        )
        .unwrap();
        for y in [-3.0, -0.5, 0.0, 0.2, 0.69, 2.0] {
            assert_abs_diff_eq!(blk.inf_conv_value(&dvector![y]).unwrap(), huber_value(y, 0.7), epsilon = 1e-14);
        }
    }

    #[test]
    fn unsupported_pair_is_reported() {
        let s = one();
        let blk = MinimizationBlock::new(
            ProxFunction::l1(s, 1.0).unwrap(),
            SmoothFunction::huber(s, 1.0).unwrap(),
            LinearOperator::identity(s),
            s.zeros(),
        )
        .unwrap();
        assert!(matches!(blk.inf_conv_value(&dvector![1.0]), Err(Error::Unsupported(_))));
        let blk = blk.with_inf_conv(|y| y[0].abs());
        assert_eq!(blk.inf_conv_value(&dvector![-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn translated_operators() {
        let s = Space::new(2).unwrap();
        let b = dvector![0.5, -3.0];
        let m = MinimizationSpec::new(
            s.zeros(),
            ProxFunction::box_indicator(dvector![0.0, 0.0], dvector![0.0, 0.0]).unwrap(),
            SmoothFunction::squared_norm(1.0, b.clone()).unwrap(),
            vec![MinimizationBlock::plain(ProxFunction::l1(s, 1.0).unwrap(), LinearOperator::identity(s), s.zeros()).unwrap()],
        )
        .unwrap();
        let p = m.to_problem_spec().unwrap();
        let x = dvector![2.0, -1.0];
        assert_eq!(p.a().resolvent(0.3, &x), dvector![0.0, 0.0]);
        assert_eq!(p.c().apply(&x), &x - &b);
        assert_eq!(p.blocks()[0].nu(), 0.0);
        assert_eq!(p.blocks()[0].d_inv.apply(&x), s.zeros());
    }

    #[test]
    fn dual_specializes_to_quadratic_fit() {
        // f = 0, h = ½‖·‖²: dual is ½‖z − L*v‖² + g*(v) + <v, r>
        let s = Space::new(2).unwrap();
        let z = dvector![1.0, -2.0];
        let r = dvector![0.3, 0.1];
        let l = LinearOperator::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let m = MinimizationSpec::new(
            z.clone(),
            ProxFunction::zero(s),
            SmoothFunction::squared_norm(1.0, s.zeros()).unwrap(),
            vec![MinimizationBlock::plain(ProxFunction::l2_norm(s, 2.0).unwrap(), l.clone(), r.clone()).unwrap()],
        )
        .unwrap();
        let v = dvector![0.5, 1.0];
        let u = &z - l.apply_adjoint(&v);
        let expect = 0.5 * u.norm_squared() + v.dot(&r);
        assert_abs_diff_eq!(m.dual_objective(&[v]).unwrap(), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(m.dual_objective(&[s.zeros()]).unwrap(), 0.5 * z.norm_squared(), epsilon = 1e-14);
    }

    #[test]
    fn direct_recursion_matches_operator_form() {
        let s = Space::new(3).unwrap();
        let g = Space::new(2).unwrap();
        let m = MinimizationSpec::new(
            dvector![0.2, -0.1, 0.4],
            ProxFunction::box_indicator(dvector![-1.0, -1.0, 0.0], dvector![1.0, 2.0, 1.0]).unwrap(),
            SmoothFunction::squared_norm(0.5, dvector![1.0, 0.0, -1.0]).unwrap(),
            vec![
                MinimizationBlock::new(
                    ProxFunction::l1(g, 0.3).unwrap(),
                    SmoothFunction::squared_norm(0.4, g.zeros()).unwrap(),
                    LinearOperator::from_rows(&[vec![1.0, -1.0, 0.5], vec![0.0, 2.0, 1.0]]).unwrap(),
                    dvector![0.1, 0.2],
                )
                .unwrap(),
                MinimizationBlock::plain(ProxFunction::l2_norm(s, 1.0).unwrap(), LinearOperator::identity(s), s.zeros()).unwrap(),
            ],
        )
        .unwrap();
        let p = m.to_problem_spec().unwrap();
        let gamma = StepPolicy::default_for(&p).unwrap().gamma(0).unwrap();
        let mut a = PrimalDualState::new(dvector![3.0, -2.0, 1.0], vec![dvector![1.0, 1.0], dvector![0.0, 0.5, -0.5]]);
        let mut b = a.clone();
        for _ in 0..50 {
            a = fbf_step(&p, &a, gamma, &IterationErrors::default(), None).unwrap().0;
            b = prox_fbf_step(&m, &b, gamma);
            assert!((a.flatten() - b.flatten()).amax() <= 1e-12);
        }
    }

    #[test]
    fn zero_cap_returns_initial_objectives() {
        let m = abs_spec();
        let init = PrimalDualState::new(dvector![2.0], vec![dvector![0.5]]);
        let opts = MinimizeOptions {
            init: Some(init.clone()),
            stop: StoppingRule::default().with_max_iter(0),
            ..Default::default()
        };
        let r = solve_minimization(&m, &opts).unwrap();
        assert_eq!(r.solve.termination, Termination::MaxIterations);
        assert_eq!(r.objectives, Some(m.objective_report(&init).unwrap()));
    }

    #[test]
    fn lasso_gap_closes() {
        let s = Space::new(4).unwrap();
        let b = dvector![2.0, -0.3, 0.9, -1.7];
        let m = MinimizationSpec::new(
            s.zeros(),
            ProxFunction::zero(s),
            SmoothFunction::squared_norm(1.0, b.clone()).unwrap(),
            vec![MinimizationBlock::plain(ProxFunction::l1(s, 0.5).unwrap(), LinearOperator::identity(s), s.zeros()).unwrap()],
        )
        .unwrap();
        let r = solve_minimization(&m, &MinimizeOptions::default()).unwrap();
        assert!(r.solve.converged());
        let obj = r.objectives.unwrap();
        assert!(obj.gap.abs() <= 1e-6, "gap {}", obj.gap);
        assert_eq!(r.objective_history.len(), r.solve.residual_history.len());
    }
}
