use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::problem::{compute_beta, ProblemSpec};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_vector, norm, Space, Vector};

#[derive(Clone)]
pub enum GammaSchedule {
    Constant(f64),
    Sequence(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for GammaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSchedule::Constant(g) => write!(f, "Constant({g})"),
            GammaSchedule::Sequence(_) => write!(f, "Sequence(..)"),
        }
    }
}

/// Step sizes `γ_n ∈ [ε, (1−ε)/β]` with `ε ∈ ]0, 1/(β+1)[`.
#[derive(Debug, Clone)]
pub struct StepPolicy {
    beta: f64,
    epsilon: f64,
    schedule: GammaSchedule,
}

impl StepPolicy {
    /// Constant maximal step `(1−ε)/β` with `ε = min(1e-6, 0.5/(β+1))`.
    pub fn default_for(spec: &ProblemSpec) -> Result<Self> {
        let beta = compute_beta(spec)?;
        let epsilon = default_epsilon(beta);
        Self::new(beta, epsilon, GammaSchedule::Constant((1.0 - epsilon) / beta))
    }

    pub fn constant(spec: &ProblemSpec, gamma: f64) -> Result<Self> {
        let beta = compute_beta(spec)?;
        Self::new(beta, default_epsilon(beta), GammaSchedule::Constant(gamma))
    }

    pub fn new(beta: f64, epsilon: f64, schedule: GammaSchedule) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0 / (beta + 1.0)) {
            return Err(Error::Config(format!(
                "epsilon {epsilon} outside ]0, 1/(beta+1)["
            )));
        }
        let policy = StepPolicy {
            beta,
            epsilon,
            schedule,
        };
        if let GammaSchedule::Constant(g) = policy.schedule {
            policy.check(g)?;
        }
        Ok(policy)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.epsilon, (1.0 - self.epsilon) / self.beta)
    }

    fn check(&self, gamma: f64) -> Result<f64> {
        let (lower, upper) = self.bounds();
        if gamma >= lower && gamma <= upper {
            Ok(gamma)
        } else {
            Err(Error::StepOutOfBounds {
                gamma,
                lower,
                upper,
            })
        }
    }

    /// `γ_n`, rejected if it leaves the admissible interval.
    pub fn gamma(&self, n: usize) -> Result<f64> {
        match &self.schedule {
            GammaSchedule::Constant(g) => self.check(*g),
            GammaSchedule::Sequence(f) => self.check(f(n)),
        }
    }

    pub(crate) fn consistent_with(&self, spec: &ProblemSpec) -> Result<()> {
        let beta = compute_beta(spec)?;
        if (beta - self.beta).abs() > 1e-12 * beta.max(1.0) {
            return Err(Error::Config(format!(
                "policy beta {} does not match problem beta {beta}",
                self.beta
            )));
        }
        Ok(())
    }
}

pub fn default_epsilon(beta: f64) -> f64 {
    f64::min(1e-6, 0.5 / (beta + 1.0))
}

/// An absolutely summable error sequence `(e_n)` in one space.
#[derive(Clone, Default)]
pub enum ErrorSequence {
    #[default]
    Zero,
    /// `e_n = scale/(n+1)² · direction`, `direction` a unit vector.
    Decay { scale: f64, direction: Vector },
    /// Nonzero only at the listed iterations.
    Finite(Vec<(usize, Vector)>),
    /// Arbitrary sequence with a declared bound on `Σ‖e_n‖`.
    Custom {
        at: Arc<dyn Fn(usize) -> Option<Vector> + Send + Sync>,
        budget: f64,
    },
}

impl fmt::Debug for ErrorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSequence::Zero => write!(f, "Zero"),
            ErrorSequence::Decay { scale, .. } => write!(f, "Decay({scale})"),
            ErrorSequence::Finite(v) => write!(f, "Finite({} terms)", v.len()),
            ErrorSequence::Custom { budget, .. } => write!(f, "Custom(budget {budget})"),
        }
    }
}

impl ErrorSequence {
    pub fn at(&self, n: usize) -> Option<Vector> {
        match self {
            ErrorSequence::Zero => None,
            ErrorSequence::Decay { scale, direction } => {
                let k = (n + 1) as f64;
                Some(direction * (scale / (k * k)))
            }
            ErrorSequence::Finite(terms) => terms
                .iter()
                .find(|(k, _)| *k == n)
                .map(|(_, e)| e.clone()),
            ErrorSequence::Custom { at, .. } => at(n),
        }
    }

    /// Upper bound on `Σ_n ‖e_n‖`.
    pub fn budget(&self) -> f64 {
        match self {
            ErrorSequence::Zero => 0.0,
            ErrorSequence::Decay { scale, direction } => {
                scale.abs() * norm(direction) * std::f64::consts::PI.powi(2) / 6.0
            }
            ErrorSequence::Finite(terms) => terms.iter().map(|(_, e)| norm(e)).sum(),
            ErrorSequence::Custom { budget, .. } => *budget,
        }
    }

    fn check(&self, space: Space, what: &str) -> Result<()> {
        match self {
            ErrorSequence::Decay { direction, .. } => space.check(direction, what),
            ErrorSequence::Finite(terms) => terms.iter().try_for_each(|(_, e)| space.check(e, what)),
            ErrorSequence::Custom { budget, .. } if !budget.is_finite() => {
                Err(Error::Config(format!("{what}: error budget must be finite")))
            }
            _ => Ok(()),
        }
    }
}

/// Error sequences `a_{1,n}, b_{1,n}, c_{1,n}` in `H` and `a_{2,i,n}, b_{2,i,n},
/// c_{2,i,n}` in each `G_i`. All zero by default.
#[derive(Debug, Clone, Default)]
pub struct ErrorInjector {
    pub a1: ErrorSequence,
    pub b1: ErrorSequence,
    pub c1: ErrorSequence,
    pub a2: Vec<ErrorSequence>,
    pub b2: Vec<ErrorSequence>,
    pub c2: Vec<ErrorSequence>,
}

/// Errors for one iteration; `None` means exactly zero.
#[derive(Debug, Clone, Default)]
pub struct IterationErrors {
    pub a1: Option<Vector>,
    pub b1: Option<Vector>,
    pub c1: Option<Vector>,
    pub a2: Vec<Option<Vector>>,
    pub b2: Vec<Option<Vector>>,
    pub c2: Vec<Option<Vector>>,
}

impl IterationErrors {
    pub(crate) fn block(&self, seq: &[Option<Vector>], i: usize) -> Option<Vector> {
        seq.get(i).cloned().flatten()
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    let g = gaussian_vector(rng, dim);
    let n = norm(&g);
    if n > 0.0 {
        g / n
    } else {
        let mut e = Vector::zeros(dim);
        e[0] = 1.0;
        e
    }
}

impl ErrorInjector {
    pub fn none() -> Self {
        Self::default()
    }

    /// `‖·_n‖ = scale/(n+1)²` on every sequence, along seeded random unit
    /// directions.
    pub fn decay(spec: &ProblemSpec, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seq = |dim: usize| ErrorSequence::Decay {
            scale,
            direction: unit_direction(&mut rng, dim),
        };
        let h = spec.space().dim();
        let (a1, b1, c1) = (seq(h), seq(h), seq(h));
        let mut a2 = Vec::new();
        let mut b2 = Vec::new();
        let mut c2 = Vec::new();
        for blk in spec.blocks() {
            let g = blk.space().dim();
            a2.push(seq(g));
            b2.push(seq(g));
            c2.push(seq(g));
        }
        ErrorInjector {
            a1,
            b1,
            c1,
            a2,
            b2,
            c2,
        }
    }

    /// One error of norm `magnitude` in `b_{1,0}`, zero afterwards.
    pub fn spike(spec: &ProblemSpec, magnitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let direction = unit_direction(&mut rng, spec.space().dim());
        ErrorInjector {
            b1: ErrorSequence::Finite(vec![(0, direction * magnitude)]),
            ..Self::default()
        }
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let h = spec.space();
        self.a1.check(h, "a1")?;
        self.b1.check(h, "b1")?;
        self.c1.check(h, "c1")?;
        for (name, seqs) in [("a2", &self.a2), ("b2", &self.b2), ("c2", &self.c2)] {
            if seqs.len() > spec.m() {
                return Err(Error::shape(name, spec.m(), seqs.len()));
            }
            for (seq, blk) in seqs.iter().zip(spec.blocks()) {
                seq.check(blk.space(), name)?;
            }
        }
        Ok(())
    }

    /// Sum of the budgets of all sequences.
    pub fn budget(&self) -> f64 {
        [&self.a1, &self.b1, &self.c1]
            .into_iter()
            .chain(self.a2.iter())
            .chain(self.b2.iter())
            .chain(self.c2.iter())
            .map(ErrorSequence::budget)
            .sum()
    }

    pub fn at(&self, n: usize) -> IterationErrors {
        IterationErrors {
            a1: self.a1.at(n),
            b1: self.b1.at(n),
            c1: self.c1.at(n),
            a2: self.a2.iter().map(|s| s.at(n)).collect(),
            b2: self.b2.iter().map(|s| s.at(n)).collect(),
            c2: self.c2.iter().map(|s| s.at(n)).collect(),
        }
    }
}
