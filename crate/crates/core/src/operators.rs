//! Monotone operators as the solver sees them.
//!
//! A set-valued maximally monotone operator `B` is only ever touched through
//! its resolvent `J_{γB} = (Id + γB)⁻¹`; a single-valued monotone Lipschitz
//! operator is evaluated forward. The parallel sum `B □ D` is never formed:
//! a [`ParallelSumBlock`] keeps `B` (through `J_{γB⁻¹}`) and `D⁻¹` side by
//! side, which is all the splitting recursion needs.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, gaussian_vector, norm, Space, Vector};
use crate::prox::{prox_conjugate, ProxFunction, ProxFn, SmoothFunction};

pub const MONOTONE_TOL: f64 = 1e-9;
pub const LIPSCHITZ_TOL: f64 = 1e-9;
pub const FIRM_TOL: f64 = 1e-9;

type ForwardFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A maximally monotone operator known through its resolvent.
#[derive(Clone)]
pub struct ResolventOperator {
    space: Space,
    resolvent: ProxFn,
    inverse_resolvent: Option<ProxFn>,
}

impl fmt::Debug for ResolventOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventOperator")
            .field("space", &self.space)
            .field("inverse_resolvent", &self.inverse_resolvent.is_some())
            .finish()
    }
}

impl ResolventOperator {
    pub fn new<R>(space: Space, resolvent: R) -> Self
    where
        R: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        ResolventOperator {
            space,
            resolvent: Arc::new(resolvent),
            inverse_resolvent: None,
        }
    }

    /// Supply `J_{γB⁻¹}` directly instead of deriving it from `J_{γB}`.
    pub fn with_inverse_resolvent<R>(mut self, inverse: R) -> Self
    where
        R: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.inverse_resolvent = Some(Arc::new(inverse));
        self
    }

    /// `B = 0`: resolvent is the identity, `J_{γB⁻¹} = 0`.
    pub fn zero(space: Space) -> Self {
        Self::new(space, |_, y| y.clone()).with_inverse_resolvent(|_, y| Vector::zeros(y.len()))
    }

    /// `B = Id`: `J_{γB}(y) = y/(1+γ)`, and `B⁻¹ = Id`.
    pub fn identity(space: Space) -> Self {
        Self::new(space, |g, y| y / (1.0 + g)).with_inverse_resolvent(|g, y| y / (1.0 + g))
    }

    /// `B = ∂f`, so `J_{γB} = prox_{γf}` and `J_{γB⁻¹} = prox_{γf*}`.
    pub fn subdifferential(f: &ProxFunction) -> Self {
        let space = f.space();
        let op = ResolventOperator {
            space,
            resolvent: f.prox_fn(),
            inverse_resolvent: None,
        };
        let g = f.clone();
        op.with_inverse_resolvent(move |gamma, y| prox_conjugate(&g, gamma, y))
    }

    /// `B = A⁻¹`: swaps the roles of the two resolvents.
    pub fn inverse(&self) -> Self {
        let forward = self.clone();
        let backward = self.clone();
        ResolventOperator::new(self.space, move |g, y| resolvent_of_inverse(&forward, g, y))
            .with_inverse_resolvent(move |g, y| backward.resolvent(g, y))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn resolvent(&self, gamma: f64, y: &Vector) -> Vector {
        (self.resolvent)(gamma, y)
    }

    pub fn has_inverse_resolvent(&self) -> bool {
        self.inverse_resolvent.is_some()
    }
}

/// `J_{γB⁻¹}(y)`: the directly supplied inverse resolvent if there is one,
/// otherwise `y − γ·J_{γ⁻¹B}(γ⁻¹y)`.
pub fn resolvent_of_inverse(b: &ResolventOperator, gamma: f64, y: &Vector) -> Vector {
    match &b.inverse_resolvent {
        Some(inv) => inv(gamma, y),
        None => resolvent_of_inverse_formula(b, gamma, y),
    }
}

/// `y − γ·J_{γ⁻¹B}(γ⁻¹y)`, ignoring any supplied inverse resolvent.
pub fn resolvent_of_inverse_formula(b: &ResolventOperator, gamma: f64, y: &Vector) -> Vector {
    y - b.resolvent(1.0 / gamma, &(y / gamma)) * gamma
}

/// Yosida approximation `(y − J_{ρB}(y))/ρ`.
pub fn yosida(b: &ResolventOperator, rho: f64, y: &Vector) -> Vector {
    (y - b.resolvent(rho, y)) / rho
}

/// A single-valued monotone operator with a declared Lipschitz constant.
#[derive(Clone)]
pub struct LipschitzOperator {
    space: Space,
    apply: ForwardFn,
    lipschitz: f64,
}

impl fmt::Debug for LipschitzOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzOperator")
            .field("space", &self.space)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl LipschitzOperator {
    pub fn new<F>(space: Space, apply: F, lipschitz: f64) -> Result<Self>
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Config(
                "Lipschitz constant must be finite and nonnegative".into(),
            ));
        }
        Ok(LipschitzOperator {
            space,
            apply: Arc::new(apply),
            lipschitz,
        })
    }

    pub fn zero(space: Space) -> Self {
        LipschitzOperator {
            space,
            apply: Arc::new(|x: &Vector| Vector::zeros(x.len())),
            lipschitz: 0.0,
        }
    }

    pub fn scaled_identity(space: Space, scale: f64) -> Result<Self> {
        Self::new(space, move |x| x * scale, scale.abs())
    }

    /// `x ↦ Mx` for a square matrix. The Lipschitz constant is the spectral
    /// norm; monotonicity needs `M + Mᵀ ⪰ 0` and is left to [`check_monotone`].
    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::shape("square operator", matrix.nrows(), matrix.ncols()));
        }
        let space = Space::new(matrix.nrows())?;
        let lipschitz = matrix.singular_values().max();
        Self::new(space, move |x| &matrix * x, lipschitz)
    }

    pub fn gradient_of(h: &SmoothFunction) -> Self {
        LipschitzOperator {
            space: h.space(),
            apply: h.gradient_fn(),
            lipschitz: h.lipschitz(),
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.apply)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// The pair `(B, D⁻¹)` standing in for the parallel sum `B □ D`.
#[derive(Debug, Clone)]
pub struct ParallelSumBlock {
    pub b: ResolventOperator,
    pub d_inv: LipschitzOperator,
}

impl ParallelSumBlock {
    pub fn space(&self) -> Space {
        self.b.space()
    }

    /// `ν` in the step-size bound.
    pub fn nu(&self) -> f64 {
        self.d_inv.lipschitz()
    }
}

pub fn parallel_sum_resolvent_pair(
    b: ResolventOperator,
    d_inv: LipschitzOperator,
) -> Result<ParallelSumBlock> {
    if b.space() != d_inv.space() {
        return Err(Error::shape(
            "parallel sum spaces",
            b.space().dim(),
            d_inv.space().dim(),
        ));
    }
    Ok(ParallelSumBlock { b, d_inv })
}

#[derive(Debug, Clone)]
pub enum PropertyViolation {
    Monotone { inner: f64, x: Vector, y: Vector },
    Lipschitz { ratio: f64, x: Vector, y: Vector },
}

impl PropertyViolation {
    pub fn name(&self) -> &'static str {
        match self {
            PropertyViolation::Monotone { .. } => "monotone",
            PropertyViolation::Lipschitz { .. } => "lipschitz",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub samples: usize,
    /// Smallest `<x−y, Tx−Ty>` seen.
    pub min_inner: f64,
    /// Largest `‖Tx−Ty‖/‖x−y‖` seen.
    pub max_ratio: f64,
    pub declared_lipschitz: f64,
    pub violation: Option<PropertyViolation>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Sample `samples` Gaussian pairs and record the worst monotonicity and
/// Lipschitz behaviour of `op`.
pub fn check_monotone(op: &LipschitzOperator, samples: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.space().dim();
    let mut min_inner = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut worst_mono: Option<(f64, Vector, Vector)> = None;
    let mut worst_lip: Option<(f64, Vector, Vector)> = None;
    for k in 0..samples.max(1) {
        let scale = [0.1, 1.0, 10.0][k % 3];
        let x = gaussian_vector(&mut rng, n) * scale;
        let y = gaussian_vector(&mut rng, n) * scale;
        let d = &x - &y;
        let td = op.apply(&x) - op.apply(&y);
        let ip = dot(&d, &td);
        let dn = norm(&d);
        let ratio = if dn > 0.0 { norm(&td) / dn } else { 0.0 };
        if ip < min_inner {
            min_inner = ip;
            worst_mono = Some((ip, x.clone(), y.clone()));
        }
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_lip = Some((ratio, x, y));
        }
    }
    let violation = if min_inner < -MONOTONE_TOL {
        worst_mono.map(|(inner, x, y)| PropertyViolation::Monotone { inner, x, y })
    } else if max_ratio > op.lipschitz() + LIPSCHITZ_TOL {
        worst_lip.map(|(ratio, x, y)| PropertyViolation::Lipschitz { ratio, x, y })
    } else {
        None
    };
    MonotonicityReport {
        samples: samples.max(1),
        min_inner,
        max_ratio,
        declared_lipschitz: op.lipschitz(),
        violation,
    }
}

/// Largest violation of `‖Jy − Jy'‖² ≤ <y − y', Jy − Jy'>` over random pairs
/// and `γ ∈ {0.1, 1, 10}`.
pub fn firm_nonexpansiveness_violation(op: &ResolventOperator, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.space().dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let y = gaussian_vector(&mut rng, n) * 3.0;
        let y2 = gaussian_vector(&mut rng, n) * 3.0;
        for gamma in [0.1, 1.0, 10.0] {
            let d = op.resolvent(gamma, &y) - op.resolvent(gamma, &y2);
            worst = worst.max(dot(&d, &d) - dot(&(&y - &y2), &d));
        }
    }
    worst
}
