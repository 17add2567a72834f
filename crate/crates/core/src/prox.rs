//! Closed-form proximity operators and the conjugate machinery around them.
//!
//! A [`ProxFunction`] is a proper lower semicontinuous convex function known
//! through `prox_{γf}`, optionally its value, and optionally the prox and value
//! of its conjugate `f*`. Every catalog entry supplies all four in closed form,
//! so the Moreau identity is a genuine cross-check between two formulas.
//!
//! Values are extended reals: `f64::INFINITY` stands for `+∞` and absorbs in
//! sums. Indicator functions accept points within [`INDICATOR_TOL`] of their
//! set, measured relative to the set's scale.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, gaussian_vector, norm, Space, Vector};

pub const INDICATOR_TOL: f64 = 1e-6;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-6;

pub type ProxFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
pub type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Catalog tag of a [`ProxFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxFamily {
    Zero,
    Linear,
    Quadratic,
    L1,
    L2Norm,
    Box,
    Ball,
    Hyperplane,
    Nonnegative,
    ZeroSet,
    Huber,
    Custom,
}

#[derive(Clone)]
pub struct ProxFunction {
    space: Space,
    family: ProxFamily,
    prox: ProxFn,
    value: Option<ValueFn>,
    conjugate_prox: Option<ProxFn>,
    conjugate_value: Option<ValueFn>,
}

impl fmt::Debug for ProxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxFunction")
            .field("space", &self.space)
            .field("family", &self.family)
            .field("value", &self.value.is_some())
            .field("conjugate_prox", &self.conjugate_prox.is_some())
            .field("conjugate_value", &self.conjugate_value.is_some())
            .finish()
    }
}

fn within(violation: f64, scale: f64) -> bool {
    violation <= INDICATOR_TOL * (1.0 + scale)
}

fn indicator(inside: bool) -> f64 {
    if inside {
        0.0
    } else {
        f64::INFINITY
    }
}

fn soft(y: f64, t: f64) -> f64 {
    if y > t {
        y - t
    } else if y < -t {
        y + t
    } else {
        0.0
    }
}

fn block_soft(y: &Vector, t: f64) -> Vector {
    let n = norm(y);
    if n <= t {
        Vector::zeros(y.len())
    } else {
        y * (1.0 - t / n)
    }
}

fn project_ball(y: &Vector, center: &Vector, radius: f64) -> Vector {
    let d = y - center;
    let n = norm(&d);
    if n <= radius {
        y.clone()
    } else {
        center + d * (radius / n)
    }
}

impl ProxFunction {
    /// A function given only through its prox. Value and conjugate are unknown.
    pub fn from_prox<P>(space: Space, prox: P) -> Self
    where
        P: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        ProxFunction {
            space,
            family: ProxFamily::Custom,
            prox: Arc::new(prox),
            value: None,
            conjugate_prox: None,
            conjugate_value: None,
        }
    }

    pub fn with_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.value = Some(Arc::new(value));
        self
    }

    pub fn with_conjugate_prox<P>(mut self, prox: P) -> Self
    where
        P: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.conjugate_prox = Some(Arc::new(prox));
        self
    }

    pub fn with_conjugate_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.conjugate_value = Some(Arc::new(value));
        self
    }

    fn catalog(space: Space, family: ProxFamily) -> CatalogBuilder {
        CatalogBuilder { space, family }
    }

    /// `f = 0`; `f* = ι_{0}`.
    pub fn zero(space: Space) -> Self {
        Self::catalog(space, ProxFamily::Zero).build(
            |_, y| y.clone(),
            |_| 0.0,
            |_, y| Vector::zeros(y.len()),
            |u| indicator(within(u.amax(), 0.0)),
        )
    }

    /// `f = <·, a>`; `f* = ι_{a}`.
    pub fn linear(a: Vector) -> Result<Self> {
        let space = Space::new(a.len())?;
        let (a1, a2, a3) = (a.clone(), a.clone(), a.clone());
        let scale = a.amax();
        Ok(Self::catalog(space, ProxFamily::Linear).build(
            move |g, y| y - &a1 * g,
            move |x| dot(x, &a2),
            move |_, _| a3.clone(),
            move |u| indicator(within((u - &a).amax(), scale)),
        ))
    }

    /// `f = ½‖diag(d)·x − b‖²`.
    pub fn quadratic(diag: Vector, b: Vector) -> Result<Self> {
        let space = Space::new(diag.len())?;
        space.check(&b, "quadratic offset")?;
        let (d1, b1) = (diag.clone(), b.clone());
        let (d2, b2) = (diag.clone(), b.clone());
        let (d3, b3) = (diag.clone(), b.clone());
        Ok(Self::catalog(space, ProxFamily::Quadratic).build(
            move |g, y| {
                Vector::from_fn(y.len(), |i, _| {
                    (y[i] + g * d1[i] * b1[i]) / (1.0 + g * d1[i] * d1[i])
                })
            },
            move |x| {
                0.5 * x
                    .iter()
                    .zip(d2.iter().zip(b2.iter()))
                    .fold(0.0, |acc, (xi, (di, bi))| acc + (di * xi - bi).powi(2))
            },
            move |g, y| {
                Vector::from_fn(y.len(), |i, _| {
                    let (d, b) = (d3[i], b3[i]);
                    (y[i] * d * d - g * b * d) / (d * d + g)
                })
            },
            move |u| {
                let mut total = 0.0;
                for i in 0..u.len() {
                    let (d, b) = (diag[i], b[i]);
                    if d == 0.0 {
                        if !within(u[i].abs(), 0.0) {
                            return f64::INFINITY;
                        }
                        total -= 0.5 * b * b;
                    } else {
                        total += u[i] * u[i] / (2.0 * d * d) + b * u[i] / d;
                    }
                }
                total
            },
        ))
    }

    /// `f = λ‖·‖₁`; prox is soft thresholding, `f* = ι_{‖·‖∞ ≤ λ}`.
    pub fn l1(space: Space, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::Config("l1 weight must be nonnegative".into()));
        }
        Ok(Self::catalog(space, ProxFamily::L1).build(
            move |g, y| y.map(|yi| soft(yi, g * weight)),
            move |x| weight * x.iter().fold(0.0, |acc, xi| acc + xi.abs()),
            move |_, y| y.map(|yi| yi.clamp(-weight, weight)),
            move |u| indicator(within((u.amax() - weight).max(0.0), weight)),
        ))
    }

    /// `f = λ‖·‖₂`; prox is block soft thresholding, `f* = ι_{ball(0,λ)}`.
    pub fn l2_norm(space: Space, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::Config("l2 weight must be nonnegative".into()));
        }
        let origin = space.zeros();
        Ok(Self::catalog(space, ProxFamily::L2Norm).build(
            move |g, y| block_soft(y, g * weight),
            move |x| weight * norm(x),
            move |_, y| project_ball(y, &origin, weight),
            move |u| indicator(within((norm(u) - weight).max(0.0), weight)),
        ))
    }

    /// Indicator of the box `[lower, upper]` (finite bounds).
    pub fn box_indicator(lower: Vector, upper: Vector) -> Result<Self> {
        let space = Space::new(lower.len())?;
        space.check(&upper, "box upper bound")?;
        if lower
            .iter()
            .zip(upper.iter())
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::Config("box bounds must be finite with lower <= upper".into()));
        }
        let (l1, u1) = (lower.clone(), upper.clone());
        let (l2, u2) = (lower.clone(), upper.clone());
        let (l3, u3) = (lower.clone(), upper.clone());
        Ok(Self::catalog(space, ProxFamily::Box).build(
            move |_, y| Vector::from_fn(y.len(), |i, _| y[i].clamp(l1[i], u1[i])),
            move |x| {
                let inside = (0..x.len()).all(|i| {
                    let scale = l2[i].abs().max(u2[i].abs());
                    within((l2[i] - x[i]).max(x[i] - u2[i]).max(0.0), scale)
                });
                indicator(inside)
            },
            move |g, y| {
                Vector::from_fn(y.len(), |i, _| {
                    if y[i] - g * u3[i] > 0.0 {
                        y[i] - g * u3[i]
                    } else if y[i] - g * l3[i] < 0.0 {
                        y[i] - g * l3[i]
                    } else {
                        0.0
                    }
                })
            },
            move |u| {
                (0..u.len()).fold(0.0, |acc, i| acc + (lower[i] * u[i]).max(upper[i] * u[i]))
            },
        ))
    }

    /// Indicator of the closed Euclidean ball `ball(center, radius)`.
    pub fn ball_indicator(center: Vector, radius: f64) -> Result<Self> {
        let space = Space::new(center.len())?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Config("ball radius must be finite and nonnegative".into()));
        }
        let (c1, c2, c3) = (center.clone(), center.clone(), center.clone());
        Ok(Self::catalog(space, ProxFamily::Ball).build(
            move |_, y| project_ball(y, &c1, radius),
            move |x| indicator(within((norm(&(x - &c2)) - radius).max(0.0), radius)),
            move |g, y| block_soft(&(y - &c3 * g), g * radius),
            move |u| dot(&center, u) + radius * norm(u),
        ))
    }

    /// Indicator of the hyperplane `{x : <normal, x> = offset}`.
    pub fn hyperplane_indicator(normal: Vector, offset: f64) -> Result<Self> {
        let space = Space::new(normal.len())?;
        let nn = dot(&normal, &normal);
        if !(nn > 0.0) {
            return Err(Error::Config("hyperplane normal must be nonzero".into()));
        }
        let (a1, a2, a3) = (normal.clone(), normal.clone(), normal.clone());
        let a_norm = nn.sqrt();
        Ok(Self::catalog(space, ProxFamily::Hyperplane).build(
            move |_, y| y - &a1 * ((dot(&a1, y) - offset) / nn),
            move |x| indicator(within((dot(&a2, x) - offset).abs() / a_norm, offset.abs() / a_norm)),
            move |g, y| &a3 * ((dot(&a3, y) - g * offset) / nn),
            move |u| {
                let t = dot(&normal, u) / nn;
                let residual = norm(&(u - &normal * t));
                if within(residual, norm(u)) {
                    offset * t
                } else {
                    f64::INFINITY
                }
            },
        ))
    }

    /// Indicator of the nonnegative orthant; `f* = ι_{≤0}`.
    pub fn nonneg_indicator(space: Space) -> Self {
        Self::catalog(space, ProxFamily::Nonnegative).build(
            |_, y| y.map(|yi| yi.max(0.0)),
            |x| indicator(within((-x.min()).max(0.0), 0.0)),
            |_, y| y.map(|yi| yi.min(0.0)),
            |u| indicator(within(u.max().max(0.0), 0.0)),
        )
    }

    /// Indicator of `{0}`: prox is the zero map, conjugate is the zero function.
    pub fn zero_set_indicator(space: Space) -> Self {
        Self::catalog(space, ProxFamily::ZeroSet).build(
            |_, y| Vector::zeros(y.len()),
            |x| indicator(within(x.amax(), 0.0)),
            |_, y| y.clone(),
            |_| 0.0,
        )
    }

    /// Huber function with kink radius `rho`, the Moreau envelope of `‖·‖₁`
    /// with parameter `rho`.
    pub fn huber(space: Space, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config("huber radius must be positive".into()));
        }
        Ok(Self::catalog(space, ProxFamily::Huber).build(
            move |g, y| {
                y.map(|yi| {
                    if yi.abs() <= rho + g {
                        yi * rho / (rho + g)
                    } else {
                        yi - g * yi.signum()
                    }
                })
            },
            move |x| x.iter().fold(0.0, |acc, &xi| acc + huber_value(xi, rho)),
            move |g, y| y.map(|yi| (yi / (1.0 + g * rho)).clamp(-1.0, 1.0)),
            move |u| {
                if u.amax() > 1.0 + INDICATOR_TOL * 2.0 {
                    f64::INFINITY
                } else {
                    0.5 * rho * dot(u, u)
                }
            },
        ))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn family(&self) -> ProxFamily {
        self.family
    }

    /// `prox_{γf}(y)`.
    pub fn prox(&self, gamma: f64, y: &Vector) -> Vector {
        (self.prox)(gamma, y)
    }

    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    pub fn value(&self, x: &Vector) -> Option<f64> {
        self.value.as_ref().map(|v| v(x))
    }

    pub fn conjugate_value(&self, u: &Vector) -> Option<f64> {
        self.conjugate_value.as_ref().map(|v| v(u))
    }

    pub fn has_conjugate_prox(&self) -> bool {
        self.conjugate_prox.is_some()
    }

    pub(crate) fn prox_fn(&self) -> ProxFn {
        self.prox.clone()
    }
}

struct CatalogBuilder {
    space: Space,
    family: ProxFamily,
}

impl CatalogBuilder {
    fn build<P, V, CP, CV>(self, prox: P, value: V, conj_prox: CP, conj_value: CV) -> ProxFunction
    where
        P: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
        CP: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        CV: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        ProxFunction {
            space: self.space,
            family: self.family,
            prox: Arc::new(prox),
            value: Some(Arc::new(value)),
            conjugate_prox: Some(Arc::new(conj_prox)),
            conjugate_value: Some(Arc::new(conj_value)),
        }
    }
}

pub(crate) fn huber_value(x: f64, rho: f64) -> f64 {
    if x.abs() <= rho {
        x * x / (2.0 * rho)
    } else {
        x.abs() - rho / 2.0
    }
}

/// `prox_{γf*}(y)`: the supplied conjugate prox when present, otherwise the
/// Moreau formula `y − γ·prox_{f/γ}(y/γ)`.
pub fn prox_conjugate(f: &ProxFunction, gamma: f64, y: &Vector) -> Vector {
    match &f.conjugate_prox {
        Some(cp) => cp(gamma, y),
        None => prox_conjugate_moreau(f, gamma, y),
    }
}

/// `y − γ·prox_{f/γ}(y/γ)`, ignoring any supplied conjugate prox.
pub fn prox_conjugate_moreau(f: &ProxFunction, gamma: f64, y: &Vector) -> Vector {
    y - f.prox(1.0 / gamma, &(y / gamma)) * gamma
}

/// `‖prox_{γf}(y) + γ·prox_{γ⁻¹f*}(y/γ) − y‖`.
pub fn moreau_residual(f: &ProxFunction, gamma: f64, y: &Vector) -> f64 {
    let p = f.prox(gamma, y);
    let q = prox_conjugate(f, 1.0 / gamma, &(y / gamma));
    norm(&(p + q * gamma - y))
}

/// Largest violation of the prox optimality inequality
/// `f(p) + <y−p, w−p>/γ ≤ f(w)` with `p = prox_{γf}(y)`, over sampled `w`.
///
/// Half of the samples are Gaussian perturbations of `p`, half are prox
/// outputs of random points so that constrained functions get feasible `w`.
pub fn subdifferential_check(
    f: &ProxFunction,
    gamma: f64,
    y: &Vector,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let value = f
        .value
        .as_ref()
        .ok_or_else(|| Error::Unsupported("subdifferential check needs a value".into()))?;
    let p = f.prox(gamma, y);
    let fp = value(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let w = if k % 2 == 0 {
            &p + gaussian_vector(&mut rng, p.len())
        } else {
            let t = rng.random_range(0.1..10.0);
            f.prox(t, &(gaussian_vector(&mut rng, p.len()) * 3.0))
        };
        let fw = value(&w);
        if !fw.is_finite() {
            continue;
        }
        let lhs = fp + dot(&(y - &p), &(&w - &p)) / gamma;
        worst = worst.max(lhs - fw);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothFamily {
    Zero,
    Linear,
    SquaredNorm,
    Quadratic,
    Huber,
    Custom,
}

/// A differentiable convex function with Lipschitz gradient.
#[derive(Clone)]
pub struct SmoothFunction {
    space: Space,
    family: SmoothFamily,
    gradient: GradientFn,
    lipschitz: f64,
    value: Option<ValueFn>,
    /// `(κ, c)` when the function is `(κ/2)‖x − c‖²`.
    squared_norm: Option<(f64, Vector)>,
    linear: Option<Vector>,
    quadratic: Option<(Vector, Vector)>,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("space", &self.space)
            .field("family", &self.family)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl SmoothFunction {
    pub fn custom<G>(space: Space, gradient: G, lipschitz: f64) -> Self
    where
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        SmoothFunction {
            space,
            family: SmoothFamily::Custom,
            gradient: Arc::new(gradient),
            lipschitz,
            value: None,
            squared_norm: None,
            linear: None,
            quadratic: None,
        }
    }

    pub fn with_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.value = Some(Arc::new(value));
        self
    }

    /// Override the declared Lipschitz constant of the gradient.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn zero(space: Space) -> Self {
        let mut f = Self::custom(space, |x| Vector::zeros(x.len()), 0.0).with_value(|_| 0.0);
        f.family = SmoothFamily::Zero;
        f
    }

    /// `<·, a>`; gradient is constant.
    pub fn linear(a: Vector) -> Result<Self> {
        let space = Space::new(a.len())?;
        let (a1, a2) = (a.clone(), a.clone());
        let mut f = Self::custom(space, move |_| a1.clone(), 0.0).with_value(move |x| dot(x, &a2));
        f.family = SmoothFamily::Linear;
        f.linear = Some(a);
        Ok(f)
    }

    /// `(κ/2)‖x − c‖²`. With `c = 0` and `κ = ν` this is `ℓ*` for the coupling
    /// `ℓ = ½ν⁻¹‖·‖²`, whose gradient is `ν·Id`.
    pub fn squared_norm(scale: f64, center: Vector) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Config("squared norm scale must be finite and nonnegative".into()));
        }
        let space = Space::new(center.len())?;
        let (c1, c2) = (center.clone(), center.clone());
        let mut f = Self::custom(space, move |x| (x - &c1) * scale, scale).with_value(move |x| {
            let d = x - &c2;
            0.5 * scale * dot(&d, &d)
        });
        f.family = SmoothFamily::SquaredNorm;
        f.squared_norm = Some((scale, center));
        Ok(f)
    }

    /// `½‖diag(d)·x − b‖²`.
    pub fn quadratic(diag: Vector, b: Vector) -> Result<Self> {
        let space = Space::new(diag.len())?;
        space.check(&b, "quadratic offset")?;
        let lipschitz = diag.iter().fold(0.0_f64, |m, d| m.max(d * d));
        let (d1, b1) = (diag.clone(), b.clone());
        let (d2, b2) = (diag.clone(), b.clone());
        let mut f = Self::custom(
            space,
            move |x| Vector::from_fn(x.len(), |i, _| d1[i] * (d1[i] * x[i] - b1[i])),
            lipschitz,
        )
        .with_value(move |x| {
            0.5 * (0..x.len()).fold(0.0, |acc, i| acc + (d2[i] * x[i] - b2[i]).powi(2))
        });
        f.family = SmoothFamily::Quadratic;
        f.quadratic = Some((diag, b));
        Ok(f)
    }

    /// Huber function with kink radius `rho`; gradient is `clamp(x/ρ, −1, 1)`.
    pub fn huber(space: Space, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config("huber radius must be positive".into()));
        }
        let mut f = Self::custom(space, move |x| x.map(|xi| (xi / rho).clamp(-1.0, 1.0)), 1.0 / rho)
            .with_value(move |x| x.iter().fold(0.0, |acc, &xi| acc + huber_value(xi, rho)));
        f.family = SmoothFamily::Huber;
        Ok(f)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn family(&self) -> SmoothFamily {
        self.family
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, x: &Vector) -> Option<f64> {
        self.value.as_ref().map(|v| v(x))
    }

    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    pub fn squared_norm_params(&self) -> Option<(f64, &Vector)> {
        self.squared_norm.as_ref().map(|(k, c)| (*k, c))
    }

    pub fn linear_params(&self) -> Option<&Vector> {
        self.linear.as_ref()
    }

    pub fn quadratic_params(&self) -> Option<(&Vector, &Vector)> {
        self.quadratic.as_ref().map(|(d, b)| (d, b))
    }

    pub(crate) fn gradient_fn(&self) -> GradientFn {
        self.gradient.clone()
    }
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub max_relative_error: f64,
    pub worst_point: Option<Vector>,
    pub passed: bool,
}

/// Central finite differences (step [`FD_STEP`]) against the analytic gradient
/// at Gaussian sample points.
pub fn gradient_check(h: &SmoothFunction, samples: usize, seed: u64) -> Result<GradientReport> {
    let value = h
        .value
        .as_ref()
        .ok_or_else(|| Error::Unsupported("gradient check needs a value".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h.space.dim();
    let mut worst = 0.0;
    let mut worst_point = None;
    for _ in 0..samples {
        let x = gaussian_vector(&mut rng, n) * 2.0;
        let g = h.gradient(&x);
        let mut fd = Vector::zeros(n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            fd[j] = (value(&xp) - value(&xm)) / (2.0 * FD_STEP);
        }
        let err = norm(&(fd - &g)) / norm(&g).max(1.0);
        if err > worst {
            worst = err;
            worst_point = Some(x);
        }
    }
    Ok(GradientReport {
        max_relative_error: worst,
        worst_point,
        passed: worst <= FD_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn s(n: usize) -> Space {
        Space::new(n).unwrap()
    }

    #[test]
    fn conjugate_prox_of_l1_is_clamp() {
        let f = ProxFunction::l1(s(1), 1.0).unwrap();
        // f* = ι_[-1,1], so prox is clamp(2) = 1
        assert_abs_diff_eq!(prox_conjugate(&f, 1.0, &v(&[2.0]))[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(prox_conjugate_moreau(&f, 1.0, &v(&[2.0]))[0], 2.0_f64.clamp(-1.0, 1.0));
    }

    #[test]
    fn conjugate_prox_of_zero_is_zero_map() {
        let f = ProxFunction::zero(s(3));
        for g in [0.1, 1.0, 10.0] {
            let y = v(&[1.0, -2.0, 3.5]);
            assert_eq!(prox_conjugate(&f, g, &y), Vector::zeros(3));
            assert_abs_diff_eq!(norm(&prox_conjugate_moreau(&f, g, &y)), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn half_squared_norm_is_self_conjugate() {
        let f = ProxFunction::quadratic(v(&[1.0]), v(&[0.0])).unwrap();
        assert_abs_diff_eq!(prox_conjugate(&f, 1.0, &v(&[4.0]))[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.prox(1.0, &v(&[4.0]))[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.conjugate_value(&v(&[3.0])).unwrap(), 4.5);
    }

    #[test]
    fn subdifferential_l1() {
        let f = ProxFunction::l1(s(2), 1.0).unwrap();
        let y = v(&[3.0, -0.5]);
        assert_eq!(f.prox(1.0, &y), v(&[2.0, 0.0]));
        assert!(subdifferential_check(&f, 1.0, &y, 100, 7).unwrap() <= 1e-9);
    }

    #[test]
    fn subdifferential_box_and_zero() {
        let f = ProxFunction::box_indicator(v(&[0.0]), v(&[1.0])).unwrap();
        assert_eq!(f.prox(1.0, &v(&[2.0]))[0], 1.0);
        assert!(subdifferential_check(&f, 1.0, &v(&[2.0]), 100, 1).unwrap() <= 1e-12);
        let z = ProxFunction::zero(s(2));
        assert_eq!(subdifferential_check(&z, 1.0, &v(&[0.3, 2.0]), 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn subdifferential_detects_wrong_prox() {
        // claims value |x| but prox of 2|x|
        let f = ProxFunction::from_prox(s(1), |g, y| y.map(|t| soft(t, 2.0 * g)))
            .with_value(|x| x[0].abs());
        assert!(subdifferential_check(&f, 1.0, &v(&[3.0]), 200, 2).unwrap() > 1e-3);
        let no_value = ProxFunction::from_prox(s(1), |_, y| y.clone());
        assert!(subdifferential_check(&no_value, 1.0, &v(&[1.0]), 10, 1).is_err());
    }

    #[test]
    fn gradient_checks() {
        let half = SmoothFunction::squared_norm(1.0, Vector::zeros(3)).unwrap();
        let r = gradient_check(&half, 50, 1).unwrap();
        assert!(r.max_relative_error <= 1e-9, "{r:?}");

        let lin = SmoothFunction::linear(v(&[1.0, -2.0, 0.5])).unwrap();
        assert!(gradient_check(&lin, 50, 2).unwrap().max_relative_error <= 1e-9);

        let hub = SmoothFunction::huber(s(3), 0.7).unwrap();
        assert!(gradient_check(&hub, 50, 3).unwrap().passed);

        let wrong = SmoothFunction::custom(s(2), |x| x * 2.0, 2.0).with_value(|x| 0.5 * dot(x, x));
        assert!(!gradient_check(&wrong, 10, 4).unwrap().passed);
    }

    #[test]
    fn huber_is_moreau_envelope_of_abs() {
        let l1 = ProxFunction::l1(s(1), 1.0).unwrap();
        let rho = 0.8;
        let hub = ProxFunction::huber(s(1), rho).unwrap();
        for y in [-3.0, -0.5, 0.0, 0.3, 0.8, 2.5] {
            let yv = v(&[y]);
            let p = l1.prox(rho, &yv);
            let env = l1.value(&p).unwrap() + (y - p[0]).powi(2) / (2.0 * rho);
            assert_abs_diff_eq!(hub.value(&yv).unwrap(), env, epsilon = 1e-14);
        }
    }

    #[test]
    fn conjugate_values_at_prox_pairs() {
        // Fenchel-Young equality: f(p) + f*(u) = <p,u> when u = (y - p)/γ
        let fs = vec![
            ProxFunction::quadratic(v(&[2.0, 0.5]), v(&[1.0, -1.0])).unwrap(),
            ProxFunction::box_indicator(v(&[-1.0, 0.0]), v(&[1.0, 2.0])).unwrap(),
            ProxFunction::ball_indicator(v(&[0.5, 0.5]), 1.5).unwrap(),
            ProxFunction::hyperplane_indicator(v(&[1.0, 2.0]), 0.7).unwrap(),
            ProxFunction::huber(s(2), 0.9).unwrap(),
            ProxFunction::l2_norm(s(2), 1.3).unwrap(),
            ProxFunction::linear(v(&[0.2, -0.4])).unwrap(),
        ];
        let y = v(&[3.0, -2.5]);
        for f in fs {
            let p = f.prox(1.0, &y);
            let u = &y - &p;
            let lhs = f.value(&p).unwrap() + f.conjugate_value(&u).unwrap();
            assert_abs_diff_eq!(lhs, dot(&p, &u), epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ProxFunction::l1(s(1), -1.0).is_err());
        assert!(ProxFunction::box_indicator(v(&[1.0]), v(&[0.0])).is_err());
        assert!(ProxFunction::hyperplane_indicator(v(&[0.0, 0.0]), 1.0).is_err());
        assert!(ProxFunction::huber(s(1), 0.0).is_err());
        assert!(SmoothFunction::squared_norm(-1.0, v(&[0.0])).is_err());
    }
}
