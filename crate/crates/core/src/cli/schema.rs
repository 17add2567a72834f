//! JSON problem files.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fbf::{
    ErrorInjector, GammaSchedule, PrimalDualState, ProblemSpec, StepPolicy, StoppingRule,
};
use crate::linalg::{LinearOperator, Space, Vector};
use crate::minimize::{MinimizationBlock, MinimizationSpec};
use crate::prox::{ProxFunction, SmoothFunction};

/// A schema or shape problem, located by a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct FileError {
    pub path: String,
    pub message: String,
}

impl FileError {
    fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        FileError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." || self.path == "?" {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for FileError {}

/// Nonsmooth catalog functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    Zero,
    Linear { a: Vec<f64> },
    /// `½‖diag·x − b‖²`
    Quadratic { diag: Vec<f64>, b: Vec<f64> },
    L1 {
        #[serde(default = "one")]
        weight: f64,
    },
    L2 {
        #[serde(default = "one")]
        weight: f64,
    },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Nonneg,
    ZeroSet,
    Huber { rho: f64 },
}

/// Smooth catalog functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothSpec {
    Zero,
    Linear { a: Vec<f64> },
    /// `(scale/2)‖x − center‖²`
    SquaredNorm {
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Quadratic { diag: Vec<f64>, b: Vec<f64> },
    Huber { rho: f64 },
}

/// `"identity"` or a row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinearSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub g: ProxSpec,
    #[serde(default = "smooth_zero")]
    pub l_star: SmoothSpec,
    #[serde(rename = "L")]
    pub l: LinearSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Known `‖L‖`; estimated by power iteration when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// Declared Lipschitz constant of `∇ℓ*`, overriding the catalog value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectPreset {
    #[default]
    None,
    Spike,
    Decay,
}

impl InjectPreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(InjectPreset::None),
            "spike" => Some(InjectPreset::Spike),
            "decay" => Some(InjectPreset::Decay),
            _ => None,
        }
    }

    pub fn injector(self, spec: &ProblemSpec, seed: u64) -> ErrorInjector {
        match self {
            InjectPreset::None => ErrorInjector::none(),
            InjectPreset::Spike => ErrorInjector::spike(spec, SPIKE_MAGNITUDE, seed),
            InjectPreset::Decay => ErrorInjector::decay(spec, DECAY_SCALE, seed),
        }
    }
}

pub const SPIKE_MAGNITUDE: f64 = 10.0;
pub const DECAY_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Constant step; the maximal admissible step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inject: InjectPreset,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: default_tol(),
            max_iter: default_max_iter(),
            gamma: None,
            epsilon: None,
            seed: 0,
            inject: InjectPreset::None,
        }
    }
}

/// A known primal-dual solution, used for reporting errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub x: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default = "prox_zero")]
    pub f: ProxSpec,
    #[serde(default = "smooth_zero")]
    pub h: SmoothSpec,
    /// Declared Lipschitz constant of `∇h`, overriding the catalog value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
}

fn one() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100_000
}

fn prox_zero() -> ProxSpec {
    ProxSpec::Zero
}

fn smooth_zero() -> SmoothSpec {
    SmoothSpec::Zero
}

/// A problem file turned into solver objects.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub minimization: MinimizationSpec,
    pub problem: ProblemSpec,
    pub policy: StepPolicy,
    pub stop: StoppingRule,
    pub reference: Option<PrimalDualState>,
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, FileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        FileError::new(path, e.into_inner())
    })
}

fn vector(path: &str, values: &[f64], dim: usize) -> Result<Vector, FileError> {
    if values.len() != dim {
        return Err(FileError::new(
            path,
            format!("expected {dim} entries, found {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FileError::new(path, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(values))
}

fn opt_vector(path: &str, values: &Option<Vec<f64>>, dim: usize) -> Result<Vector, FileError> {
    match values {
        Some(v) => vector(path, v, dim),
        None => Ok(Vector::zeros(dim)),
    }
}

fn wrap<T>(path: &str, r: crate::Result<T>) -> Result<T, FileError> {
    r.map_err(|e| FileError::new(path, e))
}

impl ProxSpec {
    pub fn build(&self, space: Space, path: &str) -> Result<ProxFunction, FileError> {
        let n = space.dim();
        let sub = |field: &str| format!("{path}.{field}");
        Ok(match self {
            ProxSpec::Zero => ProxFunction::zero(space),
            ProxSpec::Linear { a } => wrap(path, ProxFunction::linear(vector(&sub("a"), a, n)?))?,
            ProxSpec::Quadratic { diag, b } => wrap(
                path,
                ProxFunction::quadratic(vector(&sub("diag"), diag, n)?, vector(&sub("b"), b, n)?),
            )?,
            ProxSpec::L1 { weight } => wrap(path, ProxFunction::l1(space, *weight))?,
            ProxSpec::L2 { weight } => wrap(path, ProxFunction::l2_norm(space, *weight))?,
            ProxSpec::Box { lower, upper } => wrap(
                path,
                ProxFunction::box_indicator(vector(&sub("lower"), lower, n)?, vector(&sub("upper"), upper, n)?),
            )?,
            ProxSpec::Ball { center, radius } => wrap(
                path,
                ProxFunction::ball_indicator(opt_vector(&sub("center"), center, n)?, *radius),
            )?,
            ProxSpec::Hyperplane { normal, offset } => wrap(
                path,
                ProxFunction::hyperplane_indicator(vector(&sub("normal"), normal, n)?, *offset),
            )?,
            ProxSpec::Nonneg => ProxFunction::nonneg_indicator(space),
            ProxSpec::ZeroSet => ProxFunction::zero_set_indicator(space),
            ProxSpec::Huber { rho } => wrap(path, ProxFunction::huber(space, *rho))?,
        })
    }
}

impl SmoothSpec {
    pub fn build(&self, space: Space, path: &str) -> Result<SmoothFunction, FileError> {
        let n = space.dim();
        let sub = |field: &str| format!("{path}.{field}");
        Ok(match self {
            SmoothSpec::Zero => SmoothFunction::zero(space),
            SmoothSpec::Linear { a } => wrap(path, SmoothFunction::linear(vector(&sub("a"), a, n)?))?,
            SmoothSpec::SquaredNorm { scale, center } => wrap(
                path,
                SmoothFunction::squared_norm(*scale, opt_vector(&sub("center"), center, n)?),
            )?,
            SmoothSpec::Quadratic { diag, b } => wrap(
                path,
                SmoothFunction::quadratic(vector(&sub("diag"), diag, n)?, vector(&sub("b"), b, n)?),
            )?,
            SmoothSpec::Huber { rho } => wrap(path, SmoothFunction::huber(space, *rho))?,
        })
    }
}

impl LinearSpec {
    pub fn build(&self, domain: Space, path: &str) -> Result<LinearOperator, FileError> {
        match self {
            LinearSpec::Named(name) if name == "identity" => Ok(LinearOperator::identity(domain)),
            LinearSpec::Named(name) => Err(FileError::new(
                path,
                format!("unknown operator {name:?}, expected \"identity\" or a matrix"),
            )),
            LinearSpec::Matrix(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != domain.dim() {
                        return Err(FileError::new(
                            format!("{path}[{i}]"),
                            format!("expected {} columns, found {}", domain.dim(), row.len()),
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(FileError::new(format!("{path}[{i}]"), "entries must be finite"));
                    }
                }
                wrap(path, LinearOperator::from_rows(rows))
            }
        }
    }
}

fn positive(path: &str, v: f64) -> Result<f64, FileError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(FileError::new(path, "must be finite and nonnegative"))
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        parse_problem(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files serialize");
        s.push('\n');
        s
    }

    pub fn minimization_spec(&self) -> Result<MinimizationSpec, FileError> {
        let space = Space::new(self.dim).map_err(|_| FileError::new("dim", "must be positive"))?;
        let z = opt_vector("z", &self.z, self.dim)?;
        let f = self.f.build(space, "f")?;
        let mut h = self.h.build(space, "h")?;
        if let Some(mu) = self.mu {
            h = h.with_lipschitz(positive("mu", mu)?);
        }
        if self.blocks.is_empty() {
            return Err(FileError::new("blocks", "at least one block is required"));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let path = format!("blocks[{i}]");
            let mut l = b.l.build(space, &format!("{path}.L"))?;
            if let Some(norm) = b.norm {
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(FileError::new(format!("{path}.norm"), "must be positive"));
                }
                l = l.with_norm(norm);
            }
            let g_space = l.codomain();
            let g = b.g.build(g_space, &format!("{path}.g"))?;
            let mut l_star = b.l_star.build(g_space, &format!("{path}.l_star"))?;
            if let Some(nu) = b.nu {
                l_star = l_star.with_lipschitz(positive(&format!("{path}.nu"), nu)?);
            }
            let r = opt_vector(&format!("{path}.r"), &b.r, g_space.dim())?;
            blocks.push(wrap(&path, MinimizationBlock::new(g, l_star, l, r))?);
        }
        wrap("", MinimizationSpec::new(z, f, h, blocks))
    }

    pub fn reference_state(&self) -> Result<Option<PrimalDualState>, FileError> {
        let Some(r) = &self.reference else {
            return Ok(None);
        };
        let x = vector("reference.x", &r.x, self.dim)?;
        if r.v.len() != self.blocks.len() {
            return Err(FileError::new(
                "reference.v",
                format!("expected {} blocks, found {}", self.blocks.len(), r.v.len()),
            ));
        }
        let v = r
            .v
            .iter()
            .map(|vi| Vector::from_column_slice(vi))
            .collect::<Vec<_>>();
        Ok(Some(PrimalDualState::new(x, v)))
    }

    pub fn build(&self) -> Result<BuiltProblem, FileError> {
        let minimization = self.minimization_spec()?;
        let problem = wrap("blocks", minimization.to_problem_spec())?;
        let reference = self.reference_state()?;
        if let Some(r) = &reference {
            for (i, (vi, blk)) in r.v.iter().zip(problem.blocks()).enumerate() {
                if vi.len() != blk.space().dim() {
                    return Err(FileError::new(
                        format!("reference.v[{i}]"),
                        format!("expected {} entries, found {}", blk.space().dim(), vi.len()),
                    ));
                }
            }
        }
        let s = &self.solver;
        let policy = self.policy(&problem)?;
        if !(s.tol >= 0.0) {
            return Err(FileError::new("solver.tol", "must be nonnegative"));
        }
        let stop = StoppingRule::default().with_tol(s.tol).with_max_iter(s.max_iter);
        Ok(BuiltProblem {
            minimization,
            problem,
            policy,
            stop,
            reference,
        })
    }

    fn policy(&self, problem: &ProblemSpec) -> Result<StepPolicy, FileError> {
        let s = &self.solver;
        let beta = wrap("blocks", crate::fbf::compute_beta(problem))?;
        let epsilon = s.epsilon.unwrap_or_else(|| crate::fbf::default_epsilon(beta));
        let gamma = s.gamma.unwrap_or((1.0 - epsilon) / beta);
        let path = if s.gamma.is_some() { "solver.gamma" } else { "solver.epsilon" };
        wrap(path, StepPolicy::new(beta, epsilon, GammaSchedule::Constant(gamma)))
    }
}
