//! Finite-dimensional real Hilbert-space primitives.
//!
//! Every space is a coordinate space `R^d` with the Euclidean inner product.
//! Product spaces `H ⊕ G_1 ⊕ … ⊕ G_m` are represented by [`BlockVector`] and,
//! when a flat representation is convenient, by a [`BlockLayout`] over one
//! long [`Vector`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// Safety factor applied to power-iteration norm estimates.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Space {
    dim: usize,
}

impl Space {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("space dimension must be at least 1".into()));
        }
        Ok(Space { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn zeros(&self) -> Vector {
        Vector::zeros(self.dim)
    }

    pub fn check(&self, v: &Vector, context: &str) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::shape(context, self.dim, v.len()));
        }
        Ok(())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R^{}", self.dim)
    }
}

/// Euclidean dot product, summed left to right.
pub fn inner(u: &Vector, v: &Vector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("inner", u.len(), v.len()));
    }
    Ok(dot(u, v))
}

pub(crate) fn dot(u: &Vector, v: &Vector) -> f64 {
    u.iter().zip(v.iter()).fold(0.0, |acc, (a, b)| acc + a * b)
}

pub fn norm(u: &Vector) -> f64 {
    dot(u, u).sqrt()
}

pub fn all_finite(u: &Vector) -> bool {
    u.iter().all(|x| x.is_finite())
}

/// Block sizes of a product space, used to move between [`BlockVector`] and a
/// flat [`Vector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    dims: Vec<usize>,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        BlockLayout { dims }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.dims[..block].iter().sum()
    }

    pub fn split(&self, flat: &Vector) -> Result<BlockVector> {
        if flat.len() != self.total() {
            return Err(Error::shape("block layout", self.total(), flat.len()));
        }
        let mut blocks = Vec::with_capacity(self.dims.len());
        let mut start = 0;
        for &d in &self.dims {
            blocks.push(flat.rows(start, d).into_owned());
            start += d;
        }
        Ok(BlockVector { blocks })
    }
}

/// An element of a product space; block 0 lives in `H`, blocks `1..=m` in
/// `G_1..G_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub blocks: Vec<Vector>,
}

impl BlockVector {
    pub fn new(blocks: Vec<Vector>) -> Self {
        BlockVector { blocks }
    }

    pub fn zeros(layout: &BlockLayout) -> Self {
        BlockVector {
            blocks: layout.dims().iter().map(|&d| Vector::zeros(d)).collect(),
        }
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.blocks.iter().map(|b| b.len()).collect())
    }

    pub fn flatten(&self) -> Vector {
        let total = self.blocks.iter().map(|b| b.len()).sum();
        Vector::from_iterator(total, self.blocks.iter().flat_map(|b| b.iter().copied()))
    }

    /// Sum of per-block squared norms in block order.
    pub fn norm_squared(&self) -> f64 {
        self.blocks.iter().fold(0.0, |acc, b| acc + dot(b, b))
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    fn check_structure(&self, other: &BlockVector) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::shape(
                "block count",
                self.blocks.len(),
                other.blocks.len(),
            ));
        }
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            if a.len() != b.len() {
                return Err(Error::shape("block dimension", a.len(), b.len()));
            }
        }
        Ok(())
    }
}

pub fn block_inner(u: &BlockVector, v: &BlockVector) -> Result<f64> {
    u.check_structure(v)?;
    Ok(u
        .blocks
        .iter()
        .zip(&v.blocks)
        .fold(0.0, |acc, (a, b)| acc + dot(a, b)))
}

type MapFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Clone)]
enum LinearKind {
    Identity,
    Scaled(f64),
    Zero,
    Dense(DMatrix<f64>),
    Custom { apply: MapFn, adjoint: MapFn },
}

/// A bounded linear map `L: domain -> codomain` together with its adjoint.
#[derive(Clone)]
pub struct LinearOperator {
    domain: Space,
    codomain: Space,
    kind: LinearKind,
    exact_norm: Option<f64>,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            LinearKind::Identity => "identity",
            LinearKind::Scaled(_) => "scaled identity",
            LinearKind::Zero => "zero",
            LinearKind::Dense(_) => "dense",
            LinearKind::Custom { .. } => "custom",
        };
        f.debug_struct("LinearOperator")
            .field("domain", &self.domain)
            .field("codomain", &self.codomain)
            .field("kind", &kind)
            .field("exact_norm", &self.exact_norm)
            .finish()
    }
}

impl LinearOperator {
    pub fn identity(space: Space) -> Self {
        LinearOperator {
            domain: space,
            codomain: space,
            kind: LinearKind::Identity,
            exact_norm: Some(1.0),
        }
    }

    pub fn scaled_identity(space: Space, scale: f64) -> Self {
        LinearOperator {
            domain: space,
            codomain: space,
            kind: LinearKind::Scaled(scale),
            exact_norm: Some(scale.abs()),
        }
    }

    pub fn zero(domain: Space, codomain: Space) -> Self {
        LinearOperator {
            domain,
            codomain,
            kind: LinearKind::Zero,
            exact_norm: Some(0.0),
        }
    }

    /// Dense matrix with `codomain.dim()` rows and `domain.dim()` columns.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        let domain = Space::new(matrix.ncols())?;
        let codomain = Space::new(matrix.nrows())?;
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("matrix has non-finite entries".into()));
        }
        Ok(LinearOperator {
            domain,
            codomain,
            kind: LinearKind::Dense(matrix),
            exact_norm: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(Error::Config("matrix must be non-empty".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::shape("matrix row", ncols, bad.len()));
        }
        Self::dense(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// User-supplied map and adjoint. Consistency is the caller's job; see
    /// [`adjoint_mismatch`].
    pub fn from_fns<F, G>(domain: Space, codomain: Space, apply: F, adjoint: G) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        LinearOperator {
            domain,
            codomain,
            kind: LinearKind::Custom {
                apply: Arc::new(apply),
                adjoint: Arc::new(adjoint),
            },
            exact_norm: None,
        }
    }

    /// Attach a known operator norm, bypassing power iteration.
    pub fn with_norm(mut self, norm: f64) -> Self {
        self.exact_norm = Some(norm);
        self
    }

    pub fn domain(&self) -> Space {
        self.domain
    }

    pub fn codomain(&self) -> Space {
        self.codomain
    }

    pub fn exact_norm(&self) -> Option<f64> {
        self.exact_norm
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            LinearKind::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// Panics if `x` is not in the domain.
    pub fn apply(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.domain.dim(), "linear operator domain mismatch");
        match &self.kind {
            LinearKind::Identity => x.clone(),
            LinearKind::Scaled(s) => x * *s,
            LinearKind::Zero => self.codomain.zeros(),
            LinearKind::Dense(m) => m * x,
            LinearKind::Custom { apply, .. } => apply(x),
        }
    }

    /// Panics if `y` is not in the codomain.
    pub fn apply_adjoint(&self, y: &Vector) -> Vector {
        assert_eq!(y.len(), self.codomain.dim(), "linear operator codomain mismatch");
        match &self.kind {
            LinearKind::Identity => y.clone(),
            LinearKind::Scaled(s) => y * *s,
            LinearKind::Zero => self.domain.zeros(),
            LinearKind::Dense(m) => m.tr_mul(y),
            LinearKind::Custom { adjoint, .. } => adjoint(y),
        }
    }

    /// Known norm if one was attached, otherwise a power-iteration estimate.
    pub fn norm_bound(&self) -> Result<f64> {
        match self.exact_norm {
            Some(n) => Ok(n),
            None => operator_norm(self, 1e-12, 10_000),
        }
    }
}

/// Largest singular value of `op`, by power iteration on `L*L`, multiplied by
/// [`NORM_SAFETY_FACTOR`] so the result bounds `‖L‖` from above.
pub fn operator_norm(op: &LinearOperator, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Config("operator_norm tolerance must be positive".into()));
    }
    let n = op.domain().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0fc0_ffee);
    let mut x = Vector::from_fn(n, |_, _| 1.0 + 0.25 * rng.sample::<f64, _>(StandardNormal));
    let x_norm = norm(&x);
    x /= x_norm;

    let mut sigma_sq = 0.0;
    for iteration in 1..=max_iter {
        let w = op.apply_adjoint(&op.apply(&x));
        let w_norm = norm(&w);
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        let next = w_norm;
        x = w / w_norm;
        if iteration > 1 && (next - sigma_sq).abs() <= tol * next {
            return Ok(next.sqrt() * NORM_SAFETY_FACTOR);
        }
        sigma_sq = next;
    }
    Err(Error::NormEstimation {
        best: sigma_sq.sqrt(),
        iterations: max_iter,
    })
}

/// Worst normalized adjoint defect `|<Lx,y> - <x,L*y>| / (1 + ‖x‖‖y‖)` over
/// random Gaussian samples.
pub fn adjoint_mismatch(op: &LinearOperator, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = gaussian_vector(&mut rng, op.domain().dim());
        let y = gaussian_vector(&mut rng, op.codomain().dim());
        let lhs = dot(&op.apply(&x), &y);
        let rhs = dot(&x, &op.apply_adjoint(&y));
        worst = worst.max((lhs - rhs).abs() / (1.0 + norm(&x) * norm(&y)));
    }
    worst
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn inner_basic() {
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            inner(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn block_inner_basic() {
        let u = BlockVector::new(vec![v(&[1.0]), v(&[2.0])]);
        let w = BlockVector::new(vec![v(&[3.0]), v(&[4.0])]);
        assert_eq!(block_inner(&u, &w).unwrap(), 11.0);
        assert_eq!(block_inner(&w, &u).unwrap(), 11.0);
        let swapped = BlockVector::new(vec![v(&[4.0]), v(&[3.0])]);
        assert_eq!(block_inner(&u, &swapped).unwrap(), 10.0);
        assert!(block_inner(&u, &u).unwrap() >= 0.0);

        let bad = BlockVector::new(vec![v(&[1.0, 2.0]), v(&[2.0])]);
        assert!(block_inner(&u, &bad).is_err());
        let short = BlockVector::new(vec![v(&[1.0])]);
        assert!(block_inner(&u, &short).is_err());
    }

    #[test]
    fn layout_round_trip() {
        let u = BlockVector::new(vec![v(&[1.0, 2.0]), v(&[3.0]), v(&[4.0, 5.0, 6.0])]);
        let layout = u.layout();
        assert_eq!(layout.total(), 6);
        assert_eq!(layout.offset(2), 3);
        assert_eq!(layout.split(&u.flatten()).unwrap(), u);
        assert!(layout.split(&v(&[1.0])).is_err());
    }

    #[test]
    fn norm_of_scaled_identity() {
        let op = LinearOperator::dense(DMatrix::identity(3, 3) * 2.0).unwrap();
        assert_abs_diff_eq!(operator_norm(&op, 1e-12, 1000).unwrap(), 2.02, epsilon = 1e-10);
    }

    #[test]
    fn norm_of_diagonal() {
        let op = LinearOperator::dense(DMatrix::from_diagonal(&v(&[1.0, 5.0]))).unwrap();
        let tol = 1e-10;
        assert_abs_diff_eq!(operator_norm(&op, tol, 10_000).unwrap(), 5.05, epsilon = 1e-6);
    }

    #[test]
    fn norm_of_nilpotent_matches_svd() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let svd_max = m.singular_values().max();
        let op = LinearOperator::dense(m).unwrap();
        let est = operator_norm(&op, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(est, svd_max * NORM_SAFETY_FACTOR, epsilon = 1e-9);
        assert_abs_diff_eq!(est, 1.01, epsilon = 1e-9);
    }

    #[test]
    fn norm_non_convergence_reports_best() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.999_999]);
        let op = LinearOperator::dense(m).unwrap();
        match operator_norm(&op, 1e-15, 2) {
            Err(Error::NormEstimation { best, iterations }) => {
                assert_eq!(iterations, 2);
                assert!(best > 0.99 && best <= 1.0);
            }
            other => panic!("expected NormEstimation, got {other:?}"),
        }
        assert!(operator_norm(&op, 0.0, 10).is_err());
    }

    #[test]
    fn dense_adjoint_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(3, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let op = LinearOperator::dense(m).unwrap();
        assert!(adjoint_mismatch(&op, 100, 11) <= 1e-10);
        assert!(adjoint_mismatch(&LinearOperator::identity(Space::new(4).unwrap()), 100, 1) == 0.0);
    }

    #[test]
    fn inconsistent_custom_adjoint_detected() {
        let s = Space::new(2).unwrap();
        let op = LinearOperator::from_fns(s, s, |x| x * 2.0, |y| y.clone());
        assert!(adjoint_mismatch(&op, 10, 1) > 1e-3);
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(LinearOperator::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(LinearOperator::from_rows(&[]).is_err());
        let op = LinearOperator::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(op.domain().dim(), 3);
        assert_eq!(op.codomain().dim(), 1);
    }

    #[test]
    fn space_rejects_zero_dim() {
        assert!(Space::new(0).is_err());
        assert!(Space::new(2).unwrap().check(&v(&[1.0]), "x").is_err());
    }
}
