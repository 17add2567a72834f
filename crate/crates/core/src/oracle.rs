//! Small reference solvers used to cross-check the splitting solver. Nothing
//! here depends on [`crate::fbf`] or [`crate::minimize`].

use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const GRID_MAX_DIM: usize = 3;
pub const GRID_MAX_RESOLUTION: usize = 401;

/// Minimizer of `λ‖x‖₁ + ½‖x − z‖²`.
pub fn soft_threshold_oracle(z: &Vector, lambda: f64) -> Result<Vector> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    Ok(z.map(|zj| zj.signum() * (zj.abs() - lambda).max(0.0)))
}

fn eval(objective: &dyn Fn(&Vector) -> f64, x: &Vector) -> f64 {
    let v = objective(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Exhaustive grid search over the box `[lower, upper]` followed by one
/// golden-section pass per axis around the best cell.
pub fn grid_oracle(
    objective: &dyn Fn(&Vector) -> f64,
    lower: &Vector,
    upper: &Vector,
    resolution: usize,
) -> Result<Vector> {
    let d = lower.len();
    if d == 0 || d > GRID_MAX_DIM {
        return Err(Error::Config(format!("grid oracle supports 1 to {GRID_MAX_DIM} dimensions, got {d}")));
    }
    if upper.len() != d {
        return Err(Error::shape("grid upper bounds", d, upper.len()));
    }
    if !(2..=GRID_MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::Config(format!(
            "grid resolution must be in 2..={GRID_MAX_RESOLUTION}, got {resolution}"
        )));
    }
    if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
        return Err(Error::Config("grid box must have finite lower <= upper".into()));
    }
    let step: Vector = (upper - lower) / (resolution - 1) as f64;
    let point = |idx: &[usize]| Vector::from_fn(d, |i, _| lower[i] + step[i] * idx[i] as f64);

    let mut idx = vec![0usize; d];
    let mut best: Option<(f64, Vector)> = None;
    loop {
        let x = point(&idx);
        let v = eval(objective, &x);
        if v < f64::INFINITY && best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < resolution {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    let (mut fbest, mut x) = best.ok_or(Error::Infeasible)?;

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for axis in 0..d {
        let mut a = (x[axis] - step[axis]).max(lower[axis]);
        let mut b = (x[axis] + step[axis]).min(upper[axis]);
        let at = |t: f64, x: &Vector| {
            let mut y = x.clone();
            y[axis] = t;
            eval(objective, &y)
        };
        let mut c = b - ratio * (b - a);
        let mut e = a + ratio * (b - a);
        let (mut fc, mut fe) = (at(c, &x), at(e, &x));
        for _ in 0..80 {
            if fc <= fe {
                b = e;
                e = c;
                fe = fc;
                c = b - ratio * (b - a);
                fc = at(c, &x);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + ratio * (b - a);
                fe = at(e, &x);
            }
        }
        let t = 0.5 * (a + b);
        let ft = at(t, &x);
        if ft < fbest {
            fbest = ft;
            x[axis] = t;
        }
    }
    Ok(x)
}

/// Subgradient descent `x_{k+1} = x_k − (c/√(k+1))·s_k` with `c = 1`,
/// returning the iterate with the lowest objective value.
pub fn subgradient_oracle(
    objective: &dyn Fn(&Vector) -> f64,
    subgradient: &dyn Fn(&Vector) -> Vector,
    x0: &Vector,
    iterations: usize,
) -> Vector {
    subgradient_oracle_with_step(objective, subgradient, x0, iterations, 1.0)
}

pub fn subgradient_oracle_with_step(
    objective: &dyn Fn(&Vector) -> f64,
    subgradient: &dyn Fn(&Vector) -> Vector,
    x0: &Vector,
    iterations: usize,
    c: f64,
) -> Vector {
    let mut x = x0.clone();
    let mut best = x0.clone();
    let mut fbest = eval(objective, x0);
    for k in 0..iterations {
        let s = subgradient(&x);
        x -= s * (c / ((k + 1) as f64).sqrt());
        let fx = eval(objective, &x);
        if fx < fbest {
            fbest = fx;
            best.copy_from(&x);
        }
    }
    best
}
