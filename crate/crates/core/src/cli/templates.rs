//! Ready-to-run problem files with known primal-dual solutions. Each instance
//! is built backwards from a chosen `(x*, v*)` so that the optimality
//! conditions hold exactly.

use nalgebra::{dvector, DMatrix};

use super::schema::{
    BlockSpec, LinearSpec, ProblemFile, ProxSpec, ReferenceSpec, SmoothSpec, SolverSpec,
};
use crate::linalg::Vector;

pub const TEMPLATE_NAMES: [&str; 5] = [
    "classical-duality",
    "yosida",
    "tseng",
    "example18",
    "composite",
];

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "classical-duality" => "½‖x − b‖² + λ‖Lx − r‖₁ − <x, z>: Fenchel-Rockafellar pair, one block",
        "yosida" => "box-constrained Huber: ℓ1 block regularized by a Yosida envelope",
        "tseng" => "nonnegativity plus a smooth quadratic, i.e. z ∈ Ax + Cx",
        "example18" => "½‖x − c‖² + ‖x‖₁ + ι_ball(L₂x − r₂): two-block quadratic data fit",
        "composite" => "nonnegative least distance with a group norm and a box on Lx",
        _ => return None,
    })
}

pub fn template(name: &str) -> Option<ProblemFile> {
    Some(match name {
        "classical-duality" => classical_duality(),
        "yosida" => yosida(),
        "tseng" => tseng(),
        "example18" => example18(),
        "composite" => composite(),
        _ => return None,
    })
}

fn v(x: &Vector) -> Vec<f64> {
    x.iter().copied().collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn named(name: &str) -> Option<String> {
    Some(name.to_string())
}

/// `f = ½‖· − b‖²`, `g = λ‖·‖₁`, `ℓ = ι_{0}`, `h = 0`.
fn classical_duality() -> ProblemFile {
    let l = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0]);
    let lambda = 0.5;
    let x = dvector![1.0, -0.5, 0.25];
    let r = dvector![1.25, 0.2];
    // Lx − r = (0, −0.95): v1 free in [−λ, λ], v2 = −λ
    let vs = dvector![0.2, -0.5];
    let z = dvector![0.1, 0.2, -0.3];
    // z − Lᵀv = x − b
    let b = &x - &z + l.transpose() * &vs;
    ProblemFile {
        name: named("classical-duality"),
        dim: 3,
        z: Some(v(&z)),
        f: ProxSpec::Quadratic {
            diag: vec![1.0; 3],
            b: v(&b),
        },
        h: SmoothSpec::Zero,
        mu: None,
        blocks: vec![BlockSpec {
            g: ProxSpec::L1 { weight: lambda },
            l_star: SmoothSpec::Zero,
            l: LinearSpec::Matrix(rows(&l)),
            r: Some(v(&r)),
            norm: None,
            nu: None,
        }],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![v(&vs)],
        }),
    }
}

/// `f = ι_box`, `g = ‖·‖₁`, `ℓ* = (ρ/2)‖·‖²`: the block is the Huber function.
fn yosida() -> ProblemFile {
    let rho: f64 = 0.8;
    let lower = dvector![0.5, -3.0, -1.0];
    let upper = dvector![2.0, -1.0, 1.0];
    let x: Vector = dvector![0.5, -1.0, 0.0];
    let vs = x.map(|t| (t / rho).clamp(-1.0, 1.0));
    ProblemFile {
        name: named("yosida"),
        dim: 3,
        z: None,
        f: ProxSpec::Box {
            lower: v(&lower),
            upper: v(&upper),
        },
        h: SmoothSpec::Zero,
        mu: None,
        blocks: vec![BlockSpec {
            g: ProxSpec::L1 { weight: 1.0 },
            l_star: SmoothSpec::SquaredNorm {
                scale: rho,
                center: None,
            },
            l: LinearSpec::Named("identity".into()),
            r: None,
            norm: None,
            nu: None,
        }],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![v(&vs)],
        }),
    }
}

/// `f = ι_{≥0}`, `h = (κ/2)‖· − c‖²`, inactive block `g = 0`, `ℓ = ι_{0}`.
fn tseng() -> ProblemFile {
    let kappa = 2.0;
    let c: Vector = dvector![1.0, -2.0, 0.5, -0.1];
    let x = c.map(|t| t.max(0.0));
    ProblemFile {
        name: named("tseng"),
        dim: 4,
        z: None,
        f: ProxSpec::Nonneg,
        h: SmoothSpec::SquaredNorm {
            scale: kappa,
            center: Some(v(&c)),
        },
        mu: None,
        blocks: vec![BlockSpec {
            g: ProxSpec::Zero,
            l_star: SmoothSpec::Zero,
            l: LinearSpec::Named("identity".into()),
            r: None,
            norm: None,
            nu: None,
        }],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![vec![0.0; 4]],
        }),
    }
}

/// Coupling matrix of the second block of `example18`.
pub fn example18_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        5,
        &[
            0.8, -0.3, 0.5, 1.1, -0.7, //
            -0.4, 0.9, 0.2, -0.6, 0.3, //
            0.6, 0.1, -1.2, 0.4, 0.9,
        ],
    )
}

/// `f = 0`, `h = ½‖· − c‖²`, `g₁ = ‖·‖₁` with `L₁ = Id`, `g₂ = ι_{B(0,R)}`.
fn example18() -> ProblemFile {
    let l2 = example18_matrix();
    let radius = 1.0;
    let x = dvector![1.0, 0.0, -0.5, 0.0, 2.0];
    let v1 = dvector![1.0, 0.3, -1.0, -0.6, 1.0];
    // L₂x − r₂ = u on the sphere, v₂ = t·u in its normal cone
    let u = dvector![0.6, 0.0, 0.8] * radius;
    let v2 = &u * 0.5;
    let r2 = &l2 * &x - &u;
    // x − c + v₁ + L₂ᵀv₂ = 0
    let c = &x + &v1 + l2.transpose() * &v2;
    ProblemFile {
        name: named("example18"),
        dim: 5,
        z: None,
        f: ProxSpec::Zero,
        h: SmoothSpec::SquaredNorm {
            scale: 1.0,
            center: Some(v(&c)),
        },
        mu: None,
        blocks: vec![
            BlockSpec {
                g: ProxSpec::L1 { weight: 1.0 },
                l_star: SmoothSpec::Zero,
                l: LinearSpec::Named("identity".into()),
                r: None,
                norm: None,
                nu: None,
            },
            BlockSpec {
                g: ProxSpec::Ball {
                    center: None,
                    radius,
                },
                l_star: SmoothSpec::Zero,
                l: LinearSpec::Matrix(rows(&l2)),
                r: Some(v(&r2)),
                norm: None,
                nu: None,
            },
        ],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![v(&v1), v(&v2)],
        }),
    }
}

/// `f = ι_{≥0}`, `h = ½‖· − c‖²`, `g₁ = λ‖·‖₂` on `L₁x − r₁`, `g₂ = ι_[lo,hi]`
/// on a single linear functional.
fn composite() -> ProblemFile {
    let l1 = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.0, 1.0, 1.0, 1.0]);
    let l2 = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
    let lambda = 0.6;
    let x = dvector![1.0, 0.0, 0.5, 0.0];
    let r1 = dvector![0.4, -0.3];
    let y1 = &l1 * &x - &r1;
    let v1 = &y1 * (lambda / y1.norm());
    // L₂x = 1.5 sits on the upper bound
    let (lo, hi) = (-1.0, 1.0);
    let r2 = dvector![0.5];
    let v2 = dvector![0.7];
    // −(x − c + L₁ᵀv₁ + L₂ᵀv₂) ∈ N_{≥0}(x)
    let normal = dvector![0.0, -0.4, 0.0, -1.0];
    let c = &x + l1.transpose() * &v1 + l2.transpose() * &v2 + &normal;
    ProblemFile {
        name: named("composite"),
        dim: 4,
        z: None,
        f: ProxSpec::Nonneg,
        h: SmoothSpec::SquaredNorm {
            scale: 1.0,
            center: Some(v(&c)),
        },
        mu: None,
        blocks: vec![
            BlockSpec {
                g: ProxSpec::L2 { weight: lambda },
                l_star: SmoothSpec::Zero,
                l: LinearSpec::Matrix(rows(&l1)),
                r: Some(v(&r1)),
                norm: None,
                nu: None,
            },
            BlockSpec {
                g: ProxSpec::Box {
                    lower: vec![lo],
                    upper: vec![hi],
                },
                l_star: SmoothSpec::Zero,
                l: LinearSpec::Matrix(rows(&l2)),
                r: Some(v(&r2)),
                norm: None,
                nu: None,
            },
        ],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![v(&v1), v(&v2)],
        }),
    }
}

/// `½‖x − b‖² + λ‖x‖₁`, solved by soft thresholding.
pub fn lasso(b: &Vector, lambda: f64) -> ProblemFile {
    let x = b.map(|t| t.signum() * (t.abs() - lambda).max(0.0));
    let vs = b - &x;
    ProblemFile {
        name: named("lasso"),
        dim: b.len(),
        z: None,
        f: ProxSpec::Zero,
        h: SmoothSpec::SquaredNorm {
            scale: 1.0,
            center: Some(v(b)),
        },
        mu: None,
        blocks: vec![BlockSpec {
            g: ProxSpec::L1 { weight: lambda },
            l_star: SmoothSpec::Zero,
            l: LinearSpec::Named("identity".into()),
            r: None,
            norm: Some(1.0),
            nu: None,
        }],
        solver: SolverSpec::default(),
        reference: Some(ReferenceSpec {
            x: v(&x),
            v: vec![v(&vs)],
        }),
    }
}
