#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pdfbf_core::linalg::{LinearOperator, Space, Vector};
use pdfbf_core::minimize::{MinimizationBlock, MinimizationSpec};
use pdfbf_core::prox::{ProxFunction, SmoothFunction};

pub fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn positive(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Every nonsmooth catalog entry on `space`, with seeded parameters.
pub fn prox_catalog(space: Space, rng: &mut ChaCha8Rng) -> Vec<(&'static str, ProxFunction)> {
    let n = space.dim();
    let lower = gauss(rng, n) - Vector::from_element(n, 1.0);
    let upper = &lower + Vector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let normal = gauss(rng, n) + Vector::from_element(n, 0.1);
    let diag = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    vec![
        ("zero", ProxFunction::zero(space)),
        ("linear", ProxFunction::linear(gauss(rng, n)).unwrap()),
        ("quadratic", ProxFunction::quadratic(diag, gauss(rng, n)).unwrap()),
        ("l1", ProxFunction::l1(space, positive(rng, 0.1, 2.0)).unwrap()),
        ("l2", ProxFunction::l2_norm(space, positive(rng, 0.1, 2.0)).unwrap()),
        ("box", ProxFunction::box_indicator(lower, upper).unwrap()),
        ("ball", ProxFunction::ball_indicator(gauss(rng, n), positive(rng, 0.2, 2.0)).unwrap()),
        ("hyperplane", ProxFunction::hyperplane_indicator(normal, rng.random_range(-1.0..1.0)).unwrap()),
        ("nonneg", ProxFunction::nonneg_indicator(space)),
        ("zero_set", ProxFunction::zero_set_indicator(space)),
        ("huber", ProxFunction::huber(space, positive(rng, 0.1, 2.0)).unwrap()),
    ]
}

pub fn smooth_catalog(space: Space, rng: &mut ChaCha8Rng) -> Vec<(&'static str, SmoothFunction)> {
    let n = space.dim();
    vec![
        ("zero", SmoothFunction::zero(space)),
        ("linear", SmoothFunction::linear(gauss(rng, n)).unwrap()),
        ("squared_norm", SmoothFunction::squared_norm(positive(rng, 0.1, 3.0), gauss(rng, n)).unwrap()),
        (
            "quadratic",
            SmoothFunction::quadratic(Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)), gauss(rng, n)).unwrap(),
        ),
        ("huber", SmoothFunction::huber(space, positive(rng, 0.2, 2.0)).unwrap()),
    ]
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, items: Vec<(&'static str, T)>) -> T {
    let k = rng.random_range(0..items.len());
    items[k].1.clone()
}

/// A random composite problem: `1 <= dim H <= 5`, `1 <= m <= 3`, random
/// catalog functions and Gaussian coupling matrices.
pub fn random_minimization(seed: u64) -> MinimizationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let h_space = Space::new(n).unwrap();
    let m = rng.random_range(1..=3);
    let f_items = prox_catalog(h_space, &mut rng);
    let f = pick(&mut rng, f_items);
    let h_items = smooth_catalog(h_space, &mut rng);
    let h = pick(&mut rng, h_items);
    let mut blocks = Vec::with_capacity(m);
    for _ in 0..m {
        let g_dim = rng.random_range(1..=4);
        let g_space = Space::new(g_dim).unwrap();
        let l = if g_dim == n && rng.random_bool(0.3) {
            LinearOperator::identity(h_space)
        } else {
            let mut mat = DMatrix::from_fn(g_dim, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            if mat.amax() == 0.0 {
                mat[(0, 0)] = 1.0;
            }
            LinearOperator::dense(mat).unwrap()
        };
        let g_items = prox_catalog(g_space, &mut rng);
        let g = pick(&mut rng, g_items);
        let l_items = smooth_catalog(g_space, &mut rng);
        let l_star = pick(&mut rng, l_items);
        let r = gauss(&mut rng, g_dim);
        blocks.push(MinimizationBlock::new(g, l_star, l, r).unwrap());
    }
    MinimizationSpec::new(gauss(&mut rng, n), f, h, blocks).unwrap()
}

/// Random primal-dual point for a spec, entries of size about `scale`.
pub fn random_state(spec: &pdfbf_core::fbf::ProblemSpec, seed: u64, scale: f64) -> pdfbf_core::fbf::PrimalDualState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gauss(&mut rng, spec.space().dim()) * scale;
    let v = spec
        .blocks()
        .iter()
        .map(|b| gauss(&mut rng, b.space().dim()) * scale)
        .collect();
    pdfbf_core::fbf::PrimalDualState::new(x, v)
}

pub fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}
