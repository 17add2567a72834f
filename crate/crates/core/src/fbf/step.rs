use super::policy::IterationErrors;
use super::problem::ProblemSpec;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, BlockLayout, BlockVector, Vector};
use crate::operators::{resolvent_of_inverse, LipschitzOperator, ResolventOperator};

/// Primal iterate `x_n` and dual iterates `v_{i,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub x: Vector,
    pub v: Vec<Vector>,
    pub n: usize,
}

impl PrimalDualState {
    pub fn new(x: Vector, v: Vec<Vector>) -> Self {
        PrimalDualState { x, v, n: 0 }
    }

    /// `x_0 = 0`, `v_{i,0} = 0`.
    pub fn zeros(spec: &ProblemSpec) -> Self {
        PrimalDualState::new(
            spec.space().zeros(),
            spec.blocks().iter().map(|b| b.space().zeros()).collect(),
        )
    }

    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        spec.space().check(&self.x, "x")?;
        if self.v.len() != spec.m() {
            return Err(Error::shape("dual blocks", spec.m(), self.v.len()));
        }
        for (vi, blk) in self.v.iter().zip(spec.blocks()) {
            blk.space().check(vi, "v")?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.x) && self.v.iter().all(all_finite)
    }

    pub fn to_block_vector(&self) -> BlockVector {
        let mut blocks = Vec::with_capacity(self.v.len() + 1);
        blocks.push(self.x.clone());
        blocks.extend(self.v.iter().cloned());
        BlockVector::new(blocks)
    }

    pub fn flatten(&self) -> Vector {
        self.to_block_vector().flatten()
    }

    pub fn from_flat(layout: &BlockLayout, flat: &Vector, n: usize) -> Result<Self> {
        let mut blocks = layout.split(flat)?.blocks.into_iter();
        let x = blocks.next().expect("layout has a primal block");
        Ok(PrimalDualState {
            x,
            v: blocks.collect(),
            n,
        })
    }

    /// Norm in `K = H ⊕ G_1 ⊕ … ⊕ G_m`.
    pub fn norm(&self) -> f64 {
        self.to_block_vector().norm()
    }
}

/// Intermediate vectors of one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationWorkspace {
    pub y1: Vector,
    pub p1: Vector,
    pub q1: Vector,
    pub y2: Vec<Vector>,
    pub p2: Vec<Vector>,
    pub q2: Vec<Vector>,
}

/// Operator evaluations, accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationCounts {
    pub c: usize,
    pub a_resolvent: usize,
    pub d_inv: Vec<usize>,
    pub b_resolvent: Vec<usize>,
    pub l_apply: Vec<usize>,
    pub l_adjoint: Vec<usize>,
}

impl EvaluationCounts {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let m = spec.m();
        EvaluationCounts {
            c: 0,
            a_resolvent: 0,
            d_inv: vec![0; m],
            b_resolvent: vec![0; m],
            l_apply: vec![0; m],
            l_adjoint: vec![0; m],
        }
    }

    fn ensure(&mut self, m: usize) {
        for v in [
            &mut self.d_inv,
            &mut self.b_resolvent,
            &mut self.l_apply,
            &mut self.l_adjoint,
        ] {
            if v.len() < m {
                v.resize(m, 0);
            }
        }
    }
}

fn add_opt(v: &mut Vector, e: &Option<Vector>) {
    if let Some(e) = e {
        *v += e;
    }
}

fn finite_or(
    stage: &'static str,
    n: usize,
    v: &Vector,
    ws: &IterationWorkspace,
) -> Result<()> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            stage,
            iteration: n,
            workspace: Box::new(ws.clone()),
        })
    }
}

/// One iteration of the error-tolerant primal-dual recursion, block by block:
///
/// ```text
/// y1 = x − γ(Cx + Σ L_i*v_i + a1)
/// p1 = J_{γA}(y1 + γz) + b1
/// for each i:
///   y2_i = v_i + γ(L_i x − D_i⁻¹v_i + a2_i)
///   p2_i = J_{γB_i⁻¹}(y2_i − γr_i) + b2_i
///   q2_i = p2_i + γ(L_i p1 − D_i⁻¹p2_i + c2_i)
///   v_i⁺ = v_i − y2_i + q2_i
/// q1 = p1 − γ(Cp1 + Σ L_i*p2_i + c1)
/// x⁺ = x − y1 + q1
/// ```
pub fn fbf_step(
    spec: &ProblemSpec,
    state: &PrimalDualState,
    gamma: f64,
    errors: &IterationErrors,
    counts: Option<&mut EvaluationCounts>,
) -> Result<(PrimalDualState, IterationWorkspace)> {
    let m = spec.m();
    let n = state.n;
    let mut scratch = EvaluationCounts::default();
    let counts = counts.unwrap_or(&mut scratch);
    counts.ensure(m);
    let mut ws = IterationWorkspace::default();

    let mut s = spec.c().apply(&state.x);
    counts.c += 1;
    for (i, blk) in spec.blocks().iter().enumerate() {
        s += blk.l.apply_adjoint(&state.v[i]);
        counts.l_adjoint[i] += 1;
    }
    add_opt(&mut s, &errors.a1);
    ws.y1 = &state.x - s * gamma;
    finite_or("y1", n, &ws.y1, &ws)?;

    let mut p1 = spec.a().resolvent(gamma, &(&ws.y1 + spec.z() * gamma));
    counts.a_resolvent += 1;
    add_opt(&mut p1, &errors.b1);
    ws.p1 = p1;
    finite_or("p1", n, &ws.p1, &ws)?;

    let mut v_next = Vec::with_capacity(m);
    for (i, blk) in spec.blocks().iter().enumerate() {
        let vi = &state.v[i];
        let mut t = blk.l.apply(&state.x) - blk.d_inv.apply(vi);
        counts.l_apply[i] += 1;
        counts.d_inv[i] += 1;
        add_opt(&mut t, &errors.block(&errors.a2, i));
        let y2 = vi + t * gamma;
        finite_or("y2", n, &y2, &ws)?;

        let mut p2 = resolvent_of_inverse(&blk.b, gamma, &(&y2 - &blk.r * gamma));
        counts.b_resolvent[i] += 1;
        add_opt(&mut p2, &errors.block(&errors.b2, i));
        finite_or("p2", n, &p2, &ws)?;

        let mut u = blk.l.apply(&ws.p1) - blk.d_inv.apply(&p2);
        counts.l_apply[i] += 1;
        counts.d_inv[i] += 1;
        add_opt(&mut u, &errors.block(&errors.c2, i));
        let q2 = &p2 + u * gamma;
        finite_or("q2", n, &q2, &ws)?;

        v_next.push(vi - &y2 + &q2);
        ws.y2.push(y2);
        ws.p2.push(p2);
        ws.q2.push(q2);
    }

    let mut s = spec.c().apply(&ws.p1);
    counts.c += 1;
    for (i, blk) in spec.blocks().iter().enumerate() {
        s += blk.l.apply_adjoint(&ws.p2[i]);
        counts.l_adjoint[i] += 1;
    }
    add_opt(&mut s, &errors.c1);
    ws.q1 = &ws.p1 - s * gamma;
    finite_or("q1", n, &ws.q1, &ws)?;

    let x_next = &state.x - &ws.y1 + &ws.q1;
    finite_or("x", n, &x_next, &ws)?;
    for vi in &v_next {
        finite_or("v", n, vi, &ws)?;
    }
    Ok((
        PrimalDualState {
            x: x_next,
            v: v_next,
            n: n + 1,
        },
        ws,
    ))
}

/// Error vectors on `K` for the compact recursion. The dual components of `a`
/// and `c` enter with a minus sign because `Q` carries `−L_i x + D_i⁻¹v_i`.
#[derive(Debug, Clone)]
pub struct ProductErrors {
    pub a: Option<Vector>,
    pub b: Option<Vector>,
    pub c: Option<Vector>,
}

impl ProductErrors {
    pub fn from_iteration(spec: &ProblemSpec, e: &IterationErrors) -> Self {
        let layout = spec.layout();
        let m = spec.m();
        let build = |first: &Option<Vector>, rest: &[Option<Vector>], sign: f64| {
            if first.is_none() && rest.iter().all(Option::is_none) {
                return None;
            }
            let mut blocks = BlockVector::zeros(&layout).blocks;
            if let Some(f) = first {
                blocks[0] = f.clone();
            }
            for i in 0..m {
                if let Some(Some(r)) = rest.get(i) {
                    blocks[i + 1] = r * sign;
                }
            }
            Some(BlockVector::new(blocks).flatten())
        };
        ProductErrors {
            a: build(&e.a1, &e.a2, -1.0),
            b: build(&e.b1, &e.b2, 1.0),
            c: build(&e.c1, &e.c2, -1.0),
        }
    }
}

/// Result of one compact step: `(x⁺, y, p, q)` on `K`.
#[derive(Debug, Clone)]
pub struct CompactStep {
    pub next: Vector,
    pub y: Vector,
    pub p: Vector,
    pub q: Vector,
}

/// The same iteration written on the product space:
/// `y = x − γ(Qx + a)`, `p = J_{γM}y + b`, `q = p − γ(Qp + c)`, `x⁺ = x − y + q`.
pub fn fbf_step_compact(
    m_op: &ResolventOperator,
    q_op: &LipschitzOperator,
    x: &Vector,
    gamma: f64,
    errors: &ProductErrors,
) -> CompactStep {
    let mut qx = q_op.apply(x);
    add_opt(&mut qx, &errors.a);
    let y = x - qx * gamma;
    let mut p = m_op.resolvent(gamma, &y);
    add_opt(&mut p, &errors.b);
    let mut qp = q_op.apply(&p);
    add_opt(&mut qp, &errors.c);
    let q = &p - qp * gamma;
    let next = x - &y + &q;
    CompactStep { next, y, p, q }
}
