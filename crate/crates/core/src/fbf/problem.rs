use crate::error::{Error, Result};
use crate::linalg::{operator_norm, BlockLayout, LinearOperator, Space, Vector};
use crate::operators::{
    resolvent_of_inverse, LipschitzOperator, ParallelSumBlock, ResolventOperator,
};

/// One coupling term `L_i*((B_i □ D_i)(L_i x − r_i))`.
#[derive(Debug, Clone)]
pub struct Block {
    pub b: ResolventOperator,
    pub d_inv: LipschitzOperator,
    pub l: LinearOperator,
    pub r: Vector,
    l_norm: Option<f64>,
}

impl Block {
    pub fn new(pair: ParallelSumBlock, l: LinearOperator, r: Vector) -> Result<Self> {
        let g = pair.space();
        if l.codomain() != g {
            return Err(Error::shape("block operator codomain", g.dim(), l.codomain().dim()));
        }
        g.check(&r, "block offset r")?;
        let l_norm = l.exact_norm();
        Ok(Block {
            b: pair.b,
            d_inv: pair.d_inv,
            l,
            r,
            l_norm,
        })
    }

    pub fn with_norm(mut self, norm: f64) -> Self {
        self.l_norm = Some(norm);
        self
    }

    pub fn space(&self) -> Space {
        self.b.space()
    }

    pub fn l_norm(&self) -> Option<f64> {
        self.l_norm
    }

    pub fn nu(&self) -> f64 {
        self.d_inv.lipschitz()
    }
}

/// Data of the primal inclusion
/// `z ∈ Ax + Σ L_i*((B_i □ D_i)(L_i x − r_i)) + Cx`
/// and its dual.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    space: Space,
    z: Vector,
    a: ResolventOperator,
    c: LipschitzOperator,
    blocks: Vec<Block>,
}

impl ProblemSpec {
    pub fn new(
        space: Space,
        z: Vector,
        a: ResolventOperator,
        c: LipschitzOperator,
        blocks: Vec<Block>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Config("at least one block is required".into()));
        }
        space.check(&z, "z")?;
        if a.space() != space {
            return Err(Error::shape("A", space.dim(), a.space().dim()));
        }
        if c.space() != space {
            return Err(Error::shape("C", space.dim(), c.space().dim()));
        }
        for (i, blk) in blocks.iter().enumerate() {
            if blk.l.domain() != space {
                return Err(Error::shape(
                    format!("L_{} domain", i + 1),
                    space.dim(),
                    blk.l.domain().dim(),
                ));
            }
            if blk.d_inv.space() != blk.space() {
                return Err(Error::shape(
                    format!("D_{}^-1", i + 1),
                    blk.space().dim(),
                    blk.d_inv.space().dim(),
                ));
            }
            if blk.l_norm == Some(0.0) {
                return Err(Error::Config(format!("L_{} must be nonzero", i + 1)));
            }
        }
        Ok(ProblemSpec {
            space,
            z,
            a,
            c,
            blocks,
        })
    }

    /// The `m = 1` case: `z ∈ Ax + L*((B □ D)(Lx − r)) + Cx`.
    pub fn single_block(
        z: Vector,
        a: ResolventOperator,
        c: LipschitzOperator,
        block: Block,
    ) -> Result<Self> {
        Self::new(a.space(), z, a, c, vec![block])
    }

    /// Fill in missing `‖L_i‖` by power iteration.
    pub fn estimate_norms(&mut self) -> Result<()> {
        for (i, blk) in self.blocks.iter_mut().enumerate() {
            if blk.l_norm.is_none() {
                let n = operator_norm(&blk.l, 1e-12, 10_000)?;
                if n == 0.0 {
                    return Err(Error::Config(format!("L_{} must be nonzero", i + 1)));
                }
                blk.l_norm = Some(n);
            }
        }
        Ok(())
    }

    pub fn with_estimated_norms(mut self) -> Result<Self> {
        self.estimate_norms()?;
        Ok(self)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn a(&self) -> &ResolventOperator {
        &self.a
    }

    pub fn c(&self) -> &LipschitzOperator {
        &self.c
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn mu(&self) -> f64 {
        self.c.lipschitz()
    }

    /// Block sizes of `K = H ⊕ G_1 ⊕ … ⊕ G_m`.
    pub fn layout(&self) -> BlockLayout {
        let mut dims = vec![self.space.dim()];
        dims.extend(self.blocks.iter().map(|b| b.space().dim()));
        BlockLayout::new(dims)
    }
}

/// `β = max{μ, ν_1, …, ν_m} + sqrt(Σ ‖L_i‖²)`.
pub fn compute_beta(spec: &ProblemSpec) -> Result<f64> {
    let mut max_lip = spec.mu();
    let mut sum_sq = 0.0;
    for (i, blk) in spec.blocks.iter().enumerate() {
        let n = blk
            .l_norm
            .ok_or_else(|| Error::Config(format!("missing norm estimate for L_{}", i + 1)))?;
        max_lip = max_lip.max(blk.nu());
        sum_sq += n * n;
    }
    Ok(max_lip + sum_sq.sqrt())
}

/// Resolvent of `M(x, v) = (−z + Ax) × (r_1 + B_1⁻¹v_1) × … × (r_m + B_m⁻¹v_m)`
/// on the flattened product space:
/// `J_{γM}(x, v) = (J_{γA}(x + γz), J_{γB_1⁻¹}(v_1 − γr_1), …)`.
pub fn assemble_m(spec: &ProblemSpec) -> ResolventOperator {
    let layout = spec.layout();
    let total = Space::new(layout.total()).expect("nonempty product space");
    let spec = spec.clone();
    ResolventOperator::new(total, move |gamma, flat| {
        let parts = layout.split(flat).expect("product-space vector");
        let mut out = Vector::zeros(flat.len());
        let first = spec.a.resolvent(gamma, &(&parts.blocks[0] + spec.z() * gamma));
        out.rows_mut(0, first.len()).copy_from(&first);
        for (i, blk) in spec.blocks.iter().enumerate() {
            let p = resolvent_of_inverse(&blk.b, gamma, &(&parts.blocks[i + 1] - &blk.r * gamma));
            out.rows_mut(layout.offset(i + 1), p.len()).copy_from(&p);
        }
        out
    })
}

/// `Q(x, v) = (Cx + Σ L_i*v_i, −L_1x + D_1⁻¹v_1, …, −L_mx + D_m⁻¹v_m)` on the
/// flattened product space, with Lipschitz constant `β`.
pub fn assemble_q(spec: &ProblemSpec) -> Result<LipschitzOperator> {
    let beta = compute_beta(spec)?;
    let layout = spec.layout();
    let total = Space::new(layout.total())?;
    let spec = spec.clone();
    LipschitzOperator::new(
        total,
        move |flat| {
            let parts = layout.split(flat).expect("product-space vector");
            let x = &parts.blocks[0];
            let mut out = Vector::zeros(flat.len());
            let mut first = spec.c.apply(x);
            for (i, blk) in spec.blocks.iter().enumerate() {
                first += blk.l.apply_adjoint(&parts.blocks[i + 1]);
            }
            out.rows_mut(0, first.len()).copy_from(&first);
            for (i, blk) in spec.blocks.iter().enumerate() {
                let vi = &parts.blocks[i + 1];
                let row = blk.d_inv.apply(vi) - blk.l.apply(x);
                out.rows_mut(layout.offset(i + 1), row.len()).copy_from(&row);
            }
            out
        },
        beta,
    )
}
