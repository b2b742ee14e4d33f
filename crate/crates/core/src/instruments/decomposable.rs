use crate::error::{Error, Result};
use crate::numlin::{fro, unitary_residual, zeros, CMatrix, Tolerances};

/// An operator on ⊕_ω ℂ^{m(ω)} of the form (Bψ)(ω) = B_T(ω) ψ(T⁻¹ω).
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposableOp {
    pub fibers: Vec<usize>,
    /// T(ω), a bijection of Ω.
    pub perm: Vec<usize>,
    /// B_T(ω): ℂ^{m(T⁻¹ω)} → ℂ^{m(ω)}.
    pub blocks: Vec<CMatrix>,
}

pub(crate) fn offsets(fibers: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(fibers.len());
    let mut acc = 0;
    for &m in fibers {
        o.push(acc);
        acc += m;
    }
    o
}

fn inverse_perm(perm: &[usize]) -> Result<Vec<usize>> {
    let mut inv = vec![usize::MAX; perm.len()];
    for (w, &t) in perm.iter().enumerate() {
        if t >= perm.len() || inv[t] != usize::MAX {
            return Err(Error::invalid("T is not a bijection of Ω"));
        }
        inv[t] = w;
    }
    Ok(inv)
}

/// Fiber projection χ̂_{ω}.
pub fn fiber_projection(fibers: &[usize], omega: usize) -> CMatrix {
    let n: usize = fibers.iter().sum();
    let o = offsets(fibers);
    let mut p = zeros(n, n);
    for i in 0..fibers[omega] {
        p[(o[omega] + i, o[omega] + i)] = crate::numlin::ONE;
    }
    p
}

impl DecomposableOp {
    pub fn new(fibers: Vec<usize>, perm: Vec<usize>, blocks: Vec<CMatrix>) -> Result<Self> {
        if perm.len() != fibers.len() || blocks.len() != fibers.len() {
            return Err(Error::dim("need one block and one image per point of Ω"));
        }
        let inv = inverse_perm(&perm)?;
        for (w, b) in blocks.iter().enumerate() {
            if b.shape() != (fibers[w], fibers[inv[w]]) {
                return Err(Error::dim(format!(
                    "block {w} must be {}x{}",
                    fibers[w],
                    fibers[inv[w]]
                )));
            }
        }
        Ok(DecomposableOp { fibers, perm, blocks })
    }

    pub fn assemble(&self) -> CMatrix {
        let n: usize = self.fibers.iter().sum();
        let o = offsets(&self.fibers);
        let inv = inverse_perm(&self.perm).expect("validated");
        let mut b = zeros(n, n);
        for (w, blk) in self.blocks.iter().enumerate() {
            b.view_mut((o[w], o[inv[w]]), blk.shape()).copy_from(blk);
        }
        b
    }

    /// Every block unitary and m(Tω) = m(ω).
    pub fn blocks_unitary(&self, tol: &Tolerances) -> bool {
        self.perm.iter().enumerate().all(|(w, &t)| self.fibers[t] == self.fibers[w])
            && self.blocks.iter().all(|b| {
                b.is_square() && unitary_residual(b) <= tol.unitary_fro * (b.nrows() as f64).sqrt().max(1.0)
            })
    }
}

/// Reads off the blocks of B, after checking B χ̂_{ω} = χ̂_{Tω} B for every singleton.
pub fn decomposable_extract(b: &CMatrix, fibers: &[usize], perm: &[usize], tol: &Tolerances) -> Result<DecomposableOp> {
    let n: usize = fibers.iter().sum();
    if b.shape() != (n, n) || perm.len() != fibers.len() {
        return Err(Error::dim("operator, fibers and bijection disagree in size"));
    }
    let inv = inverse_perm(perm)?;
    let scale = fro(b).max(1.0);
    let mut worst = (0.0f64, 0usize);
    for w in 0..fibers.len() {
        let r = fro(&(b * fiber_projection(fibers, w) - fiber_projection(fibers, perm[w]) * b));
        if r > worst.0 {
            worst = (r, w);
        }
    }
    if worst.0 > tol.recon_fro * scale {
        return Err(Error::tolerance(
            format!("intertwining of the singleton {{{}}}", worst.1),
            worst.0,
            tol.recon_fro * scale,
        ));
    }
    let o = offsets(fibers);
    let blocks = (0..fibers.len())
        .map(|w| b.view((o[w], o[inv[w]]), (fibers[w], fibers[inv[w]])).into_owned())
        .collect();
    let op = DecomposableOp::new(fibers.to_vec(), perm.to_vec(), blocks)?;
    // (B†ψ)(ω) = B_T(Tω)† ψ(Tω)
    let mut adj = zeros(n, n);
    for w in 0..fibers.len() {
        let t = perm[w];
        adj.view_mut((o[w], o[t]), (fibers[w], fibers[t]))
            .copy_from(&op.blocks[t].adjoint());
    }
    let r = fro(&(adj - b.adjoint()));
    if r > tol.recon_fro * scale {
        return Err(Error::tolerance("adjoint block identity", r, tol.recon_fro * scale));
    }
    Ok(op)
}
