use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::group::FiniteGroup;
use super::rep::MultiplierRep;
use crate::error::{Error, Result};
use crate::numlin::{
    c, constrained_commutant, direct_sum, eigh, fro, hstack, identity, kron, unitary_residual, zeros, CMatrix,
    Tolerances, C64,
};

const CHAR_TOL: f64 = 1e-6;

/// A unitary irreducible (multiplier) representation given by its matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Irrep {
    pub dim: usize,
    pub matrices: Vec<CMatrix>,
    pub character: Vec<C64>,
}

impl Irrep {
    fn new(matrices: Vec<CMatrix>) -> Self {
        let dim = matrices[0].nrows();
        let character = matrices.iter().map(|m| m.trace()).collect();
        Irrep {
            dim,
            matrices,
            character,
        }
    }
}

/// One isotypic component: `columns` (dim U × n·m) satisfy
/// columns† U(g) columns = τ_g ⊗ I_m.
#[derive(Debug, Clone)]
pub struct IrrepBlock {
    pub irrep: Irrep,
    pub multiplicity: usize,
    pub columns: CMatrix,
}

impl IrrepBlock {
    /// Columns belonging to the j-th copy of τ (dim U × n).
    pub fn copy(&self, j: usize) -> CMatrix {
        let n = self.irrep.dim;
        let m = self.multiplicity;
        CMatrix::from_fn(self.columns.nrows(), n, |r, a| self.columns[(r, a * m + j)])
    }

    /// Columns spanning the multiplicity space at irrep index a (dim U × m).
    pub fn multiplicity_slice(&self, a: usize) -> CMatrix {
        let m = self.multiplicity;
        CMatrix::from_fn(self.columns.nrows(), m, |r, j| self.columns[(r, a * m + j)])
    }
}

#[derive(Debug, Clone)]
pub struct IrrepDecomposition {
    pub rep: MultiplierRep,
    pub blocks: Vec<IrrepBlock>,
    /// V with V†U(g)V = ⊕_τ τ_g ⊗ I_{m(τ)}.
    pub v: CMatrix,
}

impl IrrepDecomposition {
    /// ⊕_τ τ_g ⊗ I_m.
    pub fn block_form(&self, g: usize) -> CMatrix {
        let parts: Vec<CMatrix> = self
            .blocks
            .iter()
            .map(|b| kron(&b.irrep.matrices[g], &identity(b.multiplicity)))
            .collect();
        direct_sum(&parts)
    }

    /// Largest ‖V†U(g)V − ⊕ τ_g⊗I‖_F over g.
    pub fn residual(&self) -> f64 {
        self.rep
            .group()
            .elements()
            .map(|g| fro(&(self.v.adjoint() * self.rep.get(g) * &self.v - self.block_form(g))))
            .fold(0.0, f64::max)
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&a + a.adjoint()).scale(0.5)
}

/// Splits the span of `basis` (orthonormal columns, invariant under U) into irreducible
/// invariant subspaces.
fn split_irreducible(
    rep: &MultiplierRep,
    basis: CMatrix,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
    depth: usize,
    out: &mut Vec<CMatrix>,
) -> Result<()> {
    let k = basis.ncols();
    let restricted: Vec<CMatrix> = rep.matrices().iter().map(|u| basis.adjoint() * u * &basis).collect();
    let comm = constrained_commutant(k, &restricted, &[], true, tol)?;
    if comm.len() <= 1 {
        out.push(basis);
        return Ok(());
    }
    if depth > 32 {
        return Err(Error::Domain("irrep refinement did not converge".into()));
    }
    let mut h = zeros(k, k);
    for d in &comm {
        h += d * c(rng.gen_range(-1.0..1.0), 0.0);
    }
    for cluster in eigen_clusters(&h) {
        split_irreducible(rep, &basis * cluster, rng, tol, depth + 1, out)?;
    }
    Ok(())
}

/// Orthonormal eigenvector groups of a Hermitian matrix, one group per distinct eigenvalue.
fn eigen_clusters(h: &CMatrix) -> Vec<CMatrix> {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let spread = vals.first().copied().unwrap_or(0.0) - vals.last().copied().unwrap_or(0.0);
    let gap = 1e-7 * spread.max(1e-300).max(vals.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut groups: Vec<Vec<usize>> = vec![];
    for i in 0..n {
        match groups.last_mut() {
            Some(g) if vals[*g.last().unwrap()] - vals[i] <= gap => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
        .into_iter()
        .map(|g| CMatrix::from_fn(n, g.len(), |r, j| vecs[(r, g[j])]))
        .collect()
}

fn same_character(a: &[C64], b: &[C64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).norm() < CHAR_TOL)
}

fn char_key(ch: &[C64]) -> Vec<(i64, i64)> {
    ch.iter()
        .map(|z| ((z.re / CHAR_TOL).round() as i64, (z.im / CHAR_TOL).round() as i64))
        .collect()
}

/// Unitary X with X τ¹_g = τ^k_g X, found by group-averaging a random seed matrix.
fn intertwiner(
    a: &[CMatrix],
    b: &[CMatrix],
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let n = a[0].nrows();
    for _ in 0..8 {
        let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut x = zeros(n, n);
        for (ag, bg) in a.iter().zip(b) {
            x += bg * &m * ag.adjoint();
        }
        let norm2 = (x.adjoint() * &x).trace().re / n as f64;
        if norm2 < 1e-12 {
            continue;
        }
        let x = x.unscale(norm2.sqrt());
        let q = &x * crate::numlin::spectral_fn(&(x.adjoint() * &x), |l| 1.0 / l.max(1e-300).sqrt());
        let resid = a
            .iter()
            .zip(b)
            .map(|(ag, bg)| fro(&(&q * ag - bg * &q)))
            .fold(0.0, f64::max);
        if resid <= tol.recon_fro * n as f64 {
            return Ok(q);
        }
        return Err(Error::tolerance("irrep intertwiner", resid, tol.recon_fro * n as f64));
    }
    Err(Error::Domain("equal characters but no intertwiner found".into()))
}

/// Decomposes a unitary multiplier representation into irreducibles,
/// V†U(g)V = ⊕_τ τ_g ⊗ I_{m(τ)}. Blocks are ordered by dimension, then by character.
pub fn irrep_decompose(rep: &MultiplierRep, seed: u64, tol: &Tolerances) -> Result<IrrepDecomposition> {
    if !rep.is_unitary() {
        return Err(Error::invalid("irrep_decompose needs a unitary representation"));
    }
    rep.validate(tol)?;
    let n = rep.dim();
    let order = rep.group().order() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hermitian(&mut rng, n);
    let mut avg = zeros(n, n);
    for u in rep.matrices() {
        avg += u * &h * u.adjoint();
    }
    avg.unscale_mut(order);

    let mut pieces = vec![];
    for cluster in eigen_clusters(&avg) {
        split_irreducible(rep, cluster, &mut rng, tol, 0, &mut pieces)?;
    }

    // group equivalent pieces
    let restricted = |e: &CMatrix| -> Vec<CMatrix> { rep.matrices().iter().map(|u| e.adjoint() * u * e).collect() };
    let mut classes: Vec<(Irrep, Vec<CMatrix>)> = vec![];
    for e in pieces {
        let mats = restricted(&e);
        let ir = Irrep::new(mats);
        match classes
            .iter_mut()
            .find(|(rep0, _)| rep0.dim == ir.dim && same_character(&rep0.character, &ir.character))
        {
            Some((_, members)) => members.push(e),
            None => classes.push((ir, vec![e])),
        }
    }
    classes.sort_by(|(a, _), (b, _)| {
        a.dim
            .cmp(&b.dim)
            .then_with(|| char_key(&b.character).cmp(&char_key(&a.character)))
    });

    let mut blocks = vec![];
    for (ir, members) in classes {
        let m = members.len();
        let dim = ir.dim;
        let mut aligned = vec![members[0].clone()];
        for e in &members[1..] {
            let other = restricted(e);
            let x = intertwiner(&ir.matrices, &other, &mut rng, tol)?;
            aligned.push(e * x);
        }
        let columns = CMatrix::from_fn(n, dim * m, |r, col| aligned[col % m][(r, col / m)]);
        blocks.push(IrrepBlock {
            irrep: ir,
            multiplicity: m,
            columns,
        });
    }
    let v = hstack(n, &blocks.iter().map(|b| b.columns.clone()).collect::<Vec<_>>());
    let d = IrrepDecomposition {
        rep: rep.clone(),
        blocks,
        v,
    };
    let u = unitary_residual(&d.v);
    let scale = (n as f64).sqrt().max(1.0);
    if u > tol.unitary_fro * scale {
        return Err(Error::tolerance("irrep change of basis unitarity", u, tol.unitary_fro * scale));
    }
    let r = d.residual();
    if r > tol.recon_fro * scale {
        return Err(Error::tolerance("irrep block form", r, tol.recon_fro * scale));
    }
    Ok(d)
}

/// A complete set of unitary irreps of an ordinary finite group.
#[derive(Debug, Clone)]
pub struct IrrepSet {
    pub group: FiniteGroup,
    pub irreps: Vec<Irrep>,
}

impl IrrepSet {
    /// All irreps, read off from the regular representation.
    pub fn of_group(group: &FiniteGroup, seed: u64, tol: &Tolerances) -> Result<Self> {
        let d = irrep_decompose(&MultiplierRep::regular(group), seed, tol)?;
        let set = IrrepSet {
            group: group.clone(),
            irreps: d.blocks.into_iter().map(|b| b.irrep).collect(),
        };
        set.check_complete()?;
        Ok(set)
    }

    pub fn check_complete(&self) -> Result<()> {
        let s: usize = self.irreps.iter().map(|t| t.dim * t.dim).sum();
        if s != self.group.order() {
            return Err(Error::invalid(format!(
                "incomplete irrep set: sum of squared dimensions {s} != |G| = {}",
                self.group.order()
            )));
        }
        Ok(())
    }

    /// Φ(τ) = Σ_g φ(g) τ_g.
    pub fn fourier(&self, phi: &[C64]) -> Result<Vec<CMatrix>> {
        self.check_complete()?;
        if phi.len() != self.group.order() {
            return Err(Error::dim("function length must equal |G|"));
        }
        Ok(self
            .irreps
            .iter()
            .map(|t| {
                let mut acc = zeros(t.dim, t.dim);
                for (g, v) in phi.iter().enumerate() {
                    acc += &t.matrices[g] * *v;
                }
                acc
            })
            .collect())
    }

    /// φ(g) = (1/|G|) Σ_τ n(τ) tr(τ_g† Φ(τ)).
    pub fn plancherel_inverse(&self, family: &[CMatrix]) -> Result<Vec<C64>> {
        self.check_complete()?;
        if family.len() != self.irreps.len() {
            return Err(Error::dim("one Fourier coefficient per irrep required"));
        }
        let n = self.group.order() as f64;
        Ok(self
            .group
            .elements()
            .map(|g| {
                self.irreps
                    .iter()
                    .zip(family)
                    .map(|(t, f)| (t.matrices[g].adjoint() * f).trace() * t.dim as f64)
                    .sum::<C64>()
                    / n
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::ONE;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn trivial_rep_one_block() {
        let r = MultiplierRep::trivial(FiniteGroup::cyclic(2), 3);
        let d = irrep_decompose(&r, 1, &tol()).unwrap();
        assert_eq!(d.blocks.len(), 1);
        assert_eq!(d.blocks[0].multiplicity, 3);
        assert_eq!(d.blocks[0].irrep.dim, 1);
    }

    #[test]
    fn regular_z3_characters() {
        let g = FiniteGroup::cyclic(3);
        let d = irrep_decompose(&MultiplierRep::regular(&g), 7, &tol()).unwrap();
        assert_eq!(d.blocks.len(), 3);
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        for target in [ONE, w, w * w] {
            let found = d.blocks.iter().any(|b| (b.irrep.character[1] - target).norm() < 1e-9);
            assert!(found);
        }
        assert!(d.blocks.iter().all(|b| b.multiplicity == 1));
    }

    #[test]
    fn regular_s3_dims_and_multiplicities() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let d = irrep_decompose(&MultiplierRep::regular(&g), 3, &tol()).unwrap();
        let dm: Vec<(usize, usize)> = d.blocks.iter().map(|b| (b.irrep.dim, b.multiplicity)).collect();
        assert_eq!(dm, vec![(1, 1), (1, 1), (2, 2)]);
        // trivial irrep first among 1-dim ones
        assert!(d.blocks[0].irrep.character.iter().all(|z| (z - ONE).norm() < 1e-9));
        assert!(d.residual() < 1e-10);
    }

    #[test]
    fn deterministic_for_seed() {
        let g = FiniteGroup::dihedral(4);
        let a = irrep_decompose(&MultiplierRep::regular(&g), 11, &tol()).unwrap();
        let b = irrep_decompose(&MultiplierRep::regular(&g), 11, &tol()).unwrap();
        assert_eq!(a.v, b.v);
    }

    #[test]
    fn projectors_sum_to_identity() {
        let g = FiniteGroup::dihedral(3);
        let r = MultiplierRep::regular(&g);
        let d = irrep_decompose(&r, 5, &tol()).unwrap();
        let mut p = zeros(6, 6);
        let mut total = 0;
        for b in &d.blocks {
            p += &b.columns * b.columns.adjoint();
            total += b.irrep.dim * b.multiplicity;
        }
        assert_eq!(total, 6);
        assert!(fro(&(p - identity(6))) < 1e-10);
    }

    #[test]
    fn fourier_examples() {
        let g = FiniteGroup::cyclic(2);
        let set = IrrepSet::of_group(&g, 0, &tol()).unwrap();
        let f = set.fourier(&[ONE, ONE]).unwrap();
        // trivial first, then sign
        assert!((f[0][(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        assert!(f[1][(0, 0)].norm() < 1e-12);

        let s3 = FiniteGroup::symmetric(3).unwrap();
        let set = IrrepSet::of_group(&s3, 0, &tol()).unwrap();
        let mut delta = vec![c(0.0, 0.0); 6];
        delta[s3.identity()] = ONE;
        for (t, phi) in set.irreps.iter().zip(set.fourier(&delta).unwrap()) {
            assert!(fro(&(phi - identity(t.dim))) < 1e-12);
        }
    }

    #[test]
    fn incomplete_set_rejected() {
        let g = FiniteGroup::cyclic(3);
        let mut set = IrrepSet::of_group(&g, 0, &tol()).unwrap();
        set.irreps.pop();
        assert!(set.fourier(&[ONE; 3]).is_err());
    }
}
