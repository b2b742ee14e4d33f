//! Positive covariant kernels over a finite set X, their minimal covariant Kolmogorov
//! decompositions and the extremality test.
//!
//! A kernel is stored through its blocks T_{x,y}, so that K_{x,y}(v,w) = v†T_{x,y}w on
//! V = L(ℂ^k; ℂ^{n_V}). The action of g on V is v ↦ U(g)v.

use crate::error::{Error, Result};
use crate::fingroup::{GroupAction, MultiplierRep, TwoCocycle};
use crate::numlin::{
    constrained_commutant, fro, hstack, identity, lstsq_define, min_eigenvalue, psd_factor,
    spectral_norm, unitary_residual, zeros, CMatrix, Tolerances, C64, I, ONE,
};
use crate::report::Certificate;

#[derive(Debug, Clone, PartialEq)]
pub struct CovariantKernelSpec {
    pub action: GroupAction,
    /// α(g, x), indexed `[g][x]`.
    pub alpha: Vec<Vec<C64>>,
    pub sigma: TwoCocycle,
    /// Representation on ℂ^{n_V}; its own cocycle may be nontrivial.
    pub u: MultiplierRep,
    /// Base algebra M_k. The block identities do not depend on k.
    pub k: usize,
    /// T_{x,y}, indexed `[x][y]`, each n_V × n_V.
    pub blocks: Vec<Vec<CMatrix>>,
}

impl CovariantKernelSpec {
    /// A kernel with trivial symmetry (G = {e}, α ≡ 1, U = I).
    pub fn invariant(blocks: Vec<Vec<CMatrix>>, k: usize) -> Result<Self> {
        let x = blocks.len();
        let n_v = blocks.first().and_then(|r| r.first()).map_or(0, |b| b.nrows());
        let g = crate::fingroup::FiniteGroup::trivial();
        Ok(CovariantKernelSpec {
            action: GroupAction::trivial(g.clone(), x),
            alpha: vec![vec![ONE; x]],
            sigma: TwoCocycle::trivial(1),
            u: MultiplierRep::trivial(g, n_v),
            k,
            blocks,
        })
    }

    pub fn x_size(&self) -> usize {
        self.action.set_size()
    }

    pub fn n_v(&self) -> usize {
        self.u.dim()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let nx = self.x_size();
        let n = self.n_v();
        let order = self.action.group().order();
        if self.u.group().order() != order || self.sigma.order() != order {
            return Err(Error::dim("action, cocycle and representation use different groups"));
        }
        if self.alpha.len() != order || self.alpha.iter().any(|r| r.len() != nx) {
            return Err(Error::dim("alpha must be a |G| x |X| table"));
        }
        if self.blocks.len() != nx {
            return Err(Error::dim("need one row of blocks per point of X"));
        }
        for row in &self.blocks {
            if row.len() != nx || row.iter().any(|b| b.shape() != (n, n)) {
                return Err(Error::dim(format!("each block must be {n}x{n}, one per pair (x,y)")));
            }
        }
        Ok(())
    }

    /// The |X|·n_V square block matrix [T_{x,y}].
    pub fn gram(&self) -> CMatrix {
        let n = self.n_v();
        let nx = self.x_size();
        let mut m = zeros(nx * n, nx * n);
        for x in 0..nx {
            for y in 0..nx {
                m.view_mut((x * n, y * n), (n, n)).copy_from(&self.blocks[x][y]);
            }
        }
        m
    }

    /// Same symmetry data with new blocks.
    pub fn with_blocks(&self, blocks: Vec<Vec<CMatrix>>) -> Self {
        CovariantKernelSpec {
            blocks,
            ..self.clone()
        }
    }

    fn scale(&self) -> f64 {
        spectral_norm(&self.gram()).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub positive: bool,
    pub covariant: bool,
    pub alpha_ok: bool,
    pub min_eig: f64,
    pub covariance_residual: f64,
    pub alpha_residual: f64,
    pub first_violation: Option<String>,
}

impl KernelReport {
    pub fn ok(&self) -> bool {
        self.positive && self.covariant && self.alpha_ok
    }
}

/// Checks positivity, block covariance and the α-cocycle identity exhaustively.
pub fn validate_kernel(spec: &CovariantKernelSpec, tol: &Tolerances) -> Result<KernelReport> {
    spec.check_shapes()?;
    let g = spec.action.group();
    let nx = spec.x_size();
    let mut first = None;
    let mut note = |msg: String| {
        if first.is_none() {
            first = Some(msg);
        }
    };

    let mut alpha_residual = 0.0f64;
    let e = g.identity();
    for x in 0..nx {
        let r = (spec.alpha[e][x] - ONE).norm();
        alpha_residual = alpha_residual.max(r);
        if r > tol.recon_fro {
            note(format!("alpha(e, x={x}) != 1"));
        }
    }
    for a in g.elements() {
        for b in g.elements() {
            for x in 0..nx {
                let lhs = spec.alpha[g.mul(a, b)][x];
                let rhs = spec.sigma.get(a, b) * spec.alpha[b][x] * spec.alpha[a][spec.action.act(b, x)];
                let r = (lhs - rhs).norm();
                alpha_residual = alpha_residual.max(r);
                if r > tol.recon_fro * lhs.norm().max(1.0) {
                    note(format!("alpha cocycle identity fails at (g={a}, h={b}, x={x})"));
                }
            }
        }
    }
    let alpha_ok = alpha_residual <= tol.recon_fro * spec_alpha_scale(spec);

    let scale = spec.scale();
    let mut covariance_residual = 0.0f64;
    for a in g.elements() {
        let ui = spec.u.get(g.inv(a));
        for x in 0..nx {
            for y in 0..nx {
                let (ax, ay) = (spec.action.act(a, x), spec.action.act(a, y));
                let phase = spec.alpha[a][x].conj() * spec.alpha[a][y];
                let moved = ui.adjoint() * &spec.blocks[x][y] * ui * phase;
                let r = fro(&(&spec.blocks[ax][ay] - moved));
                covariance_residual = covariance_residual.max(r);
                if r > tol.recon_fro * scale {
                    note(format!("block covariance fails at (g={a}, x={x}, y={y}), residual {r:.3e}"));
                }
            }
        }
    }
    let covariant = covariance_residual <= tol.recon_fro * scale;

    let gram = spec.gram();
    let herm = fro(&(&gram - gram.adjoint()));
    let min_eig = if gram.nrows() == 0 { 0.0 } else { min_eigenvalue(&gram)? };
    let positive = herm <= tol.psd_eig * scale && min_eig >= -tol.psd_eig * scale;
    if !positive {
        note(format!("kernel block matrix is not PSD (min eigenvalue {min_eig:.3e})"));
    }

    Ok(KernelReport {
        positive,
        covariant,
        alpha_ok,
        min_eig,
        covariance_residual,
        alpha_residual,
        first_violation: first,
    })
}

fn spec_alpha_scale(spec: &CovariantKernelSpec) -> f64 {
    spec.alpha
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(1.0, f64::max)
}

/// F_x† F_y = T_{x,y}, with Ũ(g) F_x = α(g,x)⁻¹ F_{gx} U(g).
#[derive(Debug, Clone)]
pub struct KolmogorovDecomposition {
    pub n: usize,
    /// F_x, each N × n_V.
    pub f: Vec<CMatrix>,
    /// Multiplier representation on ℂ^N with cocycle σ·z (z the cocycle of U).
    pub utilde: MultiplierRep,
    pub certificate: Certificate,
}

impl KolmogorovDecomposition {
    /// [F_0 F_1 …], N × |X|·n_V.
    pub fn stacked(&self) -> CMatrix {
        hstack(self.n, &self.f)
    }

    /// Transports the dilation along a unitary Q: F_x ↦ QF_x, Ũ ↦ QŨQ†.
    pub fn conjugated(&self, q: &CMatrix) -> Self {
        KolmogorovDecomposition {
            n: self.n,
            f: self.f.iter().map(|f| q * f).collect(),
            utilde: self.utilde.conjugated(q),
            certificate: self.certificate.clone(),
        }
    }
}

/// Builds Ũ from a factorization and certifies every decomposition identity.
pub fn decomposition_from_factor(
    spec: &CovariantKernelSpec,
    f: Vec<CMatrix>,
    tol: &Tolerances,
) -> Result<KolmogorovDecomposition> {
    spec.check_shapes()?;
    let nx = spec.x_size();
    let nv = spec.n_v();
    if f.len() != nx {
        return Err(Error::dim("need one factor block per point of X"));
    }
    let n = f.first().map_or(0, |b| b.nrows());
    if f.iter().any(|b| b.shape() != (n, nv)) {
        return Err(Error::dim(format!("factor blocks must all be {n}x{nv}")));
    }
    let scale = spec.scale();
    let mut cert = Certificate::new();

    let mut recon = 0.0f64;
    for x in 0..nx {
        for y in 0..nx {
            recon = recon.max(fro(&(f[x].adjoint() * &f[y] - &spec.blocks[x][y])));
        }
    }
    cert.record("reconstruction", recon, tol.recon_fro * scale);
    let stacked = hstack(n, &f);
    let rank = crate::numlin::numerical_rank(&stacked, tol);
    cert.flag("minimality", rank == n);

    let g = spec.action.group();
    let mut mats = Vec::with_capacity(g.order());
    let mut intertwining = 0.0f64;
    let mut unit = 0.0f64;
    for a in g.elements() {
        let ua = if n == 0 {
            zeros(0, 0)
        } else {
            let pairs: Vec<(CMatrix, CMatrix)> = (0..nx)
                .map(|x| {
                    let target = &f[spec.action.act(a, x)] * spec.u.get(a) / spec.alpha[a][x];
                    (f[x].clone(), target)
                })
                .collect();
            let (m, r) = lstsq_define(&pairs, tol)?;
            intertwining = intertwining.max(r);
            unit = unit.max(unitary_residual(&m));
            m
        };
        mats.push(ua);
    }
    cert.record("utilde_intertwining", intertwining, tol.recon_fro * scale);
    let uscale = (n as f64).sqrt().max(1.0);
    cert.record("utilde_unitary", unit, tol.unitary_fro * uscale);
    let cocycle = spec.sigma.product(spec.u.cocycle());
    let mut cocyc = 0.0f64;
    for a in g.elements() {
        for b in g.elements() {
            let r = fro(&(&mats[a] * &mats[b] - &mats[g.mul(a, b)] * cocycle.get(a, b)));
            cocyc = cocyc.max(r);
        }
    }
    cert.record("utilde_cocycle", cocyc, tol.recon_fro * uscale);
    let cert = cert.require()?;
    let utilde = MultiplierRep::new(g.clone(), cocycle, mats, true, tol)?;
    Ok(KolmogorovDecomposition {
        n,
        f,
        utilde,
        certificate: cert,
    })
}

/// Minimal covariant Kolmogorov decomposition via an eigen-factorization of [T_{x,y}].
pub fn kolmogorov_decompose(spec: &CovariantKernelSpec, tol: &Tolerances) -> Result<KolmogorovDecomposition> {
    let report = validate_kernel(spec, tol)?;
    if !report.ok() {
        return Err(Error::invalid(format!(
            "kernel fails validation: {}",
            report.first_violation.unwrap_or_default()
        )));
    }
    let nv = spec.n_v();
    let pf = psd_factor(&spec.gram(), tol)?;
    let f = (0..spec.x_size())
        .map(|x| pf.f.columns(x * nv, nv).into_owned())
        .collect();
    decomposition_from_factor(spec, f, tol)
}

/// The unitary W with W F¹_x = F²_x and W Ũ¹(g) = Ũ²(g) W.
pub fn equivalence_unitary(
    d1: &KolmogorovDecomposition,
    d2: &KolmogorovDecomposition,
    tol: &Tolerances,
) -> Result<(CMatrix, Certificate)> {
    if d1.n != d2.n || d1.f.len() != d2.f.len() {
        return Err(Error::dim("decompositions have different ranks or index sets"));
    }
    let mut cert = Certificate::new();
    if d1.n == 0 {
        return Ok((zeros(0, 0), cert));
    }
    let pairs: Vec<(CMatrix, CMatrix)> = d1.f.iter().cloned().zip(d2.f.iter().cloned()).collect();
    let (w, r) = lstsq_define(&pairs, tol)?;
    let scale = spectral_norm(&d1.stacked()).powi(2).max(1.0);
    cert.record("factor_intertwining", r, tol.recon_fro * scale);
    let uscale = (d1.n as f64).sqrt().max(1.0);
    cert.record("unitary", unitary_residual(&w), tol.unitary_fro * uscale);
    let mut inter = 0.0f64;
    for g in d1.utilde.group().elements() {
        inter = inter.max(fro(&(&w * d1.utilde.get(g) - d2.utilde.get(g) * &w)));
    }
    cert.record("rep_intertwining", inter, tol.recon_fro * uscale);
    let cert = cert.require()?;
    Ok((w, cert))
}

#[derive(Debug, Clone)]
pub struct KernelExtremality {
    pub extreme: bool,
    /// Dimension of the solution space of the witness conditions.
    pub witness_dim: usize,
    pub hermitian_only: bool,
    /// Hermitian witness of spectral norm 1.
    pub witness: Option<CMatrix>,
    /// Kernels with blocks F_x†(I ± D)F_y; K is their midpoint.
    pub split: Option<(CovariantKernelSpec, CovariantKernelSpec)>,
}

/// Hermitian representative of a nonzero solution, normalized to spectral norm 1.
pub(crate) fn hermitian_witness(d: &CMatrix) -> CMatrix {
    let h = (d + d.adjoint()) * C64::new(0.5, 0.0);
    let a = (d - d.adjoint()) * (I * 0.5);
    let w = if fro(&h) >= fro(&a) { h } else { a };
    let s = spectral_norm(&w);
    w / C64::new(s, 0.0)
}

/// Decides whether K is extreme among covariant positive kernels agreeing with it on Z.
pub fn kernel_extremal(
    spec: &CovariantKernelSpec,
    z: &[(usize, usize)],
    decomp: &KolmogorovDecomposition,
    tol: &Tolerances,
) -> Result<KernelExtremality> {
    spec.check_shapes()?;
    if z.is_empty() {
        return Err(Error::invalid("Z must be nonempty"));
    }
    let nx = spec.x_size();
    if decomp.f.len() != nx {
        return Err(Error::dim("decomposition does not match the kernel"));
    }
    let mut recon = 0.0f64;
    for x in 0..nx {
        for y in 0..nx {
            recon = recon.max(fro(&(decomp.f[x].adjoint() * &decomp.f[y] - &spec.blocks[x][y])));
        }
    }
    if recon > tol.recon_fro * spec.scale() {
        return Err(Error::tolerance("decomposition reconstruction", recon, tol.recon_fro * spec.scale()));
    }
    for &(x, y) in z {
        if x >= nx || y >= nx {
            return Err(Error::invalid(format!("pair ({x},{y}) lies outside X")));
        }
    }
    let symmetric = z.iter().all(|&(x, y)| z.contains(&(y, x)));
    let hermitian_only = !symmetric;
    let n = decomp.n;
    let nv = spec.n_v();
    let mut constraints = vec![];
    for &(x, y) in z {
        for a in 0..nv {
            for b in 0..nv {
                constraints.push(decomp.f[x].column(a) * decomp.f[y].column(b).adjoint());
            }
        }
    }
    let space = constrained_commutant(n, decomp.utilde.matrices(), &constraints, hermitian_only, tol)?;
    let Some(d0) = space.first() else {
        return Ok(KernelExtremality {
            extreme: true,
            witness_dim: 0,
            hermitian_only,
            witness: None,
            split: None,
        });
    };
    let d = hermitian_witness(d0);
    let id = identity(n);
    let blocks_with = |sign: f64| -> Vec<Vec<CMatrix>> {
        let m = &id + &d * C64::new(sign, 0.0);
        (0..nx)
            .map(|x| (0..nx).map(|y| decomp.f[x].adjoint() * &m * &decomp.f[y]).collect())
            .collect()
    };
    let split = (spec.with_blocks(blocks_with(1.0)), spec.with_blocks(blocks_with(-1.0)));
    Ok(KernelExtremality {
        extreme: false,
        witness_dim: space.len(),
        hermitian_only,
        witness: Some(d),
        split: Some(split),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingroup::FiniteGroup;
    use crate::numlin::{c, from_real};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn flip_spec(t01: f64) -> CovariantKernelSpec {
        let g = FiniteGroup::cyclic(2);
        let action = GroupAction::regular(g.clone());
        let one = from_real(1, 1, &[1.0]);
        let off = from_real(1, 1, &[t01]);
        CovariantKernelSpec {
            action,
            alpha: vec![vec![ONE; 2]; 2],
            sigma: TwoCocycle::trivial(2),
            u: MultiplierRep::trivial(g, 1),
            k: 1,
            blocks: vec![vec![one.clone(), off.clone()], vec![off, one]],
        }
    }

    #[test]
    fn validation_examples() {
        let pt = CovariantKernelSpec::invariant(vec![vec![identity(1)]], 1).unwrap();
        assert!(validate_kernel(&pt, &tol()).unwrap().ok());
        assert!(validate_kernel(&flip_spec(1.0), &tol()).unwrap().ok());
        let r = validate_kernel(&flip_spec(2.0), &tol()).unwrap();
        assert!(!r.positive);
        assert!(r.covariant && r.alpha_ok);
        assert!((r.min_eig + 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_violation_is_reported() {
        let mut s = flip_spec(1.0);
        s.blocks[1][1] = from_real(1, 1, &[2.0]);
        let r = validate_kernel(&s, &tol()).unwrap();
        assert!(!r.covariant);
        assert!(r.first_violation.unwrap().contains("covariance"));
    }

    #[test]
    fn all_ones_kernel_has_rank_one_dilation() {
        let s = flip_spec(1.0);
        let d = kolmogorov_decompose(&s, &tol()).unwrap();
        assert_eq!(d.n, 1);
        // F_0 = F_1 = [1] up to a common phase
        assert!((d.f[0][(0, 0)] - d.f[1][(0, 0)]).norm() < 1e-12);
        assert!((d.f[0][(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((d.utilde.get(1)[(0, 0)] - ONE).norm() < 1e-12);
        let e = kernel_extremal(&s, &[(0, 0), (1, 1)], &d, &tol()).unwrap();
        assert!(e.extreme);
    }

    #[test]
    fn orthogonal_fibers() {
        let nx = 3;
        let nv = 2;
        let blocks = (0..nx)
            .map(|x| (0..nx).map(|y| if x == y { identity(nv) } else { zeros(nv, nv) }).collect())
            .collect();
        let s = CovariantKernelSpec::invariant(blocks, 1).unwrap();
        let d = kolmogorov_decompose(&s, &tol()).unwrap();
        assert_eq!(d.n, nx * nv);
        assert!(fro(&(d.utilde.get(0) - identity(nx * nv))) < 1e-12);
    }

    #[test]
    fn delta_kernel_is_not_extreme() {
        let blocks = vec![vec![identity(1), zeros(1, 1)], vec![zeros(1, 1), identity(1)]];
        let s = CovariantKernelSpec::invariant(blocks, 1).unwrap();
        let d = kolmogorov_decompose(&s, &tol()).unwrap();
        let e = kernel_extremal(&s, &[(0, 0), (1, 1)], &d, &tol()).unwrap();
        assert!(!e.extreme);
        assert_eq!(e.witness_dim, 2);
        let w = e.witness.unwrap();
        // the witness vanishes on each fiber but couples the two
        for x in 0..2 {
            assert!(fro(&(d.f[x].adjoint() * &w * &d.f[x])) < 1e-10);
        }
        assert!(fro(&(d.f[0].adjoint() * &w * &d.f[1])) > 0.5);
        let (kp, km) = e.split.unwrap();
        assert!(validate_kernel(&kp, &tol()).unwrap().ok());
        assert!(validate_kernel(&km, &tol()).unwrap().ok());
    }

    #[test]
    fn equivalence_recovers_conjugation() {
        let g = FiniteGroup::cyclic(3);
        let action = GroupAction::regular(g.clone());
        let u = MultiplierRep::trivial(g.clone(), 1);
        // circulant PSD kernel
        let vals = [c(2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3)];
        let blocks = (0..3)
            .map(|x| (0..3).map(|y| from_rows_1(vals[(y + 3 - x) % 3])).collect())
            .collect();
        let s = CovariantKernelSpec {
            action,
            alpha: vec![vec![ONE; 3]; 3],
            sigma: TwoCocycle::trivial(3),
            u,
            k: 1,
            blocks,
        };
        let d1 = kolmogorov_decompose(&s, &tol()).unwrap();
        let (w, _) = equivalence_unitary(&d1, &d1, &tol()).unwrap();
        assert!(fro(&(w - identity(d1.n))) < 1e-9);
        let q = (from_real(d1.n, d1.n, &vec![0.3; d1.n * d1.n]) * I).exp();
        let d2 = d1.conjugated(&q);
        let (w, cert) = equivalence_unitary(&d1, &d2, &tol()).unwrap();
        assert!(cert.all_ok());
        assert!(fro(&(w - q)) < 1e-8);
    }

    fn from_rows_1(z: C64) -> CMatrix {
        CMatrix::from_element(1, 1, z)
    }
}
