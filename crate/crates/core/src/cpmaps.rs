//! Covariant completely positive maps b ↦ S_b on a finite-dimensional C*-algebra B, with
//! S_b a form on V = L(ℂ^k; ℂ^{n_V}) stored as an n_V × n_V matrix.
//!
//! The map is given by its values on the matrix units of B. A symmetry consists of a
//! multiplier representation U on ℂ^{n_V} and an implementer g ↦ u_g on the algebra's
//! ambient space, β_g(b) = u_g b u_g†.

use crate::cstar::{FiniteCStarAlgebra, ModuleSpace, TensorSplit};
use crate::error::{Error, Result};
use crate::fingroup::{FiniteGroup, MultiplierRep};
use crate::kernels::{hermitian_witness, kolmogorov_decompose, CovariantKernelSpec};
use crate::numlin::{
    constrained_commutant, eigh, fro, hstack, identity, lstsq_define, min_eigenvalue, numerical_rank,
    pinv, spectral_norm, unitary_residual, zeros, CMatrix, Tolerances, C64,
};
use crate::report::Certificate;

#[derive(Debug, Clone, PartialEq)]
pub struct CpSymmetry {
    /// U on ℂ^{n_V}.
    pub u_v: MultiplierRep,
    /// u_g on ℂ^{B.size()}; must map B onto itself under conjugation.
    pub implementer: MultiplierRep,
}

/// A declared factorization B = B₁ ⊗ B₂ of the map's algebra, with optional factor actions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub split: TensorSplit,
    pub b_implementer: Option<MultiplierRep>,
    pub c_implementer: Option<MultiplierRep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CPMapSpec {
    pub algebra: FiniteCStarAlgebra,
    pub module: ModuleSpace,
    /// S on each matrix unit, in the algebra's unit order.
    pub values: Vec<CMatrix>,
    pub symmetry: Option<CpSymmetry>,
    pub split: Option<SplitSpec>,
}

impl CPMapSpec {
    pub fn new(algebra: FiniteCStarAlgebra, module: ModuleSpace, values: Vec<CMatrix>) -> Result<Self> {
        let s = CPMapSpec {
            algebra,
            module,
            values,
            symmetry: None,
            split: None,
        };
        s.check_shapes()?;
        Ok(s)
    }

    /// Builds the spec from a linear map on the algebra's ambient matrices.
    pub fn from_fn(
        algebra: FiniteCStarAlgebra,
        module: ModuleSpace,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let values = (0..algebra.dim()).map(|u| f(&algebra.unit_matrix(u))).collect();
        Self::new(algebra, module, values)
    }

    pub fn with_symmetry(mut self, symmetry: CpSymmetry) -> Result<Self> {
        self.symmetry = Some(symmetry);
        self.check_shapes()?;
        Ok(self)
    }

    pub fn with_split(mut self, split: SplitSpec) -> Result<Self> {
        self.split = Some(split);
        self.check_shapes()?;
        Ok(self)
    }

    pub fn n_v(&self) -> usize {
        self.module.n_v
    }

    pub fn check_shapes(&self) -> Result<()> {
        let n = self.n_v();
        if self.values.len() != self.algebra.dim() {
            return Err(Error::dim(format!(
                "need {} values (one per matrix unit), got {}",
                self.algebra.dim(),
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| v.shape() != (n, n)) {
            return Err(Error::dim(format!("each value must be {n}x{n}")));
        }
        if let Some(sym) = &self.symmetry {
            if sym.u_v.dim() != n || sym.implementer.dim() != self.algebra.size() {
                return Err(Error::dim("symmetry representations have the wrong dimensions"));
            }
            if sym.u_v.group().order() != sym.implementer.group().order() {
                return Err(Error::dim("symmetry representations use different groups"));
            }
        }
        if let Some(sp) = &self.split {
            if sp.split.product != self.algebra {
                return Err(Error::dim("declared tensor split does not match the algebra"));
            }
            if let Some(b) = &sp.b_implementer {
                if b.dim() != sp.split.b.size() {
                    return Err(Error::dim("first-factor implementer has the wrong dimension"));
                }
            }
            if let Some(c) = &sp.c_implementer {
                if c.dim() != sp.split.c.size() {
                    return Err(Error::dim("second-factor implementer has the wrong dimension"));
                }
            }
        }
        Ok(())
    }

    pub fn group(&self) -> FiniteGroup {
        self.symmetry
            .as_ref()
            .map_or_else(FiniteGroup::trivial, |s| s.u_v.group().clone())
    }

    /// The multiplier representation on V; trivial group when no symmetry is declared.
    pub fn u_v(&self) -> MultiplierRep {
        self.symmetry
            .as_ref()
            .map_or_else(|| MultiplierRep::trivial(FiniteGroup::trivial(), self.n_v()), |s| s.u_v.clone())
    }

    fn implementer(&self) -> MultiplierRep {
        self.symmetry.as_ref().map_or_else(
            || MultiplierRep::trivial(FiniteGroup::trivial(), self.algebra.size()),
            |s| s.implementer.clone(),
        )
    }

    /// S_b for an algebra element b given as a block-diagonal matrix.
    pub fn apply(&self, b: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
        let coeffs = self.algebra.coefficients(b, tol)?;
        Ok(self.apply_coeffs(&coeffs))
    }

    pub fn apply_coeffs(&self, coeffs: &[C64]) -> CMatrix {
        let n = self.n_v();
        let mut out = zeros(n, n);
        for (z, v) in coeffs.iter().zip(&self.values) {
            if *z != C64::new(0.0, 0.0) {
                out += v * *z;
            }
        }
        out
    }

    /// S_{1_B}.
    pub fn unit_value(&self) -> CMatrix {
        self.apply_coeffs(&self.algebra.unit_coefficients())
    }

    /// The kernel (u, w) ↦ S_{E_u† E_w} over the matrix units, with trivial symmetry.
    pub fn kernel(&self) -> Result<CovariantKernelSpec> {
        let dim = self.algebra.dim();
        let n = self.n_v();
        let blocks = (0..dim)
            .map(|u| {
                (0..dim)
                    .map(|w| match self.algebra.product_unit(self.algebra.adjoint_unit(u), w) {
                        Some(p) => self.values[p].clone(),
                        None => zeros(n, n),
                    })
                    .collect()
            })
            .collect();
        CovariantKernelSpec::invariant(blocks, self.module.k)
    }

    /// Σ_u E_u ⊗ S_u, of size B.size()·n_V.
    pub fn choi(&self) -> CMatrix {
        let n = self.n_v();
        let size = self.algebra.size();
        let mut c = zeros(size * n, size * n);
        for (u, v) in self.values.iter().enumerate() {
            let (r, col) = self.algebra.unit_position(u);
            let mut view = c.view_mut((r * n, col * n), (n, n));
            view += v;
        }
        c
    }

    pub fn choi_rank(&self, tol: &Tolerances) -> usize {
        let c = self.choi();
        let scale = spectral_norm(&c).max(1.0);
        eigh(&c).0.iter().filter(|&&l| l > tol.psd_eig * scale).count()
    }

    fn scale(&self) -> f64 {
        self.values.iter().map(spectral_norm).fold(1.0, f64::max)
    }

    /// β_g(E_u) in matrix-unit coefficients.
    fn beta_coeffs(&self, g: usize, u: usize, tol: &Tolerances) -> Result<Vec<C64>> {
        let ug = self.implementer();
        let m = ug.get(g) * self.algebra.unit_matrix(u) * ug.get(g).adjoint();
        self.algebra.coefficients(&m, tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpReport {
    pub cp: bool,
    pub min_eig: f64,
    pub covariant: bool,
    pub covariance_residual: f64,
    pub implementer_ok: bool,
    /// Always true at finite dimension.
    pub normal: bool,
    pub zero_map: bool,
    pub first_violation: Option<String>,
}

impl CpReport {
    pub fn ok(&self) -> bool {
        self.cp && self.covariant && self.implementer_ok
    }
}

pub fn cp_validate(spec: &CPMapSpec, tol: &Tolerances) -> Result<CpReport> {
    spec.check_shapes()?;
    let mut first = None;
    let mut note = |m: String| {
        if first.is_none() {
            first = Some(m)
        }
    };
    let choi = spec.choi();
    let scale = spectral_norm(&choi).max(1.0);
    let min_eig = if choi.nrows() == 0 { 0.0 } else { min_eigenvalue(&choi)? };
    let herm = fro(&(&choi - choi.adjoint()));
    let cp = herm <= tol.psd_eig * scale && min_eig >= -tol.psd_eig * scale;
    if !cp {
        note(format!("Choi matrix is not PSD (min eigenvalue {min_eig:.3e})"));
    }
    let zero_map = spec.values.iter().all(|v| fro(v) == 0.0);

    let mut implementer_ok = true;
    let mut covariance_residual = 0.0f64;
    if let Some(sym) = &spec.symmetry {
        let g = sym.u_v.group();
        for a in g.elements() {
            if !spec.algebra.preserved_by(sym.implementer.get(a), tol) {
                implementer_ok = false;
                note(format!("implementer of g={a} does not preserve the algebra"));
            }
        }
        if implementer_ok {
            for a in g.elements() {
                let ui = sym.u_v.get(g.inv(a));
                for u in 0..spec.algebra.dim() {
                    let moved = spec.apply_coeffs(&spec.beta_coeffs(a, u, tol)?);
                    let r = fro(&(moved - ui.adjoint() * &spec.values[u] * ui));
                    covariance_residual = covariance_residual.max(r);
                    if r > tol.recon_fro * spec.scale() {
                        note(format!("covariance fails at (g={a}, unit={u}), residual {r:.3e}"));
                    }
                }
            }
        }
    }
    let covariant = implementer_ok && covariance_residual <= tol.recon_fro * spec.scale();
    Ok(CpReport {
        cp,
        min_eig,
        covariant,
        covariance_residual,
        implementer_ok,
        normal: true,
        zero_map,
        first_violation: first,
    })
}

/// S_b = J†π(b)J with Ũ(g)J = JU(g) and Ũ(g)π(b) = π(β_g(b))Ũ(g).
#[derive(Debug, Clone)]
pub struct KsgnsDilation {
    pub algebra: FiniteCStarAlgebra,
    pub n: usize,
    /// R on each matrix unit, N × n_V.
    pub r: Vec<CMatrix>,
    pub j: CMatrix,
    /// π on each matrix unit.
    pub pi: Vec<CMatrix>,
    /// Cocycle equal to that of U.
    pub utilde: MultiplierRep,
    /// π(u_g†)Ũ(g), present when every u_g lies in the algebra.
    pub ubar: Option<MultiplierRep>,
    pub certificate: Certificate,
}

impl KsgnsDilation {
    pub fn pi_coeffs(&self, coeffs: &[C64]) -> CMatrix {
        let mut out = zeros(self.n, self.n);
        for (z, p) in coeffs.iter().zip(&self.pi) {
            if *z != C64::new(0.0, 0.0) {
                out += p * *z;
            }
        }
        out
    }

    pub fn pi_of(&self, b: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
        Ok(self.pi_coeffs(&self.algebra.coefficients(b, tol)?))
    }

    /// [π(E_u)J]_u, N × dim·n_V.
    pub fn spanning(&self) -> CMatrix {
        let cols: Vec<CMatrix> = self.pi.iter().map(|p| p * &self.j).collect();
        hstack(self.n, &cols)
    }
}

fn define(n: usize, pairs: &[(CMatrix, CMatrix)], tol: &Tolerances) -> Result<(CMatrix, f64)> {
    if n == 0 {
        return Ok((zeros(0, 0), 0.0));
    }
    lstsq_define(pairs, tol)
}

pub fn ksgns(spec: &CPMapSpec, tol: &Tolerances) -> Result<KsgnsDilation> {
    let report = cp_validate(spec, tol)?;
    if !report.ok() {
        return Err(Error::invalid(format!(
            "CP map fails validation: {}",
            report.first_violation.unwrap_or_default()
        )));
    }
    let alg = &spec.algebra;
    let dim = alg.dim();
    let nv = spec.n_v();
    let kd = kolmogorov_decompose(&spec.kernel()?, tol)?;
    let n = kd.n;
    let r = kd.f;
    let mut j = zeros(n, nv);
    for u in alg.diagonal_units() {
        j += &r[u];
    }
    let scale = spec.scale();
    let mut cert = Certificate::new();
    cert.extend("kernel", kd.certificate);

    let mut pi = Vec::with_capacity(dim);
    let mut pi_def = 0.0f64;
    for c in 0..dim {
        let pairs: Vec<(CMatrix, CMatrix)> = (0..dim)
            .map(|u| {
                let target = alg.product_unit(c, u).map_or_else(|| zeros(n, nv), |p| r[p].clone());
                (r[u].clone(), target)
            })
            .collect();
        let (m, res) = define(n, &pairs, tol)?;
        pi_def = pi_def.max(res);
        pi.push(m);
    }
    cert.record("pi_definition", pi_def, tol.recon_fro * scale);

    let nscale = (n as f64).sqrt().max(1.0);
    let mut mult = 0.0f64;
    let mut adj = 0.0f64;
    for a in 0..dim {
        adj = adj.max(fro(&(pi[a].adjoint() - &pi[alg.adjoint_unit(a)])));
        for b in 0..dim {
            let prod = alg.product_unit(a, b).map_or_else(|| zeros(n, n), |p| pi[p].clone());
            mult = mult.max(fro(&(&pi[a] * &pi[b] - prod)));
        }
    }
    cert.record("pi_multiplicative", mult, tol.recon_fro * nscale);
    cert.record("pi_adjoint", adj, tol.recon_fro * nscale);
    let mut one = zeros(n, n);
    for u in alg.diagonal_units() {
        one += &pi[u];
    }
    cert.record("pi_unital", fro(&(one - identity(n))), tol.recon_fro * nscale);
    let mut recon = 0.0f64;
    for u in 0..dim {
        recon = recon.max(fro(&(j.adjoint() * &pi[u] * &j - &spec.values[u])));
    }
    cert.record("reconstruction", recon, tol.recon_fro * scale);

    let group = spec.group();
    let uv = spec.u_v();
    let imp = spec.implementer();
    let mut ut = Vec::with_capacity(group.order());
    let mut ut_def = 0.0f64;
    let mut beta = Vec::with_capacity(group.order());
    for g in group.elements() {
        let bc: Vec<Vec<C64>> = (0..dim).map(|u| spec.beta_coeffs(g, u, tol)).collect::<Result<_>>()?;
        let pairs: Vec<(CMatrix, CMatrix)> = (0..dim)
            .map(|u| {
                let mut moved = zeros(n, nv);
                for (w, z) in bc[u].iter().enumerate() {
                    if *z != C64::new(0.0, 0.0) {
                        moved += &r[w] * *z;
                    }
                }
                (r[u].clone(), moved * uv.get(g))
            })
            .collect();
        let (m, res) = define(n, &pairs, tol)?;
        ut_def = ut_def.max(res);
        ut.push(m);
        beta.push(bc);
    }
    cert.record("utilde_definition", ut_def, tol.recon_fro * scale);
    let mut unit_res = 0.0f64;
    let mut j_res = 0.0f64;
    let mut cov = 0.0f64;
    for g in group.elements() {
        unit_res = unit_res.max(unitary_residual(&ut[g]));
        j_res = j_res.max(fro(&(&j * uv.get(g) - &ut[g] * &j)));
        for u in 0..dim {
            let lhs = &ut[g] * &pi[u];
            let rhs = {
                let mut p = zeros(n, n);
                for (w, z) in beta[g][u].iter().enumerate() {
                    if *z != C64::new(0.0, 0.0) {
                        p += &pi[w] * *z;
                    }
                }
                p * &ut[g]
            };
            cov = cov.max(fro(&(lhs - rhs)));
        }
    }
    cert.record("utilde_unitary", unit_res, tol.unitary_fro * nscale);
    cert.record("utilde_j", j_res, tol.recon_fro * scale);
    cert.record("utilde_covariance", cov, tol.recon_fro * nscale);
    cert.clone().require()?;
    let utilde = MultiplierRep::new(group.clone(), uv.cocycle().clone(), ut, true, tol)?;

    let inner = group.elements().all(|g| alg.contains(imp.get(g), tol));
    let ubar = if inner {
        let mats: Vec<CMatrix> = group
            .elements()
            .map(|g| {
                let c = alg.coefficients(&imp.get(g).adjoint(), tol)?;
                let mut p = zeros(n, n);
                for (w, z) in c.iter().enumerate() {
                    p += &pi[w] * *z;
                }
                Ok(p * utilde.get(g))
            })
            .collect::<Result<_>>()?;
        let mut comm = 0.0f64;
        for m in &mats {
            for p in &pi {
                comm = comm.max(fro(&(m * p - p * m)));
            }
        }
        cert.record("ubar_commutes", comm, tol.recon_fro * nscale);
        let cocycle = uv.cocycle().product(&imp.cocycle().conj());
        let rep = MultiplierRep::new(group.clone(), cocycle, mats, true, tol)?;
        Some(rep)
    } else {
        None
    };
    let rank = numerical_rank(&hstack(n, &r), tol);
    cert.flag("minimality", rank == n);
    let certificate = cert.require()?;
    Ok(KsgnsDilation {
        algebra: alg.clone(),
        n,
        r,
        j,
        pi,
        utilde,
        ubar,
        certificate,
    })
}

/// For a unital representation of M_n on ℂ^N given on matrix units, finds r = N/n and a
/// unitary V with V†π(E_ab)V = E_ab ⊗ I_r.
pub fn factor_rep_tensor(pi: &[CMatrix], n: usize, tol: &Tolerances) -> Result<(usize, CMatrix)> {
    if n == 0 || pi.len() != n * n {
        return Err(Error::dim("need π on all n² matrix units of M_n"));
    }
    let big = pi[0].nrows();
    if pi.iter().any(|p| p.shape() != (big, big)) {
        return Err(Error::dim("representation matrices differ in shape"));
    }
    if big % n != 0 {
        return Err(Error::Domain(format!("dimension {big} is not a multiple of {n}")));
    }
    let r = big / n;
    let (vals, vecs) = eigh(&pi[0]);
    let w: Vec<usize> = (0..big).filter(|&i| vals[i] > 0.5).collect();
    if w.len() != r {
        return Err(Error::Domain(format!(
            "π(E_00) has rank {}, expected {r}; not a representation of a single full block",
            w.len()
        )));
    }
    let mut v = zeros(big, big);
    for a in 0..n {
        for (jj, &col) in w.iter().enumerate() {
            let img = &pi[a * n] * vecs.column(col);
            v.column_mut(a * r + jj).copy_from(&img);
        }
    }
    let scale = (big as f64).sqrt().max(1.0);
    let res = unitary_residual(&v);
    if res > tol.unitary_fro * scale {
        return Err(Error::tolerance("intertwiner unitarity", res, tol.unitary_fro * scale));
    }
    let ir = identity(r);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut e = zeros(n, n);
            e[(a, b)] = C64::new(1.0, 0.0);
            let target = crate::numlin::kron(&e, &ir);
            worst = worst.max(fro(&(v.adjoint() * &pi[a * n + b] * &v - target)));
        }
    }
    if worst > tol.recon_fro * scale {
        return Err(Error::tolerance("intertwiner identity", worst, tol.recon_fro * scale));
    }
    Ok((r, v))
}

/// A_λ with S_b = Σ_λ A_λ† b A_λ, for B = M_n.
pub fn kraus_extract(spec: &CPMapSpec, dil: &KsgnsDilation, tol: &Tolerances) -> Result<Vec<CMatrix>> {
    let blocks = spec.algebra.blocks();
    if blocks.len() != 1 {
        return Err(Error::Domain("Kraus extraction needs a single full matrix block".into()));
    }
    let n = blocks[0];
    let nv = spec.n_v();
    if dil.n == 0 {
        return Ok(vec![]);
    }
    let (r, v) = factor_rep_tensor(&dil.pi, n, tol)?;
    let vj = v.adjoint() * &dil.j;
    let ops: Vec<CMatrix> = (0..r)
        .map(|l| {
            let mut a = zeros(n, nv);
            for row in 0..n {
                a.row_mut(row).copy_from(&vj.row(row * r + l));
            }
            a
        })
        .collect();
    let mut worst = 0.0f64;
    for u in 0..spec.algebra.dim() {
        let e = spec.algebra.unit_matrix(u);
        let mut s = zeros(nv, nv);
        for a in &ops {
            s += a.adjoint() * &e * a;
        }
        worst = worst.max(fro(&(s - &spec.values[u])));
    }
    if worst > tol.recon_fro * spec.scale() {
        return Err(Error::tolerance("Kraus reconstruction", worst, tol.recon_fro * spec.scale()));
    }
    Ok(ops)
}

#[derive(Debug, Clone)]
pub struct CpExtremality {
    pub extreme: bool,
    pub witness_dim: usize,
    pub witness: Option<CMatrix>,
    /// S^±_b = J†π(b)(I ± D)J.
    pub split: Option<(CPMapSpec, CPMapSpec)>,
    /// Verdict of the {π} ∪ {Ū} generator set, when Ū exists.
    pub ubar_verdict: Option<bool>,
}

/// Decides whether S is extreme among covariant CP maps with the same unit value.
pub fn cp_extremal(spec: &CPMapSpec, dil: &KsgnsDilation, tol: &Tolerances) -> Result<CpExtremality> {
    let s1 = spec.unit_value();
    let uv = spec.u_v();
    let scale = spec.scale();
    for g in uv.group().elements() {
        let r = fro(&(uv.get(g).adjoint() * &s1 * uv.get(g) - &s1));
        if r > tol.recon_fro * scale {
            return Err(Error::Domain(format!(
                "the unit value S_1 is not invariant under U (g={g}, residual {r:.3e})"
            )));
        }
    }
    let n = dil.n;
    let nv = spec.n_v();
    let mut constraints = vec![];
    for a in 0..nv {
        for b in 0..nv {
            constraints.push(dil.j.column(a) * dil.j.column(b).adjoint());
        }
    }
    let mut gens = dil.pi.clone();
    gens.extend(dil.utilde.matrices().iter().cloned());
    let space = constrained_commutant(n, &gens, &constraints, false, tol)?;
    let ubar_verdict = match &dil.ubar {
        Some(ub) => {
            let mut g2 = dil.pi.clone();
            g2.extend(ub.matrices().iter().cloned());
            Some(constrained_commutant(n, &g2, &constraints, false, tol)?.is_empty())
        }
        None => None,
    };
    let Some(d0) = space.first() else {
        return Ok(CpExtremality {
            extreme: true,
            witness_dim: 0,
            witness: None,
            split: None,
            ubar_verdict,
        });
    };
    let d = hermitian_witness(d0);
    let id = identity(n);
    let perturbed = |sign: f64| -> CPMapSpec {
        let m = &id + &d * C64::new(sign, 0.0);
        let values = dil.pi.iter().map(|p| dil.j.adjoint() * p * &m * &dil.j).collect();
        CPMapSpec {
            values,
            ..spec.clone()
        }
    };
    let split = (perturbed(1.0), perturbed(-1.0));
    Ok(CpExtremality {
        extreme: false,
        witness_dim: space.len(),
        witness: Some(d),
        split: Some(split),
        ubar_verdict,
    })
}

/// S¹_b = S_{b⊗1} and S²_c = S_{1⊗c} for a map on a declared tensor product.
pub fn marginals(spec: &CPMapSpec, tol: &Tolerances) -> Result<(CPMapSpec, CPMapSpec)> {
    let Some(sp) = &spec.split else {
        return Err(Error::invalid("marginals need a declared tensor split"));
    };
    let split = &sp.split;
    let n = spec.n_v();
    let sum = |units: Vec<usize>| -> CMatrix {
        let mut m = zeros(n, n);
        for u in units {
            m += &spec.values[u];
        }
        m
    };
    let v1 = (0..split.b.dim())
        .map(|u| sum(split.c.diagonal_units().into_iter().map(|w| split.product_unit(u, w)).collect()))
        .collect();
    let v2 = (0..split.c.dim())
        .map(|w| sum(split.b.diagonal_units().into_iter().map(|u| split.product_unit(u, w)).collect()))
        .collect();
    let mut s1 = CPMapSpec::new(split.b.clone(), spec.module, v1)?;
    let mut s2 = CPMapSpec::new(split.c.clone(), spec.module, v2)?;
    if let Some(sym) = &spec.symmetry {
        if let Some(b) = &sp.b_implementer {
            s1 = s1.with_symmetry(CpSymmetry {
                u_v: sym.u_v.clone(),
                implementer: b.clone(),
            })?;
        }
        if let Some(c) = &sp.c_implementer {
            s2 = s2.with_symmetry(CpSymmetry {
                u_v: sym.u_v.clone(),
                implementer: c.clone(),
            })?;
        }
    }
    for (name, s) in [("first", &s1), ("second", &s2)] {
        let r = cp_validate(s, tol)?;
        if !r.ok() {
            return Err(Error::invalid(format!(
                "{name} marginal fails validation: {}",
                r.first_violation.unwrap_or_default()
            )));
        }
    }
    Ok((s1, s2))
}

#[derive(Debug, Clone)]
pub struct Subminimal {
    /// E on each matrix unit of the second factor, N × N.
    pub e: Vec<CMatrix>,
    pub certificate: Certificate,
}

/// The unique unital CP map E on the second factor with S_{b⊗c} = J†π(b)E(c)J, where
/// (π, J) is a minimal dilation of the first marginal.
pub fn subminimal(spec: &CPMapSpec, dil1: &KsgnsDilation, tol: &Tolerances) -> Result<Subminimal> {
    let Some(sp) = &spec.split else {
        return Err(Error::invalid("subminimal needs a declared tensor split"));
    };
    let split = &sp.split;
    if dil1.algebra != split.b {
        return Err(Error::dim("dilation is not over the first tensor factor"));
    }
    let n = dil1.n;
    let nv = spec.n_v();
    let db = split.b.dim();
    let rmat = dil1.spanning();
    let rp = pinv(&rmat, tol);
    let scale = spec.scale();
    let mut cert = Certificate::new();
    let mut es = Vec::with_capacity(split.c.dim());
    for w in 0..split.c.dim() {
        let mut m = zeros(db * nv, db * nv);
        for u in 0..db {
            for u2 in 0..db {
                if let Some(p) = split.b.product_unit(split.b.adjoint_unit(u), u2) {
                    let val = &spec.values[split.product_unit(p, w)];
                    m.view_mut((u * nv, u2 * nv), (nv, nv)).copy_from(val);
                }
            }
        }
        let e = rp.adjoint() * &m * &rp;
        cert.record(
            format!("gram_c{w}"),
            fro(&(rmat.adjoint() * &e * &rmat - m)),
            tol.recon_fro * scale * db as f64,
        );
        es.push(e);
    }
    let nscale = (n as f64).sqrt().max(1.0);
    let mut one = zeros(n, n);
    for w in split.c.diagonal_units() {
        one += &es[w];
    }
    cert.record("unital", fro(&(one - identity(n))), tol.recon_fro * nscale);
    let mut comm = 0.0f64;
    for e in &es {
        for p in &dil1.pi {
            comm = comm.max(fro(&(e * p - p * e)));
        }
    }
    cert.record("commutes_with_pi", comm, tol.recon_fro * nscale);
    let mut recon = 0.0f64;
    for u in 0..db {
        for w in 0..split.c.dim() {
            let v = dil1.j.adjoint() * &dil1.pi[u] * &es[w] * &dil1.j;
            recon = recon.max(fro(&(v - &spec.values[split.product_unit(u, w)])));
        }
    }
    cert.record("reconstruction", recon, tol.recon_fro * scale);
    // complete positivity of E: the block matrix [E(E_w† E_w')] is PSD
    let dc = split.c.dim();
    let mut grand = zeros(dc * n, dc * n);
    for w in 0..dc {
        for w2 in 0..dc {
            if let Some(p) = split.c.product_unit(split.c.adjoint_unit(w), w2) {
                grand.view_mut((w * n, w2 * n), (n, n)).copy_from(&es[p]);
            }
        }
    }
    let me = if grand.nrows() == 0 { 0.0 } else { min_eigenvalue(&grand)? };
    cert.record("cp", (-me).max(0.0), tol.psd_eig * spectral_norm(&grand).max(1.0));
    if let Some(ci) = &sp.c_implementer {
        let ut = &dil1.utilde;
        let mut cov = 0.0f64;
        for g in ut.group().elements() {
            for w in 0..dc {
                let m = ci.get(g) * split.c.unit_matrix(w) * ci.get(g).adjoint();
                let coeffs = split.c.coefficients(&m, tol)?;
                let mut moved = zeros(n, n);
                for (x, z) in coeffs.iter().enumerate() {
                    moved += &es[x] * *z;
                }
                cov = cov.max(fro(&(ut.get(g) * &es[w] - moved * ut.get(g))));
            }
        }
        cert.record("covariance", cov, tol.recon_fro * nscale);
    }
    let certificate = cert.require()?;
    Ok(Subminimal { e: es, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{c, from_real, I, ONE};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn paulis() -> [CMatrix; 4] {
        [
            identity(2),
            from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), -I, I, c(0.0, 0.0)]),
            from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        ]
    }

    fn identity_channel() -> CPMapSpec {
        CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| b.clone()).unwrap()
    }

    fn trace_form() -> CPMapSpec {
        CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 1), |b| {
            CMatrix::from_element(1, 1, b.trace())
        })
        .unwrap()
    }

    fn depolarizing() -> CPMapSpec {
        CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| {
            identity(2) * (b.trace() * 0.5)
        })
        .unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(cp_validate(&trace_form(), &tol()).unwrap().ok());
        let t = CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| b.transpose()).unwrap();
        let r = cp_validate(&t, &tol()).unwrap();
        assert!(!r.cp);
        assert!((r.min_eig + 1.0).abs() < 1e-12);
        let z = CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 1), |_| zeros(1, 1)).unwrap();
        let r = cp_validate(&z, &tol()).unwrap();
        assert!(r.ok() && r.zero_map);
        assert_eq!(ksgns(&z, &tol()).unwrap().n, 0);
    }

    #[test]
    fn identity_channel_dilation() {
        let s = identity_channel();
        let d = ksgns(&s, &tol()).unwrap();
        assert_eq!(d.n, 2);
        assert!(unitary_residual(&d.j) < 1e-10);
        let (r, _) = factor_rep_tensor(&d.pi, 2, &tol()).unwrap();
        assert_eq!(r, 1);
        let k = kraus_extract(&s, &d, &tol()).unwrap();
        assert_eq!(k.len(), 1);
        assert!(unitary_residual(&k[0]) < 1e-10);
        assert!(cp_extremal(&s, &d, &tol()).unwrap().extreme);
    }

    #[test]
    fn trace_form_dilation() {
        let s = trace_form();
        let d = ksgns(&s, &tol()).unwrap();
        // Choi matrix of b ↦ tr(b) is I_2, so the Kraus rank is 2 and N = 2·2.
        assert_eq!(s.choi_rank(&tol()), 2);
        assert_eq!(d.n, 4);
        let (r, _) = factor_rep_tensor(&d.pi, 2, &tol()).unwrap();
        assert_eq!(r, 2);
        assert_eq!(kraus_extract(&s, &d, &tol()).unwrap().len(), 2);
    }

    #[test]
    fn depolarizing_dilation() {
        let s = depolarizing();
        let d = ksgns(&s, &tol()).unwrap();
        assert_eq!(s.choi_rank(&tol()), 4);
        assert_eq!(d.n, 8);
        let k = kraus_extract(&s, &d, &tol()).unwrap();
        assert_eq!(k.len(), 4);
        let mut sum = zeros(2, 2);
        for a in &k {
            sum += a.adjoint() * a;
        }
        assert!(fro(&(sum - identity(2))) < 1e-10);
        // {A_i† A_j} spans only the 4-dim M_2, so the channel is not extreme
        assert!(!cp_extremal(&s, &d, &tol()).unwrap().extreme);
    }

    #[test]
    fn factor_of_doubled_rep() {
        let pi: Vec<CMatrix> = (0..4)
            .map(|u| {
                let mut e = zeros(2, 2);
                e[(u / 2, u % 2)] = ONE;
                crate::numlin::direct_sum(&[e.clone(), e])
            })
            .collect();
        let (r, v) = factor_rep_tensor(&pi, 2, &tol()).unwrap();
        assert_eq!(r, 2);
        assert!(unitary_residual(&v) < 1e-12);
        assert!(factor_rep_tensor(&pi[..3], 2, &tol()).is_err());
    }

    #[test]
    fn unitary_mixture_is_not_extreme() {
        let p = paulis();
        let (u, v) = (p[0].clone(), p[1].clone());
        let s = CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| {
            (u.adjoint() * b * &u + v.adjoint() * b * &v) * c(0.5, 0.0)
        })
        .unwrap();
        let d = ksgns(&s, &tol()).unwrap();
        let e = cp_extremal(&s, &d, &tol()).unwrap();
        assert!(!e.extreme);
        let (sp, sm) = e.split.unwrap();
        for t in [&sp, &sm] {
            assert!(cp_validate(t, &tol()).unwrap().ok());
            assert!(fro(&(t.unit_value() - s.unit_value())) < 1e-9);
        }
    }

    #[test]
    fn covariant_channel_has_ubar() {
        // the dephasing channel is covariant under conjugation by Z
        let z2 = FiniteGroup::cyclic(2);
        let zm = paulis()[3].clone();
        let rep = MultiplierRep::from_matrices(z2, vec![identity(2), zm.clone()], &tol()).unwrap();
        let s = CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| {
            (b + &zm * b * &zm) * c(0.5, 0.0)
        })
        .unwrap()
        .with_symmetry(CpSymmetry {
            u_v: rep.clone(),
            implementer: rep,
        })
        .unwrap();
        let d = ksgns(&s, &tol()).unwrap();
        let ub = d.ubar.as_ref().unwrap();
        for g in 0..2 {
            for p in &d.pi {
                assert!(fro(&(ub.get(g) * p - p * ub.get(g))) < 1e-9);
            }
        }
        let e = cp_extremal(&s, &d, &tol()).unwrap();
        assert_eq!(e.ubar_verdict, Some(e.extreme));
    }

    #[test]
    fn product_map_marginals_and_subminimal() {
        // S_{b⊗c} = b·ε(c) with ε(c) = (c_0 + 3c_1)/4 on ℂ²
        let split = TensorSplit::new(FiniteCStarAlgebra::full(2), FiniteCStarAlgebra::commutative(2));
        let w = [0.25, 0.75];
        let mut values = vec![zeros(2, 2); split.product.dim()];
        for u in 0..4 {
            for x in 0..2 {
                values[split.product_unit(u, x)] = split.b.unit_matrix(u) * c(w[x], 0.0);
            }
        }
        let s = CPMapSpec::new(split.product.clone(), ModuleSpace::new(1, 2), values)
            .unwrap()
            .with_split(SplitSpec {
                split,
                b_implementer: None,
                c_implementer: None,
            })
            .unwrap();
        let (s1, s2) = marginals(&s, &tol()).unwrap();
        assert!(fro(&(s1.values[1].clone() - s.split.as_ref().unwrap().split.b.unit_matrix(1))) < 1e-12);
        assert!((s2.values[1][(0, 0)] - c(0.75, 0.0)).norm() < 1e-12);
        let d1 = ksgns(&s1, &tol()).unwrap();
        let sub = subminimal(&s, &d1, &tol()).unwrap();
        for x in 0..2 {
            assert!(fro(&(&sub.e[x] - identity(d1.n) * c(w[x], 0.0))) < 1e-9);
        }
    }

    #[test]
    fn luders_subminimal_is_projective() {
        // Lüders instrument of the Z measurement: S_{b⊗δ_x} = P_x b P_x
        let split = TensorSplit::new(FiniteCStarAlgebra::full(2), FiniteCStarAlgebra::commutative(2));
        let proj = [from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[0.0, 0.0, 0.0, 1.0])];
        let mut values = vec![zeros(2, 2); split.product.dim()];
        for u in 0..4 {
            for x in 0..2 {
                values[split.product_unit(u, x)] = &proj[x] * split.b.unit_matrix(u) * &proj[x];
            }
        }
        let s = CPMapSpec::new(split.product.clone(), ModuleSpace::new(1, 2), values)
            .unwrap()
            .with_split(SplitSpec {
                split,
                b_implementer: None,
                c_implementer: None,
            })
            .unwrap();
        let (s1, _) = marginals(&s, &tol()).unwrap();
        let d1 = ksgns(&s1, &tol()).unwrap();
        let sub = subminimal(&s, &d1, &tol()).unwrap();
        for e in &sub.e {
            assert!(fro(&(e * e - e)) < 1e-9);
        }
    }
}
