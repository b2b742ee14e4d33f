use super::decomposable::{decomposable_extract, fiber_projection, offsets, DecomposableOp};
use super::Covariance;
use crate::cpmaps::{cp_extremal, ksgns, CPMapSpec, CpSymmetry};
use crate::cstar::{FiniteCStarAlgebra, ModuleSpace};
use crate::error::{Error, Result};
use crate::fingroup::{irrep_decompose, GroupAction, IrrepDecomposition, MultiplierRep, SubgroupRep, TwoCocycle};
use crate::kernels::{hermitian_witness, kernel_extremal, kolmogorov_decompose, CovariantKernelSpec};
use crate::numlin::{
    constrained_commutant, eigh, fro, hstack, identity, min_eigenvalue, numerical_rank, unitary_residual, zeros,
    CMatrix, Tolerances, C64, ONE,
};
use crate::report::Certificate;

/// Effects M_ω on ℂ^V, one per coset ω ∈ G/H.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub effects: Vec<CMatrix>,
    pub covariance: Covariance,
}

impl ObservableSpec {
    pub fn new(effects: Vec<CMatrix>, covariance: Covariance) -> Result<Self> {
        let s = ObservableSpec { effects, covariance };
        s.check_shapes()?;
        Ok(s)
    }

    pub fn v_dim(&self) -> usize {
        self.covariance.v_dim()
    }

    pub fn omega_size(&self) -> usize {
        self.covariance.omega_size()
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.v_dim();
        if self.effects.len() != self.omega_size() {
            return Err(Error::dim(format!(
                "need {} effects (one per coset), got {}",
                self.omega_size(),
                self.effects.len()
            )));
        }
        if self.effects.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::dim(format!("effects must be {n}x{n}")));
        }
        Ok(())
    }

    /// f ↦ Σ_ω f(ω) M_ω as a covariant CP map on Fun(Ω).
    pub fn as_cp_map(&self) -> Result<CPMapSpec> {
        let n = self.omega_size();
        CPMapSpec::new(
            FiniteCStarAlgebra::commutative(n),
            ModuleSpace::new(1, self.v_dim()),
            self.effects.clone(),
        )?
        .with_symmetry(CpSymmetry {
            u_v: self.covariance.u.clone(),
            implementer: self.covariance.permutation(),
        })
    }

    /// The kernel on X = Ω ∪ {★} with K_{★★} = I, K_{★ω} = K_{ω★} = M_ω and
    /// K_{ωω'} = δ_{ωω'}M_ω, together with the pairs Z on which the class is fixed.
    pub fn kernel_form(&self) -> Result<(CovariantKernelSpec, Vec<(usize, usize)>)> {
        let n = self.omega_size();
        let v = self.v_dim();
        let star = n;
        let g = self.covariance.sub.parent();
        let table: Vec<Vec<usize>> = g
            .elements()
            .map(|a| (0..=n).map(|x| if x == star { star } else { self.covariance.sub.act(a, x) }).collect())
            .collect();
        let action = GroupAction::new(g.clone(), &table)?;
        let block = |x: usize, y: usize| -> CMatrix {
            match (x == star, y == star) {
                (true, true) => identity(v),
                (true, false) => self.effects[y].clone(),
                (false, true) => self.effects[x].clone(),
                (false, false) if x == y => self.effects[x].clone(),
                _ => zeros(v, v),
            }
        };
        let blocks = (0..=n).map(|x| (0..=n).map(|y| block(x, y)).collect()).collect();
        let spec = CovariantKernelSpec {
            action,
            alpha: vec![vec![ONE; n + 1]; g.order()],
            sigma: TwoCocycle::trivial(g.order()),
            u: self.covariance.u.clone(),
            k: 1,
            blocks,
        };
        let mut z = vec![(star, star)];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    z.push((x, y));
                }
            }
        }
        Ok((spec, z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableReport {
    pub positive: bool,
    pub normalized: bool,
    pub covariant: bool,
    pub min_eig: f64,
    pub normalization_residual: f64,
    pub covariance_residual: f64,
    pub first_violation: Option<String>,
}

impl ObservableReport {
    pub fn ok(&self) -> bool {
        self.positive && self.normalized && self.covariant
    }
}

pub fn validate_observable(spec: &ObservableSpec, tol: &Tolerances) -> Result<ObservableReport> {
    spec.check_shapes()?;
    let n = spec.v_dim();
    let mut first = None;
    let mut note = |m: String| {
        if first.is_none() {
            first = Some(m)
        }
    };
    let mut min_eig = f64::INFINITY;
    let mut positive = true;
    for (w, m) in spec.effects.iter().enumerate() {
        let e = min_eigenvalue(m)?;
        min_eig = min_eig.min(e);
        if fro(&(m - m.adjoint())) > tol.psd_eig || e < -tol.psd_eig {
            positive = false;
            note(format!("effect {w} is not PSD (min eigenvalue {e:.3e})"));
        }
    }
    let mut sum = zeros(n, n);
    for m in &spec.effects {
        sum += m;
    }
    let normalization_residual = fro(&(sum - identity(n)));
    let normalized = normalization_residual <= tol.recon_fro;
    if !normalized {
        note(format!("effects sum to I only up to {normalization_residual:.3e}"));
    }
    let sub = &spec.covariance.sub;
    let u = &spec.covariance.u;
    let mut covariance_residual = 0.0f64;
    for g in sub.parent().elements() {
        for w in 0..spec.omega_size() {
            let r = fro(&(u.get(g) * &spec.effects[w] * u.get(g).adjoint() - &spec.effects[sub.act(g, w)]));
            covariance_residual = covariance_residual.max(r);
            if r > tol.recon_fro {
                note(format!("covariance fails at (g={g}, omega={w}), residual {r:.3e}"));
            }
        }
    }
    let covariant = covariance_residual <= tol.recon_fro;
    Ok(ObservableReport {
        positive,
        normalized,
        covariant,
        min_eig,
        normalization_residual,
        covariance_residual,
        first_violation: first,
    })
}

/// Minimal covariant Naimark dilation on ⊕_ω ℂ^{m(ω)}.
#[derive(Debug, Clone)]
pub struct NaimarkData {
    pub fibers: Vec<usize>,
    /// Isometry ℂ^V → ⊕_ω ℂ^{m(ω)}.
    pub k: CMatrix,
    pub projections: Vec<CMatrix>,
    /// y_g as decomposable operators over T = (ω ↦ gω).
    pub y: Vec<DecomposableOp>,
    /// g ↦ y_g, with the cocycle of U.
    pub y_rep: MultiplierRep,
    pub certificate: Certificate,
}

impl NaimarkData {
    /// Rows of K belonging to the fiber over ω.
    pub fn fiber_rows(&self, omega: usize) -> CMatrix {
        let o = offsets(&self.fibers);
        self.k.rows(o[omega], self.fibers[omega]).into_owned()
    }
}

pub fn naimark(spec: &ObservableSpec, tol: &Tolerances) -> Result<NaimarkData> {
    let report = validate_observable(spec, tol)?;
    if !report.ok() {
        return Err(Error::invalid(format!(
            "not a covariant observable: {}",
            report.first_violation.unwrap_or_default()
        )));
    }
    let dil = ksgns(&spec.as_cp_map()?, tol)?;
    let n = dil.n;
    let nom = spec.omega_size();
    let mut fibers = vec![];
    let mut cols = vec![];
    for w in 0..nom {
        let (vals, vecs) = eigh(&dil.pi[w]);
        let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
        fibers.push(keep.len());
        cols.push(CMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])]));
    }
    let q = hstack(n, &cols);
    let nscale = (n as f64).sqrt().max(1.0);
    let mut cert = Certificate::new();
    cert.extend("ksgns.", dil.certificate.clone());
    cert.record("fiber_basis_unitary", unitary_residual(&q), tol.unitary_fro * nscale);
    let k = q.adjoint() * &dil.j;
    let projections: Vec<CMatrix> = (0..nom).map(|w| fiber_projection(&fibers, w)).collect();

    let sub = &spec.covariance.sub;
    let g = sub.parent();
    let u = &spec.covariance.u;
    let mut y = vec![];
    let mut ymats = vec![];
    for a in g.elements() {
        let m = q.adjoint() * dil.utilde.get(a) * &q;
        let perm: Vec<usize> = (0..nom).map(|w| sub.act(a, w)).collect();
        y.push(decomposable_extract(&m, &fibers, &perm, tol)?);
        ymats.push(m);
    }
    let v = spec.v_dim();
    cert.record("isometry", fro(&(k.adjoint() * &k - identity(v))), tol.recon_fro * nscale);
    let mut eff = 0.0f64;
    for w in 0..nom {
        eff = eff.max(fro(&(k.adjoint() * &projections[w] * &k - &spec.effects[w])));
    }
    cert.record("effects", eff, tol.recon_fro);
    let span: Vec<CMatrix> = projections.iter().map(|p| p * &k).collect();
    cert.flag("minimality", numerical_rank(&hstack(n, &span), tol) == n);
    let mut inter = 0.0f64;
    let mut imp = 0.0f64;
    for a in g.elements() {
        inter = inter.max(fro(&(&ymats[a] * &k - &k * u.get(a))));
        for w in 0..nom {
            let moved = &ymats[a] * &projections[w] * ymats[a].adjoint();
            imp = imp.max(fro(&(moved - &projections[sub.act(a, w)])));
        }
    }
    cert.record("intertwining", inter, tol.recon_fro * nscale);
    cert.record("imprimitivity", imp, tol.recon_fro * nscale);
    let same_fibers = g
        .elements()
        .all(|a| (0..nom).all(|w| fibers[sub.act(a, w)] == fibers[w]));
    cert.flag("fiber_dimension_invariant", same_fibers);
    let sigma = u.cocycle();
    let mut coc = 0.0f64;
    for a in g.elements() {
        for b in g.elements() {
            for w in 0..nom {
                let lhs = &y[g.mul(a, b)].blocks[w];
                let rhs = &y[a].blocks[w] * &y[b].blocks[sub.act(g.inv(a), w)] * sigma.get(a, b).conj();
                coc = coc.max(fro(&(lhs - rhs)));
            }
        }
    }
    cert.record("block_cocycle", coc, tol.recon_fro * nscale);
    let certificate = cert.require()?;
    let y_rep = MultiplierRep::new(g.clone(), sigma.clone(), ymats, true, tol)?;
    Ok(NaimarkData {
        fibers,
        k,
        projections,
        y,
        y_rep,
        certificate,
    })
}

/// Λ: ℂ^V → M⁰ with ΛU(h) = ρ(h)Λ, split along the irreducible decomposition of U.
#[derive(Debug, Clone)]
pub struct CovariantObservableData {
    pub covariance: Covariance,
    pub rho: SubgroupRep,
    pub lambda: CMatrix,
    pub decomposition: IrrepDecomposition,
    /// Λ_j(τ), indexed `[τ][j]`, each dim M⁰ × multiplicity(τ).
    pub blocks: Vec<Vec<CMatrix>>,
}

impl CovariantObservableData {
    /// Λ_j(τ) = Λ V_{τ,j} / √μ(τ) with μ(τ) = dim(τ)·|H|/|G|.
    pub fn new(
        covariance: Covariance,
        rho: SubgroupRep,
        lambda: CMatrix,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<Self> {
        if lambda.ncols() != covariance.v_dim() || lambda.nrows() != rho.dim() {
            return Err(Error::dim("Λ must map ℂ^V into the space of ρ"));
        }
        if rho.subgroup() != &covariance.sub {
            return Err(Error::invalid("ρ is not a representation of the stability subgroup"));
        }
        let decomposition = irrep_decompose(&covariance.u, seed, tol)?;
        let ratio = covariance.sub.order() as f64 / covariance.sub.parent().order() as f64;
        let blocks = decomposition
            .blocks
            .iter()
            .map(|b| {
                let mu = b.irrep.dim as f64 * ratio;
                (0..b.irrep.dim)
                    .map(|j| &lambda * b.multiplicity_slice(j) / C64::new(mu.sqrt(), 0.0))
                    .collect()
            })
            .collect();
        Ok(CovariantObservableData {
            covariance,
            rho,
            lambda,
            decomposition,
            blocks,
        })
    }

    /// Normalization per τ, intertwining with ρ, and totality of the range.
    pub fn certify(&self, tol: &Tolerances) -> Certificate {
        let mut cert = Certificate::new();
        let mut norm = 0.0f64;
        for (b, fam) in self.decomposition.blocks.iter().zip(&self.blocks) {
            let mut s = zeros(b.multiplicity, b.multiplicity);
            for l in fam {
                s += l.adjoint() * l;
            }
            norm = norm.max(fro(&(s - identity(b.multiplicity))));
        }
        cert.record("normalization", norm, tol.recon_fro);
        let mut inter = 0.0f64;
        for &h in self.covariance.sub.members() {
            inter = inter.max(fro(&(&self.lambda * self.covariance.u.get(h) - self.rho.get(h) * &self.lambda)));
        }
        cert.record("intertwining", inter, tol.recon_fro);
        cert.flag("total_range", numerical_rank(&self.lambda, tol) == self.lambda.nrows());
        cert
    }
}

/// M_ω = U(s(ω)) Λ†Λ U(s(ω))†.
pub fn observable_from_lambda(data: &CovariantObservableData, tol: &Tolerances) -> Result<ObservableSpec> {
    data.certify(tol).require()?;
    let l2 = data.lambda.adjoint() * &data.lambda;
    let cov = &data.covariance;
    let effects = (0..cov.omega_size())
        .map(|w| cov.u_at(w) * &l2 * cov.u_at(w).adjoint())
        .collect();
    let spec = ObservableSpec::new(effects, cov.clone())?;
    let r = validate_observable(&spec, tol)?;
    if !r.ok() {
        return Err(Error::invalid(format!(
            "reconstructed observable fails validation: {}",
            r.first_violation.unwrap_or_default()
        )));
    }
    Ok(spec)
}

/// Λ = fiber of the Naimark isometry over the identity coset, ρ(h) = y(h, H̄).
pub fn lambda_from_observable(spec: &ObservableSpec, seed: u64, tol: &Tolerances) -> Result<CovariantObservableData> {
    if !spec.covariance.cocycle_trivial_on_sub() {
        return Err(Error::Domain("Λ form needs the cocycle to be trivial on the stabilizer".into()));
    }
    let nd = naimark(spec, tol)?;
    let sub = spec.covariance.sub.clone();
    let lambda = nd.fiber_rows(0);
    let rho_mats = sub.members().iter().map(|&h| nd.y[h].blocks[0].clone()).collect();
    let rho = SubgroupRep::new(sub, rho_mats, tol)?;
    let data = CovariantObservableData::new(spec.covariance.clone(), rho, lambda, seed, tol)?;
    let back = observable_from_lambda(&data, tol)?;
    let worst = back
        .effects
        .iter()
        .zip(&spec.effects)
        .map(|(a, b)| fro(&(a - b)))
        .fold(0.0, f64::max);
    if worst > tol.recon_fro {
        return Err(Error::tolerance("observable reconstruction from Λ", worst, tol.recon_fro));
    }
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct ObservableExtremality {
    pub extreme: bool,
    pub witness_dim: usize,
    /// Hermitian D on M⁰ commuting with ρ, of spectral norm 1.
    pub witness: Option<CMatrix>,
    /// Observables with effects U(s)Λ†(I ± D)ΛU(s)†.
    pub split: Option<(ObservableSpec, ObservableSpec)>,
}

pub fn observable_extremal(data: &CovariantObservableData, tol: &Tolerances) -> Result<ObservableExtremality> {
    data.certify(tol).require()?;
    let d0 = data.lambda.nrows();
    let gens: Vec<CMatrix> = data.rho.matrices().to_vec();
    let mut constraints = vec![];
    for (b, fam) in data.decomposition.blocks.iter().zip(&data.blocks) {
        for a1 in 0..b.multiplicity {
            for a2 in 0..b.multiplicity {
                let mut c = zeros(d0, d0);
                for l in fam {
                    c += l.column(a1) * l.column(a2).adjoint();
                }
                constraints.push(c);
            }
        }
    }
    let space = constrained_commutant(d0, &gens, &constraints, true, tol)?;
    let Some(first) = space.first() else {
        return Ok(ObservableExtremality {
            extreme: true,
            witness_dim: 0,
            witness: None,
            split: None,
        });
    };
    let d = hermitian_witness(first);
    let cov = &data.covariance;
    let make = |sign: f64| -> Result<ObservableSpec> {
        let m = data.lambda.adjoint() * (identity(d0) + &d * C64::new(sign, 0.0)) * &data.lambda;
        let effects = (0..cov.omega_size())
            .map(|w| cov.u_at(w) * &m * cov.u_at(w).adjoint())
            .collect();
        ObservableSpec::new(effects, cov.clone())
    };
    let split = (make(1.0)?, make(-1.0)?);
    Ok(ObservableExtremality {
        extreme: false,
        witness_dim: space.len(),
        witness: Some(d),
        split: Some(split),
    })
}

/// Extremality through the kernel form of the observable.
pub fn observable_extremal_kernel(spec: &ObservableSpec, tol: &Tolerances) -> Result<bool> {
    let (k, z) = spec.kernel_form()?;
    let d = kolmogorov_decompose(&k, tol)?;
    Ok(kernel_extremal(&k, &z, &d, tol)?.extreme)
}

/// Extremality of f ↦ Σ f(ω)M_ω among covariant unital CP maps on Fun(Ω).
pub fn observable_extremal_cp(spec: &ObservableSpec, tol: &Tolerances) -> Result<bool> {
    let s = spec.as_cp_map()?;
    let d = ksgns(&s, tol)?;
    Ok(cp_extremal(&s, &d, tol)?.extreme)
}
