use super::observable::{lambda_from_observable, ObservableSpec};
use super::Covariance;
use crate::cpmaps::{cp_extremal, ksgns, CPMapSpec, CpSymmetry, SplitSpec};
use crate::cstar::{FiniteCStarAlgebra, ModuleSpace, TensorSplit};
use crate::error::{Error, Result};
use crate::fingroup::MultiplierRep;
use crate::numlin::{
    constrained_commutant, eigh, fro, identity, min_eigenvalue, pinv, vec_of, zeros, CMatrix, Tolerances, C64,
};
use crate::report::Certificate;

/// Γ_ω: M_K → M_V for each ω ∈ Ω, stored as Choi matrices with
/// C_ω[(a·V+v), (b·V+v')] = Γ_ω(E_ab)[v, v'].
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSpec {
    pub k_dim: usize,
    pub choi: Vec<CMatrix>,
    /// Ω = G/H and U on ℂ^V.
    pub covariance: Covariance,
    /// u on ℂ^K.
    pub u_k: MultiplierRep,
}

/// Choi matrix of b ↦ Σ_i A_i† b A_i with A_i: ℂ^V → ℂ^K.
pub fn kraus_to_choi(ops: &[CMatrix], k_dim: usize, v_dim: usize) -> Result<CMatrix> {
    let n = k_dim * v_dim;
    let mut c = zeros(n, n);
    for a in ops {
        if a.shape() != (k_dim, v_dim) {
            return Err(Error::dim(format!("Kraus operators must be {k_dim}x{v_dim}")));
        }
        let w = CMatrix::from_fn(n, 1, |r, _| a[(r / v_dim, r % v_dim)].conj());
        c += &w * w.adjoint();
    }
    Ok(c)
}

impl InstrumentSpec {
    pub fn new(k_dim: usize, choi: Vec<CMatrix>, covariance: Covariance, u_k: MultiplierRep) -> Result<Self> {
        let s = InstrumentSpec {
            k_dim,
            choi,
            covariance,
            u_k,
        };
        s.check_shapes()?;
        Ok(s)
    }

    /// Builds the Choi matrices from Kraus families, one family per outcome.
    pub fn from_kraus(
        k_dim: usize,
        kraus: &[Vec<CMatrix>],
        covariance: Covariance,
        u_k: MultiplierRep,
    ) -> Result<Self> {
        let v = covariance.v_dim();
        let choi = kraus
            .iter()
            .map(|ops| kraus_to_choi(ops, k_dim, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k_dim, choi, covariance, u_k)
    }

    /// Builds the spec from Γ given as a function of (ω, b).
    pub fn from_fn(
        k_dim: usize,
        covariance: Covariance,
        u_k: MultiplierRep,
        f: impl Fn(usize, &CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let v = covariance.v_dim();
        let choi = (0..covariance.omega_size())
            .map(|w| {
                let mut c = zeros(k_dim * v, k_dim * v);
                for a in 0..k_dim {
                    for b in 0..k_dim {
                        let mut e = zeros(k_dim, k_dim);
                        e[(a, b)] = C64::new(1.0, 0.0);
                        c.view_mut((a * v, b * v), (v, v)).copy_from(&f(w, &e));
                    }
                }
                c
            })
            .collect();
        Self::new(k_dim, choi, covariance, u_k)
    }

    pub fn v_dim(&self) -> usize {
        self.covariance.v_dim()
    }

    pub fn omega_size(&self) -> usize {
        self.covariance.omega_size()
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.k_dim * self.v_dim();
        if self.choi.len() != self.omega_size() {
            return Err(Error::dim(format!(
                "need {} Choi matrices (one per coset), got {}",
                self.omega_size(),
                self.choi.len()
            )));
        }
        if self.choi.iter().any(|c| c.shape() != (n, n)) {
            return Err(Error::dim(format!("Choi matrices must be {n}x{n}")));
        }
        if self.u_k.dim() != self.k_dim {
            return Err(Error::dim("u must act on the output space"));
        }
        if self.u_k.group().order() != self.covariance.sub.parent().order() {
            return Err(Error::dim("u and U use different groups"));
        }
        Ok(())
    }

    /// Γ_ω(b).
    pub fn value(&self, omega: usize, b: &CMatrix) -> CMatrix {
        let v = self.v_dim();
        let mut out = zeros(v, v);
        for a in 0..self.k_dim {
            for c in 0..self.k_dim {
                let z = b[(a, c)];
                if z != C64::new(0.0, 0.0) {
                    out += self.choi[omega].view((a * v, c * v), (v, v)) * z;
                }
            }
        }
        out
    }

    pub fn unit_value(&self, omega: usize) -> CMatrix {
        self.value(omega, &identity(self.k_dim))
    }

    /// Kraus operators of Γ_ω from the Choi eigendecomposition, descending eigenvalues,
    /// first nonzero entry of each eigenvector made real positive.
    pub fn kraus(&self, omega: usize, tol: &Tolerances) -> Vec<CMatrix> {
        choi_kraus(&self.choi[omega], self.k_dim, self.v_dim(), tol)
    }

    /// Γ on the product algebra M_K ⊗ Fun(Ω), with the inner action (u_g·u_g†) ⊗ translation.
    pub fn as_cp_map(&self, tol: &Tolerances) -> Result<CPMapSpec> {
        let k = self.k_dim;
        let n = self.omega_size();
        let split = TensorSplit::new(FiniteCStarAlgebra::full(k), FiniteCStarAlgebra::commutative(n));
        let perm = self.covariance.permutation();
        let g = self.covariance.sub.parent();
        let imp = g
            .elements()
            .map(|a| split.product_implementer(self.u_k.get(a), perm.get(a)))
            .collect();
        let implementer = MultiplierRep::new(g.clone(), self.u_k.cocycle().clone(), imp, true, tol)?;
        CPMapSpec::from_fn(split.product.clone(), ModuleSpace::new(1, self.v_dim()), |m| {
            let mut out = zeros(self.v_dim(), self.v_dim());
            for w in 0..n {
                out += self.value(w, &m.view((w * k, w * k), (k, k)).into_owned());
            }
            out
        })?
        .with_symmetry(CpSymmetry {
            u_v: self.covariance.u.clone(),
            implementer,
        })?
        .with_split(SplitSpec {
            split,
            b_implementer: Some(self.u_k.clone()),
            c_implementer: Some(perm),
        })
    }

    /// Reads an instrument back from a CP map on M_K ⊗ Fun(Ω).
    pub fn from_cp_map(&self, cp: &CPMapSpec) -> Result<Self> {
        let Some(sp) = &cp.split else {
            return Err(Error::invalid("CP map has no declared tensor split"));
        };
        let full = &sp.split.b;
        InstrumentSpec::from_fn(self.k_dim, self.covariance.clone(), self.u_k.clone(), |w, b| {
            let mut out = zeros(self.v_dim(), self.v_dim());
            for a in 0..self.k_dim {
                for c in 0..self.k_dim {
                    if b[(a, c)] != C64::new(0.0, 0.0) {
                        let u = sp.split.product_unit(full.unit_index(0, a, c), w);
                        out += &cp.values[u] * b[(a, c)];
                    }
                }
            }
            out
        })
    }
}

pub(crate) fn choi_kraus(choi: &CMatrix, k_dim: usize, v_dim: usize, tol: &Tolerances) -> Vec<CMatrix> {
    let (vals, vecs) = eigh(choi);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol.rank_rel * top.max(1.0);
    let mut ops = vec![];
    for (i, &l) in vals.iter().enumerate() {
        if l <= cut {
            break;
        }
        let mut w = vecs.column(i).into_owned();
        if let Some(z) = w.iter().find(|z| z.norm() > tol.rank_rel).copied() {
            w *= z.conj() / z.norm();
        }
        let s = l.sqrt();
        ops.push(CMatrix::from_fn(k_dim, v_dim, |a, v| (w[a * v_dim + v] * s).conj()));
    }
    ops
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentReport {
    pub cp: bool,
    pub normalized: bool,
    pub covariant: bool,
    pub min_eig: f64,
    pub normalization_residual: f64,
    pub covariance_residual: f64,
    pub first_violation: Option<String>,
}

impl InstrumentReport {
    pub fn ok(&self) -> bool {
        self.cp && self.normalized && self.covariant
    }
}

pub fn validate_instrument(spec: &InstrumentSpec, tol: &Tolerances) -> Result<InstrumentReport> {
    spec.check_shapes()?;
    let mut first = None;
    let mut note = |m: String| {
        if first.is_none() {
            first = Some(m)
        }
    };
    let mut cp = true;
    let mut min_eig = f64::INFINITY;
    for (w, c) in spec.choi.iter().enumerate() {
        let e = if c.nrows() == 0 { 0.0 } else { min_eigenvalue(c)? };
        min_eig = min_eig.min(e);
        if fro(&(c - c.adjoint())) > tol.psd_eig || e < -tol.psd_eig {
            cp = false;
            note(format!("Gamma_{w} is not CP (Choi min eigenvalue {e:.3e})"));
        }
    }
    let v = spec.v_dim();
    let mut sum = zeros(v, v);
    for w in 0..spec.omega_size() {
        sum += spec.unit_value(w);
    }
    let normalization_residual = fro(&(sum - identity(v)));
    let normalized = normalization_residual <= tol.recon_fro;
    if !normalized {
        note(format!("sum of Gamma_omega(I) differs from I by {normalization_residual:.3e}"));
    }
    let sub = &spec.covariance.sub;
    let u = &spec.covariance.u;
    let k = spec.k_dim;
    let mut covariance_residual = 0.0f64;
    for g in sub.parent().elements() {
        let ug = spec.u_k.get(g);
        for w in 0..spec.omega_size() {
            let gw = sub.act(g, w);
            for a in 0..k {
                for b in 0..k {
                    let mut e = zeros(k, k);
                    e[(a, b)] = C64::new(1.0, 0.0);
                    let lhs = spec.value(gw, &(ug * &e * ug.adjoint()));
                    let rhs = u.get(g) * spec.value(w, &e) * u.get(g).adjoint();
                    let r = fro(&(lhs - rhs));
                    if r > covariance_residual {
                        covariance_residual = r;
                    }
                    if r > tol.recon_fro {
                        note(format!("covariance fails at (g={g}, omega={w}, E_{a}{b}), residual {r:.3e}"));
                    }
                }
            }
        }
    }
    let covariant = covariance_residual <= tol.recon_fro;
    Ok(InstrumentReport {
        cp,
        normalized,
        covariant,
        min_eig,
        normalization_residual,
        covariance_residual,
        first_violation: first,
    })
}

fn require_valid(spec: &InstrumentSpec, tol: &Tolerances) -> Result<()> {
    let r = validate_instrument(spec, tol)?;
    if !r.ok() {
        return Err(Error::invalid(format!(
            "not a covariant instrument: {}",
            r.first_violation.unwrap_or_default()
        )));
    }
    Ok(())
}

/// M_ω = Γ_ω(I).
pub fn marginal_observable(spec: &InstrumentSpec, tol: &Tolerances) -> Result<ObservableSpec> {
    require_valid(spec, tol)?;
    ObservableSpec::new(
        (0..spec.omega_size()).map(|w| spec.unit_value(w)).collect(),
        spec.covariance.clone(),
    )
}

/// E(b) = Σ_ω Γ_ω(b), covariant under (u, U).
pub fn marginal_channel(spec: &InstrumentSpec, tol: &Tolerances) -> Result<CPMapSpec> {
    require_valid(spec, tol)?;
    CPMapSpec::from_fn(FiniteCStarAlgebra::full(spec.k_dim), ModuleSpace::new(1, spec.v_dim()), |b| {
        let mut out = zeros(spec.v_dim(), spec.v_dim());
        for w in 0..spec.omega_size() {
            out += spec.value(w, b);
        }
        out
    })?
    .with_symmetry(CpSymmetry {
        u_v: spec.covariance.u.clone(),
        implementer: spec.u_k.clone(),
    })
}

/// B_j: ℂ^V → ℂ^K generating a covariant instrument.
#[derive(Debug, Clone)]
pub struct CovariantInstrumentData {
    pub covariance: Covariance,
    pub u_k: MultiplierRep,
    pub b: Vec<CMatrix>,
}

impl CovariantInstrumentData {
    pub fn new(covariance: Covariance, u_k: MultiplierRep, b: Vec<CMatrix>) -> Result<Self> {
        let (k, v) = (u_k.dim(), covariance.v_dim());
        if b.iter().any(|x| x.shape() != (k, v)) {
            return Err(Error::dim(format!("each B_j must be {k}x{v}")));
        }
        Ok(CovariantInstrumentData { covariance, u_k, b })
    }

    pub fn k_dim(&self) -> usize {
        self.u_k.dim()
    }

    /// Σ_j B_j†B_j.
    pub fn gram(&self) -> CMatrix {
        let v = self.covariance.v_dim();
        self.b.iter().fold(zeros(v, v), |acc, x| acc + x.adjoint() * x)
    }

    /// Kraus operators u_g B_j U(g)† for the outcome gH, taking g = s(ω)·h.
    fn outcome_kraus(&self, omega: usize, h: usize) -> Vec<CMatrix> {
        let g = self.covariance.sub.parent();
        let s = g.mul(self.covariance.sub.section(omega), h);
        let ug = self.u_k.get(s);
        let uv = self.covariance.u.get(s);
        self.b.iter().map(|x| ug * x * uv.adjoint()).collect()
    }

    fn build(&self, h: usize) -> Result<InstrumentSpec> {
        let kraus: Vec<Vec<CMatrix>> = (0..self.covariance.omega_size())
            .map(|w| self.outcome_kraus(w, h))
            .collect();
        InstrumentSpec::from_kraus(self.k_dim(), &kraus, self.covariance.clone(), self.u_k.clone())
    }
}

/// (Hinv) over H and the matrix units of M_K, and (ehto).
pub fn check_b_family(data: &CovariantInstrumentData, tol: &Tolerances) -> Certificate {
    let k = data.k_dim();
    let v = data.covariance.v_dim();
    let sub = &data.covariance.sub;
    let u = &data.covariance.u;
    let mut hinv = 0.0f64;
    for &h in sub.members() {
        let uh = data.u_k.get(h);
        for a in 0..k {
            for c in 0..k {
                let mut e = zeros(k, k);
                e[(a, c)] = C64::new(1.0, 0.0);
                let inner = uh.adjoint() * &e * uh;
                let mut lhs = zeros(v, v);
                let mut rhs = zeros(v, v);
                for x in &data.b {
                    lhs += x.adjoint() * &inner * x;
                    let xu = x * u.get(h);
                    rhs += xu.adjoint() * &e * &xu;
                }
                hinv = hinv.max(fro(&(lhs - rhs)));
            }
        }
    }
    let gram = data.gram();
    let mut total = zeros(v, v);
    for w in 0..data.covariance.omega_size() {
        let s = data.covariance.u_at(w);
        total += s * &gram * s.adjoint();
    }
    let mut cert = Certificate::new();
    cert.record("hinv", hinv, tol.recon_fro);
    cert.record("ehto", fro(&(total - identity(v))), tol.recon_fro);
    cert
}

/// Γ_ω(b) = Σ_j (u_s B_j U(s)†)† b (u_s B_j U(s)†) with s = s(ω); also checks that the
/// section s·h gives the same instrument for each h ∈ H.
pub fn instrument_from_b(data: &CovariantInstrumentData, tol: &Tolerances) -> Result<InstrumentSpec> {
    check_b_family(data, tol).require()?;
    let e = data.covariance.sub.parent().identity();
    let spec = data.build(e)?;
    for &h in data.covariance.sub.members() {
        if h == e {
            continue;
        }
        let other = data.build(h)?;
        let r = spec
            .choi
            .iter()
            .zip(&other.choi)
            .map(|(a, b)| fro(&(a - b)))
            .fold(0.0, f64::max);
        if r > tol.recon_fro {
            return Err(Error::tolerance(format!("section independence (h={h})"), r, tol.recon_fro));
        }
    }
    require_valid(&spec, tol)?;
    Ok(spec)
}

fn reconstruction_residual(a: &InstrumentSpec, b: &InstrumentSpec) -> f64 {
    a.choi.iter().zip(&b.choi).map(|(x, y)| fro(&(x - y))).fold(0.0, f64::max)
}

/// B_j = Kraus operators of Γ at the identity coset.
pub fn b_from_instrument(spec: &InstrumentSpec, tol: &Tolerances) -> Result<CovariantInstrumentData> {
    require_valid(spec, tol)?;
    let b = spec.kraus(0, tol);
    let data = CovariantInstrumentData::new(spec.covariance.clone(), spec.u_k.clone(), b)?;
    let back = instrument_from_b(&data, tol)?;
    let r = reconstruction_residual(&back, spec);
    if r > tol.recon_fro {
        return Err(Error::tolerance("instrument reconstruction from B", r, tol.recon_fro));
    }
    Ok(data)
}

/// B_j = A_jΛ, where A_j are Kraus operators of Φ₀(b) = (Λ⁺)†Γ_{ω₀}(b)Λ⁺ and Λ comes
/// from the marginal observable.
pub fn b_via_lambda(spec: &InstrumentSpec, seed: u64, tol: &Tolerances) -> Result<CovariantInstrumentData> {
    let obs = marginal_observable(spec, tol)?;
    let lam = lambda_from_observable(&obs, seed, tol)?.lambda;
    let lp = pinv(&lam, tol);
    let m0 = lam.nrows();
    let k = spec.k_dim;
    let mut phi0 = zeros(k * m0, k * m0);
    for a in 0..k {
        for c in 0..k {
            let mut e = zeros(k, k);
            e[(a, c)] = C64::new(1.0, 0.0);
            let block = lp.adjoint() * spec.value(0, &e) * &lp;
            phi0.view_mut((a * m0, c * m0), (m0, m0)).copy_from(&block);
        }
    }
    let b = choi_kraus(&phi0, k, m0, tol).into_iter().map(|a| a * &lam).collect();
    let data = CovariantInstrumentData::new(spec.covariance.clone(), spec.u_k.clone(), b)?;
    let back = instrument_from_b(&data, tol)?;
    let r = reconstruction_residual(&back, spec);
    if r > tol.recon_fro {
        return Err(Error::tolerance("instrument reconstruction through Λ", r, tol.recon_fro));
    }
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct InstrumentExtremality {
    pub extreme: bool,
    /// Verdict of the CP map on M_K ⊗ Fun(Ω).
    pub cp_verdict: bool,
    /// Verdict from the B-family: D on ℂ^r commuting with the H-action on the B_j.
    pub ancilla_verdict: bool,
    pub witness: Option<CMatrix>,
    pub split: Option<(InstrumentSpec, InstrumentSpec)>,
}

/// π(h) with u_h†B_jU(h) = Σ_k π(h)_{jk} B_k.
fn b_action(data: &CovariantInstrumentData, tol: &Tolerances) -> Result<Vec<CMatrix>> {
    let r = data.b.len();
    let kv = data.k_dim() * data.covariance.v_dim();
    let mut bmat = zeros(kv, r);
    for (j, x) in data.b.iter().enumerate() {
        bmat.set_column(j, &vec_of(x));
    }
    let bp = pinv(&bmat, tol);
    let mut out = vec![];
    for &h in data.covariance.sub.members() {
        let mut targets = zeros(kv, r);
        for (j, x) in data.b.iter().enumerate() {
            let t = data.u_k.get(h).adjoint() * x * data.covariance.u.get(h);
            targets.set_column(j, &vec_of(&t));
        }
        let pt = &bp * &targets;
        let res = fro(&(&bmat * &pt - &targets));
        if res > tol.recon_fro * fro(&targets).max(1.0) {
            return Err(Error::tolerance(format!("H-action on the Kraus family (h={h})"), res, tol.recon_fro));
        }
        out.push(pt.transpose());
    }
    Ok(out)
}

pub fn instrument_extremal(spec: &InstrumentSpec, tol: &Tolerances) -> Result<InstrumentExtremality> {
    require_valid(spec, tol)?;
    let cp = spec.as_cp_map(tol)?;
    let dil = ksgns(&cp, tol)?;
    let ext = cp_extremal(&cp, &dil, tol)?;

    let data = b_from_instrument(spec, tol)?;
    let pis = b_action(&data, tol)?;
    let r = data.b.len();
    let v = spec.v_dim();
    let twirl = |x: &CMatrix| -> CMatrix {
        let mut t = zeros(v, v);
        for w in 0..spec.omega_size() {
            let s = spec.covariance.u_at(w);
            t += s * x * s.adjoint();
        }
        t
    };
    let t: Vec<Vec<CMatrix>> = (0..r)
        .map(|j| (0..r).map(|k| twirl(&(data.b[j].adjoint() * &data.b[k]))).collect())
        .collect();
    let mut constraints = vec![];
    for a in 0..v {
        for b in 0..v {
            constraints.push(CMatrix::from_fn(r, r, |j, k| t[j][k][(a, b)].conj()));
        }
    }
    let space = constrained_commutant(r, &pis, &constraints, true, tol)?;
    let ancilla_verdict = space.is_empty();
    let split = match &ext.split {
        Some((p, m)) => Some((spec.from_cp_map(p)?, spec.from_cp_map(m)?)),
        None => None,
    };
    Ok(InstrumentExtremality {
        extreme: ext.extreme && ancilla_verdict,
        cp_verdict: ext.extreme,
        ancilla_verdict,
        witness: ext.witness,
        split,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fingroup::{FiniteGroup, SubgroupData};
    use crate::instruments::validate_observable;
    use crate::numlin::{c, from_real};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    pub(crate) fn identity_instrument(n: usize) -> InstrumentSpec {
        let cov = Covariance::trivial(n);
        let uk = cov.u.clone();
        InstrumentSpec::from_kraus(n, &[vec![identity(n)]], cov, uk).unwrap()
    }

    /// Z-measurement with Lüders update, covariant under X on both sides.
    pub(crate) fn luders() -> InstrumentSpec {
        let z2 = FiniteGroup::cyclic(2);
        let x = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let u = MultiplierRep::from_matrices(z2.clone(), vec![identity(2), x], &tol()).unwrap();
        let cov = Covariance::new(SubgroupData::trivial_subgroup(z2), u.clone()).unwrap();
        let p0 = from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p1 = from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        InstrumentSpec::from_kraus(2, &[vec![p0], vec![p1]], cov, u).unwrap()
    }

    #[test]
    fn kraus_choi_round_trip() {
        let a = from_real(2, 3, &[1.0, 0.5, 0.0, -0.2, 0.0, 2.0]);
        let choi = kraus_to_choi(std::slice::from_ref(&a), 2, 3).unwrap();
        let ops = choi_kraus(&choi, 2, 3, &tol());
        assert_eq!(ops.len(), 1);
        assert!(fro(&(&ops[0] - &a)) < 1e-10 || fro(&(&ops[0] + &a)) < 1e-10);
    }

    #[test]
    fn identity_instrument_examples() {
        let s = identity_instrument(2);
        assert!(validate_instrument(&s, &tol()).unwrap().ok());
        let m = marginal_observable(&s, &tol()).unwrap();
        assert_eq!(m.effects, vec![identity(2)]);
        let b = b_from_instrument(&s, &tol()).unwrap();
        assert_eq!(b.b.len(), 1);
        assert!(fro(&(&b.b[0] - identity(2))) < 1e-10);
        let e = instrument_extremal(&s, &tol()).unwrap();
        assert!(e.extreme && e.cp_verdict && e.ancilla_verdict);
    }

    #[test]
    fn luders_marginals() {
        let s = luders();
        assert!(validate_instrument(&s, &tol()).unwrap().ok());
        let m = marginal_observable(&s, &tol()).unwrap();
        assert!(validate_observable(&m, &tol()).unwrap().ok());
        assert_eq!(m.effects[0], from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let ch = marginal_channel(&s, &tol()).unwrap();
        // decoheres: off-diagonal units map to 0
        let off = ch.apply(&from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]), &tol()).unwrap();
        assert!(fro(&off) < 1e-12);
        let b = b_from_instrument(&s, &tol()).unwrap();
        assert_eq!(b.b.len(), 1);
        assert!(fro(&(b.b[0].adjoint() * &b.b[0] - from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-10);
        let e = instrument_extremal(&s, &tol()).unwrap();
        assert!(e.extreme);
        let l = b_via_lambda(&s, 5, &tol()).unwrap();
        assert!(check_b_family(&l, &tol()).all_ok());
    }

    #[test]
    fn uniform_mixing_is_not_extreme() {
        let z2 = FiniteGroup::cyclic(2);
        let x = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let u = MultiplierRep::from_matrices(z2.clone(), vec![identity(2), x], &tol()).unwrap();
        let cov = Covariance::new(SubgroupData::trivial_subgroup(z2), u.clone()).unwrap();
        let s = InstrumentSpec::from_fn(2, cov, u, |_, b| identity(2) * (b.trace() / c(4.0, 0.0))).unwrap();
        assert!(validate_instrument(&s, &tol()).unwrap().ok());
        let e = instrument_extremal(&s, &tol()).unwrap();
        assert!(!e.extreme);
        assert!(!e.cp_verdict && !e.ancilla_verdict);
        let (p, m) = e.split.unwrap();
        assert!(validate_instrument(&p, &tol()).unwrap().ok());
        assert!(validate_instrument(&m, &tol()).unwrap().ok());
        let mid = p.choi[0].clone() + &m.choi[0];
        assert!(fro(&(mid * c(0.5, 0.0) - &s.choi[0])) < 1e-9);
    }

    #[test]
    fn non_covariant_is_rejected() {
        let mut s = luders();
        s.choi[1] = s.choi[0].clone();
        let r = validate_instrument(&s, &tol()).unwrap();
        assert!(!r.ok());
        assert!(b_from_instrument(&s, &tol()).is_err());
    }

    #[test]
    fn broken_ehto_is_rejected() {
        let z2 = FiniteGroup::cyclic(2);
        let cov = Covariance::new(SubgroupData::trivial_subgroup(z2.clone()), MultiplierRep::trivial(z2.clone(), 1)).unwrap();
        let data = CovariantInstrumentData::new(cov, MultiplierRep::trivial(z2, 1), vec![identity(1)]).unwrap();
        let cert = check_b_family(&data, &tol());
        assert!(!cert.get("ehto").unwrap().ok);
        assert!(instrument_from_b(&data, &tol()).is_err());
    }
}
