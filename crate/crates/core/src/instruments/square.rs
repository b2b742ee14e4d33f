use super::instrument::{b_from_instrument, instrument_from_b, marginal_observable, CovariantInstrumentData, InstrumentSpec};
use super::Covariance;
use crate::error::{Error, Result};
use crate::fingroup::{central_extension, heisenberg_rep, CentralExtension, Heisenberg, MultiplierRep, SubgroupData};
use crate::numlin::{c, fro, hermitian_residual, identity, min_eigenvalue, zeros, CMatrix, Tolerances, C64};
use crate::report::Certificate;

/// Σ_g |⟨φ|W(g)ψ⟩|² / |H| over unit vectors φ, ψ.
///
/// Evaluated on all pairs from e_i, (e_i+e_j)/√2 and (e_i+ie_j)/√2. Returns the common
/// value when the spread stays within `tol`, otherwise a tolerance error carrying the spread.
pub fn sq_constant(w: &MultiplierRep, h_order: usize, tol: f64) -> Result<f64> {
    let n = w.dim();
    if n == 0 || h_order == 0 {
        return Err(Error::dim("empty representation or subgroup"));
    }
    let mut vecs = vec![];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        let mut e = CMatrix::zeros(n, 1);
        e[(i, 0)] = c(1.0, 0.0);
        vecs.push(e);
        for j in i + 1..n {
            for z in [c(r, 0.0), c(0.0, r)] {
                let mut v = CMatrix::zeros(n, 1);
                v[(i, 0)] = c(r, 0.0);
                v[(j, 0)] = z;
                vecs.push(v);
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for phi in &vecs {
        for psi in &vecs {
            let s: f64 = w
                .matrices()
                .iter()
                .map(|m| (phi.adjoint() * m * psi)[(0, 0)].norm_sqr())
                .sum::<f64>()
                / h_order as f64;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if hi - lo > tol {
        return Err(Error::tolerance("square-integrability constant spread", hi - lo, tol));
    }
    Ok(0.5 * (hi + lo))
}

#[derive(Debug, Clone)]
pub struct SqStructure {
    pub d: f64,
    /// S = d·Σ_j B_j†B_j.
    pub s: CMatrix,
    pub data: CovariantInstrumentData,
    pub certificate: Certificate,
}

/// For U square integrable: S = d·ΣB†B is a state commuting with U(H) and
/// M_ω = (1/d) U(s(ω)) S U(s(ω))†.
pub fn sq_structure(spec: &InstrumentSpec, tol: &Tolerances) -> Result<SqStructure> {
    let cov = &spec.covariance;
    let d = sq_constant(&cov.u, cov.sub.order(), tol.recon_fro)?;
    let data = b_from_instrument(spec, tol)?;
    let s = data.gram() * c(d, 0.0);
    let mut cert = Certificate::new();
    cert.record("hermitian", hermitian_residual(&s), tol.psd_eig);
    cert.record("positive", (-min_eigenvalue(&s)?).max(0.0), tol.psd_eig);
    cert.record("trace", (s.trace() - c(1.0, 0.0)).norm(), tol.recon_fro);
    let mut comm = 0.0f64;
    for &h in cov.sub.members() {
        let u = cov.u.get(h);
        comm = comm.max(fro(&(u * &s - &s * u)));
    }
    cert.record("commutes_with_h", comm, tol.recon_fro);
    let obs = marginal_observable(spec, tol)?;
    let mut eff = 0.0f64;
    for w in 0..spec.omega_size() {
        let u = cov.u_at(w);
        let m = u * &s * u.adjoint() / c(d, 0.0);
        eff = eff.max(fro(&(m - &obs.effects[w])));
    }
    cert.record("effects", eff, tol.recon_fro);
    let certificate = cert.require()?;
    Ok(SqStructure {
        d,
        s,
        data,
        certificate,
    })
}

/// The discrete phase-space instrument over Z_d × Z_d, realized on the central extension
/// of the Weyl system with H its center, so that the outcome (q,p) has index q·d + p.
#[derive(Debug, Clone)]
pub struct PhaseSpaceInstrument {
    pub heisenberg: Heisenberg,
    pub extension: CentralExtension,
    pub instrument: InstrumentSpec,
    pub data: CovariantInstrumentData,
    /// S = d·ΣB†B.
    pub seed_state: CMatrix,
    pub certificate: Certificate,
}

impl PhaseSpaceInstrument {
    /// M_{(q,p)} = (1/d) W₀(q,p) S W₀(q,p)†.
    pub fn effect(&self, q: usize, p: usize) -> CMatrix {
        let d = self.heisenberg.d;
        let w = self.heisenberg.rep.get(self.heisenberg.index(q, p));
        w * &self.seed_state * w.adjoint() / c(d as f64, 0.0)
    }
}

/// Γ_{(q,p)}(b) = Σ_j (W₀B_jW₀†)† b (W₀B_jW₀†) with W₀ = W₀(q,p).
pub fn phase_space(d: usize, b_ops: Vec<CMatrix>, tol: &Tolerances) -> Result<PhaseSpaceInstrument> {
    if d == 0 {
        return Err(Error::dim("d must be positive"));
    }
    let heis = heisenberg_rep(d);
    let ext = central_extension(&heis.rep, 4 * d.max(2), tol)?;
    let center: Vec<usize> = (0..ext.m).map(|j| ext.index(0, j)).collect();
    let sub = SubgroupData::new(ext.group.clone(), &center)?;
    let cov = Covariance::new(sub, ext.rep.clone())?;
    let data = CovariantInstrumentData::new(cov, ext.rep.clone(), b_ops)?;
    let seed_state = data.gram() * c(d as f64, 0.0);
    let tr = seed_state.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol.recon_fro {
        return Err(Error::invalid(format!(
            "d·ΣB_j†B_j must have trace 1, got {:.6}",
            tr.re
        )));
    }
    let instrument = instrument_from_b(&data, tol)?;
    let mut cert = Certificate::new();
    let mut twirl = zeros(d, d);
    let mut eff = 0.0f64;
    let out = PhaseSpaceInstrument {
        heisenberg: heis,
        extension: ext,
        instrument,
        data,
        seed_state,
        certificate: Certificate::new(),
    };
    for q in 0..d {
        for p in 0..d {
            let m = out.effect(q, p);
            eff = eff.max(fro(&(out.instrument.unit_value(out.heisenberg.index(q, p)) - &m)));
            twirl += m;
        }
    }
    cert.record("normalization", fro(&(twirl - identity(d))), tol.recon_fro);
    cert.record("effects", eff, tol.recon_fro);
    let certificate = cert.require()?;
    Ok(PhaseSpaceInstrument { certificate, ..out })
}
