use crate::error::{Error, Result};
use crate::fingroup::{MultiplierRep, SubgroupData, SubgroupRep, TwoCocycle};
use crate::numlin::{eigh, fro, identity, unitary_residual, zeros, CMatrix, Tolerances, C64};
use crate::report::Certificate;

/// y^ρ(g,ω) = ρ(s(ω)⁻¹ g s(g⁻¹ω)).
#[derive(Debug, Clone)]
pub struct WignerRotation {
    pub sub: SubgroupData,
    pub dim: usize,
    /// Indexed `[g][ω]`.
    pub table: Vec<Vec<CMatrix>>,
}

pub fn wigner_rotation(rho: &SubgroupRep) -> WignerRotation {
    let sub = rho.subgroup().clone();
    let g = sub.parent().clone();
    let table = g
        .elements()
        .map(|a| {
            (0..sub.omega_size())
                .map(|w| {
                    let back = sub.act(g.inv(a), w);
                    let h = g.mul(g.mul(g.inv(sub.section(w)), a), sub.section(back));
                    rho.get(h).clone()
                })
                .collect()
        })
        .collect();
    WignerRotation {
        dim: rho.dim(),
        sub,
        table,
    }
}

impl WignerRotation {
    pub fn get(&self, g: usize, omega: usize) -> &CMatrix {
        &self.table[g][omega]
    }

    /// y(e,ω) = I and y(gh,ω) = y(g,ω) y(h,g⁻¹ω), checked exhaustively.
    pub fn strictness(&self, tol: &Tolerances) -> Certificate {
        let g = self.sub.parent();
        let n = self.sub.omega_size();
        let mut cert = Certificate::new();
        let mut e_res = 0.0f64;
        for w in 0..n {
            e_res = e_res.max(fro(&(self.get(g.identity(), w) - identity(self.dim))));
        }
        cert.record("identity", e_res, tol.recon_fro);
        let mut c_res = 0.0f64;
        for a in g.elements() {
            for b in g.elements() {
                for w in 0..n {
                    let rhs = self.get(a, w) * self.get(b, self.sub.act(g.inv(a), w));
                    c_res = c_res.max(fro(&(self.get(g.mul(a, b), w) - rhs)));
                }
            }
        }
        cert.record("cocycle", c_res, tol.recon_fro);
        cert
    }

    /// (y_g ψ)(ω) = y(g,ω) ψ(g⁻¹ω) on L²(Ω) ⊗ M⁰, index ω·dim + i.
    pub fn induced(&self, tol: &Tolerances) -> Result<MultiplierRep> {
        let g = self.sub.parent();
        let n = self.sub.omega_size();
        let d = self.dim;
        let mats = g
            .elements()
            .map(|a| {
                let mut m = zeros(n * d, n * d);
                for w in 0..n {
                    let src = self.sub.act(g.inv(a), w);
                    m.view_mut((w * d, src * d), (d, d)).copy_from(self.get(a, w));
                }
                m
            })
            .collect();
        MultiplierRep::new(g.clone(), TwoCocycle::trivial(g.order()), mats, true, tol)
    }
}

/// The canonical system of imprimitivity of ρ, realized inside ℂ^{|G|·dim ρ}.
#[derive(Debug, Clone)]
pub struct CanonicalSystem {
    /// Orthonormal basis Q of 𝔎^ρ = {f : f(gh) = ρ(h)†f(g)}; rows indexed g·dim + i.
    pub basis: CMatrix,
    /// ϑ^ρ_g f = f(g⁻¹·) in the basis Q.
    pub theta: MultiplierRep,
    /// M^ρ({ω}) in the basis Q.
    pub projections: Vec<CMatrix>,
    /// (U′f)(ω) = y^ρ(g,ω) f(g), evaluated at g = s(ω), as a map 𝔎^ρ → L²(Ω) ⊗ M⁰.
    pub u_prime: CMatrix,
    pub wigner: WignerRotation,
    pub certificate: Certificate,
}

pub fn canonical_system(rho: &SubgroupRep, tol: &Tolerances) -> Result<CanonicalSystem> {
    let sub = rho.subgroup();
    let g = sub.parent();
    let d = rho.dim();
    let order = g.order();
    let big = order * d;
    let hsize = sub.order() as f64;

    // projection onto f(g) = ρ(h) f(gh)
    let mut p = zeros(big, big);
    for &h in sub.members() {
        for a in g.elements() {
            let mut view = p.view_mut((a * d, g.mul(a, h) * d), (d, d));
            view += rho.get(h) / C64::new(hsize, 0.0);
        }
    }
    let (vals, vecs) = eigh(&p);
    let keep: Vec<usize> = (0..big).filter(|&i| vals[i] > 0.5).collect();
    let expected = sub.omega_size() * d;
    if keep.len() != expected {
        return Err(Error::tolerance(
            "dimension of the induced space",
            (keep.len() as f64 - expected as f64).abs(),
            0.0,
        ));
    }
    let q = CMatrix::from_fn(big, keep.len(), |r, col| vecs[(r, keep[col])]);

    let theta_full = |a: usize| {
        let mut m = zeros(big, big);
        for x in g.elements() {
            m.view_mut((x * d, g.mul(g.inv(a), x) * d), (d, d)).copy_from(&identity(d));
        }
        m
    };
    let thetas: Vec<CMatrix> = g.elements().map(|a| q.adjoint() * theta_full(a) * &q).collect();
    let theta = MultiplierRep::new(g.clone(), TwoCocycle::trivial(order), thetas, true, tol)?;

    let projections: Vec<CMatrix> = (0..sub.omega_size())
        .map(|w| {
            let mut m = zeros(big, big);
            for &x in &sub.cosets()[w] {
                m.view_mut((x * d, x * d), (d, d)).copy_from(&identity(d));
            }
            q.adjoint() * m * &q
        })
        .collect();

    let wigner = wigner_rotation(rho);
    let mut eval = zeros(expected, big);
    for w in 0..sub.omega_size() {
        let s = sub.section(w);
        let y = wigner.get(s, w) * C64::new(hsize.sqrt(), 0.0);
        eval.view_mut((w * d, s * d), (d, d)).copy_from(&y);
    }
    let u_prime = eval * &q;

    let mut cert = Certificate::new();
    cert.extend("wigner", wigner.strictness(tol));
    let scale = (expected as f64).sqrt().max(1.0);
    cert.record("u_prime_unitary", unitary_residual(&u_prime), tol.unitary_fro * scale);
    let induced = wigner.induced(tol)?;
    let mut inter = 0.0f64;
    for a in g.elements() {
        inter = inter.max(fro(&(&u_prime * theta.get(a) - induced.get(a) * &u_prime)));
    }
    cert.record("u_prime_intertwines_reps", inter, tol.recon_fro * scale);
    let mut proj = 0.0f64;
    for (w, m) in projections.iter().enumerate() {
        let mut target = zeros(expected, expected);
        target.view_mut((w * d, w * d), (d, d)).copy_from(&identity(d));
        proj = proj.max(fro(&(&u_prime * m - target * &u_prime)));
    }
    cert.record("u_prime_intertwines_projections", proj, tol.recon_fro * scale);
    let certificate = cert.require()?;
    Ok(CanonicalSystem {
        basis: q,
        theta,
        projections,
        u_prime,
        wigner,
        certificate,
    })
}
