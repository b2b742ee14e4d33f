use super::group::{FiniteGroup, GroupAction, SubgroupData};
use crate::error::{Error, Result};
use crate::numlin::{c, direct_sum, fro, identity, kron, unitary_residual, zeros, CMatrix, Tolerances, C64, ONE};

const COCYCLE_TOL: f64 = 1e-9;

/// A 𝕋-valued 2-cocycle σ(g,h) on a finite group.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCocycle {
    order: usize,
    values: Vec<C64>,
}

impl TwoCocycle {
    pub fn trivial(order: usize) -> Self {
        TwoCocycle {
            order,
            values: vec![ONE; order * order],
        }
    }

    pub fn from_fn(order: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut values = Vec::with_capacity(order * order);
        for g in 0..order {
            for h in 0..order {
                values.push(f(g, h));
            }
        }
        TwoCocycle { order, values }
    }

    pub fn from_table(table: &[Vec<C64>]) -> Result<Self> {
        let n = table.len();
        if table.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("cocycle table must be square"));
        }
        Ok(Self::from_fn(n, |g, h| table[g][h]))
    }

    /// σ(g,h) = c(g)c(h)/c(gh), the cocycle picked up by g ↦ c(g)U(g).
    pub fn coboundary(group: &FiniteGroup, phases: &[C64]) -> Self {
        Self::from_fn(group.order(), |g, h| {
            phases[g] * phases[h] / phases[group.mul(g, h)]
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, g: usize, h: usize) -> C64 {
        self.values[g * self.order + h]
    }

    pub fn table(&self) -> Vec<Vec<C64>> {
        self.values.chunks(self.order.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn product(&self, other: &TwoCocycle) -> Self {
        Self::from_fn(self.order, |g, h| self.get(g, h) * other.get(g, h))
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.order, |g, h| self.get(g, h).conj())
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|v| (v - ONE).norm() < COCYCLE_TOL)
    }

    /// Checks normalization, unit modulus and σ(g,hk)σ(h,k) = σ(gh,k)σ(g,h) exhaustively.
    pub fn validate(&self, group: &FiniteGroup) -> Result<()> {
        let n = group.order();
        if self.order != n {
            return Err(Error::dim(format!(
                "cocycle has order {} but group has order {n}",
                self.order
            )));
        }
        for (i, v) in self.values.iter().enumerate() {
            if (v.norm() - 1.0).abs() > COCYCLE_TOL {
                return Err(Error::invalid(format!(
                    "cocycle value at ({}, {}) is not of unit modulus",
                    i / n,
                    i % n
                )));
            }
        }
        let e = group.identity();
        for g in 0..n {
            if (self.get(e, g) - ONE).norm() > COCYCLE_TOL || (self.get(g, e) - ONE).norm() > COCYCLE_TOL {
                return Err(Error::invalid(format!("cocycle not normalized at g={g}")));
            }
        }
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    let lhs = self.get(g, group.mul(h, k)) * self.get(h, k);
                    let rhs = self.get(group.mul(g, h), k) * self.get(g, h);
                    if (lhs - rhs).norm() > COCYCLE_TOL {
                        return Err(Error::invalid(format!(
                            "cocycle identity fails at (g={g}, h={h}, k={k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest m such that every value is an m-th root of unity, searching m ≤ max_order.
    pub fn root_order(&self, max_order: usize) -> Result<usize> {
        let mut m = 1usize;
        for v in &self.values {
            let k = (1..=max_order)
                .find(|&k| (v.powu(k as u32) - ONE).norm() < COCYCLE_TOL)
                .ok_or_else(|| {
                    Error::Domain(format!(
                        "cocycle value {v} is not a root of unity of order <= {max_order}; \
                         the central extension needs finite-order values"
                    ))
                })?;
            m = lcm(m, k);
        }
        Ok(m)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// A multiplier representation U(g)U(h) = σ(g,h)U(gh).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierRep {
    group: FiniteGroup,
    cocycle: TwoCocycle,
    dim: usize,
    matrices: Vec<CMatrix>,
    unitary: bool,
}

impl MultiplierRep {
    pub fn new(
        group: FiniteGroup,
        cocycle: TwoCocycle,
        matrices: Vec<CMatrix>,
        unitary: bool,
        tol: &Tolerances,
    ) -> Result<Self> {
        let dim = matrices.first().map_or(0, |m| m.nrows());
        let rep = MultiplierRep {
            group,
            cocycle,
            dim,
            matrices,
            unitary,
        };
        rep.validate(tol)?;
        Ok(rep)
    }

    /// Infers σ(g,h) from U(g)U(h)U(gh)⁻¹ and validates the result.
    pub fn from_matrices(group: FiniteGroup, matrices: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(Error::dim("need one matrix per group element"));
        }
        let dim = matrices[0].nrows();
        if dim == 0 {
            return Err(Error::dim("representation dimension must be positive"));
        }
        let cocycle = TwoCocycle::from_fn(group.order(), |g, h| {
            let p = &matrices[g] * &matrices[h] * matrices[group.mul(g, h)].adjoint();
            let z = p.trace() / c(dim as f64, 0.0);
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                ONE
            }
        });
        Self::new(group, cocycle, matrices, true, tol)
    }

    pub fn trivial(group: FiniteGroup, dim: usize) -> Self {
        let n = group.order();
        MultiplierRep {
            cocycle: TwoCocycle::trivial(n),
            matrices: vec![identity(dim); n],
            dim,
            group,
            unitary: true,
        }
    }

    /// Permutation representation e_x ↦ e_{g·x}.
    pub fn permutation(action: &GroupAction) -> Self {
        let n = action.set_size();
        let group = action.group().clone();
        let matrices = group
            .elements()
            .map(|g| {
                let mut m = zeros(n, n);
                for x in 0..n {
                    m[(action.act(g, x), x)] = ONE;
                }
                m
            })
            .collect();
        MultiplierRep {
            cocycle: TwoCocycle::trivial(group.order()),
            dim: n,
            group,
            matrices,
            unitary: true,
        }
    }

    /// Left regular representation (λ_g ψ)(g') = ψ(g⁻¹g').
    pub fn regular(group: &FiniteGroup) -> Self {
        Self::permutation(&GroupAction::regular(group.clone()))
    }

    /// g ↦ c(g)U(g); the cocycle changes by the coboundary of c.
    pub fn phased(&self, phases: &[C64]) -> Self {
        let matrices = self
            .matrices
            .iter()
            .zip(phases)
            .map(|(m, p)| m * *p)
            .collect();
        MultiplierRep {
            group: self.group.clone(),
            cocycle: self.cocycle.product(&TwoCocycle::coboundary(&self.group, phases)),
            dim: self.dim,
            matrices,
            unitary: self.unitary,
        }
    }

    /// g ↦ Q U(g) Q† for a unitary Q.
    pub fn conjugated(&self, q: &CMatrix) -> Self {
        MultiplierRep {
            matrices: self.matrices.iter().map(|m| q * m * q.adjoint()).collect(),
            ..self.clone()
        }
    }

    pub fn direct_sum(&self, other: &MultiplierRep) -> Result<Self> {
        if self.cocycle.table().iter().flatten().zip(other.cocycle.table().iter().flatten())
            .any(|(a, b)| (a - b).norm() > COCYCLE_TOL)
        {
            return Err(Error::invalid("direct sum needs equal cocycles"));
        }
        Ok(MultiplierRep {
            group: self.group.clone(),
            cocycle: self.cocycle.clone(),
            dim: self.dim + other.dim,
            matrices: self
                .matrices
                .iter()
                .zip(&other.matrices)
                .map(|(a, b)| direct_sum(&[a.clone(), b.clone()]))
                .collect(),
            unitary: self.unitary && other.unitary,
        })
    }

    pub fn tensor(&self, other: &MultiplierRep) -> Self {
        MultiplierRep {
            group: self.group.clone(),
            cocycle: self.cocycle.product(&other.cocycle),
            dim: self.dim * other.dim,
            matrices: self.matrices.iter().zip(&other.matrices).map(|(a, b)| kron(a, b)).collect(),
            unitary: self.unitary && other.unitary,
        }
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn cocycle(&self) -> &TwoCocycle {
        &self.cocycle
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, g: usize) -> &CMatrix {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Checks U(e) = I, U(g)U(h) = σ(g,h)U(gh) and unitarity (when flagged) exhaustively.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let n = self.group.order();
        if self.matrices.len() != n {
            return Err(Error::dim("need one matrix per group element"));
        }
        if self.matrices.iter().any(|m| m.shape() != (self.dim, self.dim)) {
            return Err(Error::dim("representation matrices differ in shape"));
        }
        self.cocycle.validate(&self.group)?;
        let scale = (self.dim as f64).sqrt().max(1.0);
        let e = self.group.identity();
        let r = fro(&(&self.matrices[e] - identity(self.dim)));
        if r > tol.recon_fro * scale {
            return Err(Error::tolerance("U(e) = I", r, tol.recon_fro * scale));
        }
        if self.unitary {
            for (g, m) in self.matrices.iter().enumerate() {
                let r = unitary_residual(m);
                if r > tol.unitary_fro * scale {
                    return Err(Error::tolerance(format!("unitarity of U({g})"), r, tol.unitary_fro * scale));
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                let lhs = &self.matrices[g] * &self.matrices[h];
                let rhs = &self.matrices[self.group.mul(g, h)] * self.cocycle.get(g, h);
                let r = fro(&(lhs - rhs));
                let scale = fro(&self.matrices[g]) * fro(&self.matrices[h]) / scale;
                if r > tol.recon_fro * scale.max(1.0) {
                    return Err(Error::tolerance(
                        format!("multiplier relation at (g={g}, h={h})"),
                        r,
                        tol.recon_fro * scale.max(1.0),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An ordinary unitary representation of a subgroup H ≤ G, indexed by G's elements.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupRep {
    sub: SubgroupData,
    matrices: Vec<CMatrix>,
}

impl SubgroupRep {
    /// `matrices[i]` is ρ of the i-th member of H (in sorted member order).
    pub fn new(sub: SubgroupData, matrices: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if matrices.len() != sub.order() {
            return Err(Error::dim("need one matrix per subgroup element"));
        }
        let r = SubgroupRep { sub, matrices };
        r.validate(tol)?;
        Ok(r)
    }

    pub fn trivial(sub: SubgroupData, dim: usize) -> Self {
        let n = sub.order();
        SubgroupRep {
            sub,
            matrices: vec![identity(dim); n],
        }
    }

    /// Restriction of an ordinary part of `rep` to H; requires σ to be trivial on H×H.
    pub fn restrict(rep: &MultiplierRep, sub: SubgroupData, tol: &Tolerances) -> Result<Self> {
        for &a in sub.members() {
            for &b in sub.members() {
                if (rep.cocycle().get(a, b) - ONE).norm() > COCYCLE_TOL {
                    return Err(Error::Domain(
                        "cocycle is not trivial on the subgroup".into(),
                    ));
                }
            }
        }
        let m = sub.members().iter().map(|&h| rep.get(h).clone()).collect();
        Self::new(sub, m, tol)
    }

    pub fn subgroup(&self) -> &SubgroupData {
        &self.sub
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    /// ρ(h) for a member h given by its index in G.
    pub fn get(&self, h: usize) -> &CMatrix {
        let i = self.sub.position(h).expect("element not in subgroup");
        &self.matrices[i]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let d = self.dim();
        let g = self.sub.parent();
        if self.matrices.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::dim("subgroup representation matrices differ in shape"));
        }
        let scale = (d as f64).sqrt().max(1.0);
        for (i, m) in self.matrices.iter().enumerate() {
            let r = unitary_residual(m);
            if r > tol.unitary_fro * scale {
                return Err(Error::tolerance(format!("unitarity of rho(h_{i})"), r, tol.unitary_fro * scale));
            }
        }
        let r = fro(&(self.get(g.identity()) - identity(d)));
        if r > tol.recon_fro * scale {
            return Err(Error::tolerance("rho(e) = I", r, tol.recon_fro * scale));
        }
        for &a in self.sub.members() {
            for &b in self.sub.members() {
                let r = fro(&(self.get(a) * self.get(b) - self.get(g.mul(a, b))));
                if r > tol.recon_fro * scale {
                    return Err(Error::tolerance(
                        format!("rho homomorphism at (h={a}, h'={b})"),
                        r,
                        tol.recon_fro * scale,
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The central extension G × Z_m of a multiplier representation, on which
/// (g,j) ↦ ζ^j U(g) is an ordinary representation (ζ = e^{2πi/m}).
#[derive(Debug, Clone)]
pub struct CentralExtension {
    pub group: FiniteGroup,
    pub m: usize,
    pub rep: MultiplierRep,
}

impl CentralExtension {
    /// Element (g, j) has index g·m + j.
    pub fn index(&self, g: usize, j: usize) -> usize {
        g * self.m + j
    }
}

pub fn central_extension(rep: &MultiplierRep, max_order: usize, tol: &Tolerances) -> Result<CentralExtension> {
    let g = rep.group();
    let m = rep.cocycle().root_order(max_order)?;
    let n = g.order();
    let two_pi = 2.0 * std::f64::consts::PI;
    let expo = |a: usize, b: usize| -> usize {
        let v = rep.cocycle().get(a, b);
        let k = (v.arg() / two_pi * m as f64).round() as i64;
        k.rem_euclid(m as i64) as usize
    };
    let table: Vec<Vec<usize>> = (0..n * m)
        .map(|x| {
            (0..n * m)
                .map(|y| {
                    let (a, j) = (x / m, x % m);
                    let (b, k) = (y / m, y % m);
                    g.mul(a, b) * m + (j + k + expo(a, b)) % m
                })
                .collect()
        })
        .collect();
    let ext = FiniteGroup::from_table(&table)?;
    let zeta = |j: usize| C64::from_polar(1.0, two_pi * j as f64 / m as f64);
    let matrices = (0..n * m).map(|x| rep.get(x / m) * zeta(x % m)).collect();
    let ord = MultiplierRep::new(ext.clone(), TwoCocycle::trivial(n * m), matrices, rep.is_unitary(), tol)?;
    Ok(CentralExtension { group: ext, m, rep: ord })
}
