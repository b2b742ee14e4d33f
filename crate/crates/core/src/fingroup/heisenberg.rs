use super::group::FiniteGroup;
use super::rep::{MultiplierRep, TwoCocycle};
use crate::numlin::{zeros, CMatrix, C64, ONE};

/// The discrete Weyl–Heisenberg system over Z_d × Z_d.
#[derive(Debug, Clone)]
pub struct Heisenberg {
    pub d: usize,
    /// Z_d × Z_d with (q, p) ↦ q·d + p.
    pub group: FiniteGroup,
    pub cocycle: TwoCocycle,
    /// W_0(q,p) = X^q Z^p.
    pub rep: MultiplierRep,
}

impl Heisenberg {
    pub fn index(&self, q: usize, p: usize) -> usize {
        (q % self.d) * self.d + p % self.d
    }
}

/// Shift (Xφ)(x) = φ(x+1), i.e. X e_j = e_{j-1}.
pub fn shift(d: usize) -> CMatrix {
    let mut x = zeros(d, d);
    for j in 0..d {
        x[(j, (j + 1) % d)] = ONE;
    }
    x
}

/// Clock Z = diag(ω^j), ω = e^{2πi/d}.
pub fn clock(d: usize) -> CMatrix {
    let mut z = zeros(d, d);
    for j in 0..d {
        z[(j, j)] = omega(d, j as i64);
    }
    z
}

fn omega(d: usize, k: i64) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k.rem_euclid(d as i64) as f64 / d as f64)
}

/// W_0(q,p) = X^q Z^p with σ((q,p),(q',p')) = ω^{−q'p}.
pub fn heisenberg_rep(d: usize) -> Heisenberg {
    assert!(d >= 1, "dimension must be positive");
    let zd = FiniteGroup::cyclic(d);
    let group = FiniteGroup::direct_product(&zd, &zd);
    let x = shift(d);
    let z = clock(d);
    let pow = |m: &CMatrix, k: usize| (0..k).fold(CMatrix::identity(d, d), |acc, _| acc * m);
    let matrices: Vec<CMatrix> = group.elements().map(|g| pow(&x, g / d) * pow(&z, g % d)).collect();
    let cocycle = TwoCocycle::from_fn(d * d, |g, h| {
        let p = (g % d) as i64;
        let q2 = (h / d) as i64;
        omega(d, -q2 * p)
    });
    let rep = MultiplierRep::new(group.clone(), cocycle.clone(), matrices, true, &Default::default())
        .expect("Weyl relations hold");
    Heisenberg {
        d,
        group,
        cocycle,
        rep,
    }
}
