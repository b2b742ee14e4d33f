//! Random generators for covariant objects and a brute-force extremality oracle that
//! shares no code with the dilation-based tests.
#![allow(dead_code)]

use covkit::cpmaps::{CPMapSpec, CpSymmetry};
use covkit::cstar::{FiniteCStarAlgebra, ModuleSpace};
use covkit::fingroup::{FiniteGroup, GroupAction, IrrepSet, MultiplierRep, SubgroupData, TwoCocycle};
use covkit::instruments::{Covariance, InstrumentSpec, ObservableSpec};
use covkit::kernels::CovariantKernelSpec;
use covkit::numlin::{direct_sum, eigh, fro, identity, spectral_norm, zeros, CMatrix, Tolerances, C64};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(r, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_matrix(rng, n, n).qr().q()
}

pub fn random_phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Density matrix of the given rank.
pub fn random_state(rng: &mut impl Rng, n: usize, rank: usize) -> CMatrix {
    let a = random_matrix(rng, n, rank);
    let m = &a * a.adjoint();
    let t = m.trace();
    m / t
}

pub fn named_group(name: &str) -> FiniteGroup {
    match name {
        "Z2" => FiniteGroup::cyclic(2),
        "Z3" => FiniteGroup::cyclic(3),
        "Z4" => FiniteGroup::cyclic(4),
        "S3" => FiniteGroup::symmetric(3).unwrap(),
        "D4" => FiniteGroup::dihedral(4),
        other => panic!("unknown group {other}"),
    }
}

/// A random direct sum of irreps, in a random basis, with random coboundary phases when
/// `phased` is set.
pub fn random_rep(rng: &mut impl Rng, irreps: &IrrepSet, dim: usize, phased: bool) -> MultiplierRep {
    let g = &irreps.group;
    let mut chosen = vec![];
    let mut left = dim;
    while left > 0 {
        let fits: Vec<_> = irreps.irreps.iter().filter(|t| t.dim <= left).collect();
        let t = *fits.choose(rng).unwrap();
        left -= t.dim;
        chosen.push(t);
    }
    let q = random_unitary(rng, dim);
    let mats: Vec<CMatrix> = g
        .elements()
        .map(|a| {
            let parts: Vec<CMatrix> = chosen.iter().map(|t| t.matrices[a].clone()).collect();
            &q * direct_sum(&parts) * q.adjoint()
        })
        .collect();
    let rep = MultiplierRep::new(g.clone(), TwoCocycle::trivial(g.order()), mats, true, &tol()).unwrap();
    if phased {
        let mut phases: Vec<C64> = g.elements().map(|_| random_phase(rng)).collect();
        phases[g.identity()] = c(1.0);
        rep.phased(&phases)
    } else {
        rep
    }
}

/// A covariant kernel: X = G/H (|X| ≤ 4) possibly with one extra fixed point,
/// α(g,x) = λ(g)c(gx)/c(x), and blocks twirled from a random Gram matrix.
pub fn random_kernel(rng: &mut impl Rng, irreps: &IrrepSet) -> CovariantKernelSpec {
    let g = irreps.group.clone();
    let order = g.order();
    let subs: Vec<Vec<usize>> = g.subgroups().into_iter().filter(|h| order / h.len() <= 4).collect();
    let sub = SubgroupData::new(g.clone(), subs.choose(rng).unwrap()).unwrap();
    let base = sub.omega_size();
    let extra = base < 4 && rng.gen_bool(0.5);
    let nx = base + usize::from(extra);
    let table: Vec<Vec<usize>> = g
        .elements()
        .map(|a| (0..nx).map(|x| if x < base { sub.act(a, x) } else { x }).collect())
        .collect();
    let action = GroupAction::new(g.clone(), &table).unwrap();
    let nv = rng.gen_range(1..=3);
    let u = { let phased = rng.gen_bool(0.5); random_rep(rng, irreps, nv, phased) };
    let mut lambda: Vec<C64> = g.elements().map(|_| random_phase(rng)).collect();
    lambda[g.identity()] = c(1.0);
    let cx: Vec<C64> = (0..nx).map(|_| random_phase(rng)).collect();
    let alpha: Vec<Vec<C64>> = g
        .elements()
        .map(|a| (0..nx).map(|x| lambda[a] * cx[action.act(a, x)] / cx[x]).collect())
        .collect();
    let conj_lambda: Vec<C64> = lambda.iter().map(|z| z.conj()).collect();
    let sigma = TwoCocycle::coboundary(&g, &conj_lambda);
    let n0 = rng.gen_range(1..=nx * nv);
    let f0 = random_matrix(rng, n0, nx * nv);
    let t0 = f0.adjoint() * &f0;
    let mut t = zeros(nx * nv, nx * nv);
    for a in g.elements() {
        let mut d = zeros(nx * nv, nx * nv);
        for x in 0..nx {
            let blk = u.get(a) * alpha[a][x].conj();
            d.view_mut((action.act(a, x) * nv, x * nv), (nv, nv)).copy_from(&blk);
        }
        t += &d * &t0 * d.adjoint();
    }
    t /= c(order as f64);
    let blocks = (0..nx)
        .map(|x| (0..nx).map(|y| t.view((x * nv, y * nv), (nv, nv)).into_owned()).collect())
        .collect();
    CovariantKernelSpec {
        action,
        alpha,
        sigma,
        u,
        k: rng.gen_range(1..=2),
        blocks,
    }
}

/// Implementer on the ambient space of an algebra with blocks of the given sizes.
pub fn random_implementer(rng: &mut impl Rng, irreps: &IrrepSet, blocks: &[usize]) -> MultiplierRep {
    let parts: Vec<MultiplierRep> = blocks.iter().map(|&n| random_rep(rng, irreps, n, false)).collect();
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = acc.direct_sum(p).unwrap();
    }
    acc
}

/// S(b) = (1/|G|) Σ_g U(g)† S₀(u_g b u_g†) U(g) for a random Kraus map S₀.
pub fn random_cp_map(rng: &mut impl Rng, irreps: &IrrepSet, blocks: &[usize], nv: usize) -> CPMapSpec {
    let alg = FiniteCStarAlgebra::new(blocks.to_vec()).unwrap();
    let imp = random_implementer(rng, irreps, blocks);
    let u = { let phased = rng.gen_bool(0.5); random_rep(rng, irreps, nv, phased) };
    let nk = rng.gen_range(1..=3);
    let kraus: Vec<CMatrix> = (0..nk).map(|_| random_matrix(rng, alg.size(), nv)).collect();
    let g = irreps.group.clone();
    let s0 = |b: &CMatrix| kraus.iter().fold(zeros(nv, nv), |acc, a| acc + a.adjoint() * b * a);
    CPMapSpec::from_fn(alg, ModuleSpace::new(1, nv), |b| {
        let mut out = zeros(nv, nv);
        for a in g.elements() {
            let moved = imp.get(a) * b * imp.get(a).adjoint();
            out += u.get(a).adjoint() * s0(&moved) * u.get(a);
        }
        out / c(g.order() as f64)
    })
    .unwrap()
    .with_symmetry(CpSymmetry {
        u_v: u,
        implementer: imp,
    })
    .unwrap()
}

/// Hermitian T^{-1/2}.
pub fn inv_sqrt(t: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(t);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| c(1.0 / l.sqrt())),
    ));
    &vecs * d * vecs.adjoint()
}

/// Γ_ω(b) = U(s)Φ₀(u_s†bu_s)U(s)†, with Φ₀ an H-twirled random Kraus map rescaled so that
/// the Γ_ω(I) sum to I.
pub fn random_instrument(rng: &mut impl Rng, irreps: &IrrepSet) -> InstrumentSpec {
    let g = irreps.group.clone();
    let subs = g.subgroups();
    let sub = SubgroupData::new(g.clone(), subs.choose(rng).unwrap()).unwrap();
    let kd = rng.gen_range(1..=3);
    let vd = rng.gen_range(1..=3);
    let u_k = { let phased = rng.gen_bool(0.5); random_rep(rng, irreps, kd, phased) };
    let u_v = { let phased = rng.gen_bool(0.5); random_rep(rng, irreps, vd, phased) };
    // enough Kraus operators that the twirled Gram matrix is invertible
    let nk = rng.gen_range(vd.div_ceil(kd)..=3);
    let kraus: Vec<CMatrix> = (0..nk).map(|_| random_matrix(rng, kd, vd)).collect();
    let mut ops = vec![];
    for &h in sub.members() {
        for a in &kraus {
            ops.push(u_k.get(h) * a * u_v.get(h).adjoint() / c((sub.order() as f64).sqrt()));
        }
    }
    let cov = Covariance::new(sub.clone(), u_v.clone()).unwrap();
    let gram = ops.iter().fold(zeros(vd, vd), |acc, a| acc + a.adjoint() * a);
    let mut t = zeros(vd, vd);
    for w in 0..sub.omega_size() {
        let s = cov.u_at(w);
        t += s * &gram * s.adjoint();
    }
    let r = inv_sqrt(&t);
    let ops: Vec<CMatrix> = ops.iter().map(|a| a * &r).collect();
    let phi0 = |b: &CMatrix| ops.iter().fold(zeros(vd, vd), |acc, a| acc + a.adjoint() * b * a);
    InstrumentSpec::from_fn(kd, cov.clone(), u_k.clone(), |w, b| {
        let s = sub.section(w);
        let us = u_k.get(s);
        u_v.get(s) * phi0(&(us.adjoint() * b * us)) * u_v.get(s).adjoint()
    })
    .unwrap()
}

/// M_ω = U(s)M₀U(s)† rescaled to sum to I, with M₀ an H-twirled random PSD matrix of the
/// given rank.
pub fn random_observable(rng: &mut impl Rng, irreps: &IrrepSet, rank: usize) -> ObservableSpec {
    let g = irreps.group.clone();
    let subs = g.subgroups();
    let sub = SubgroupData::new(g.clone(), subs.choose(rng).unwrap()).unwrap();
    let vd = rng.gen_range(1..=3);
    let u = { let phased = rng.gen_bool(0.5); random_rep(rng, irreps, vd, phased) };
    let cov = Covariance::new(sub, u).unwrap();
    // widen the seed until its orbit spans V, otherwise T is singular
    let mut k = rank.min(vd).max(1);
    let (m0, t) = loop {
        let a = random_matrix(rng, vd, k);
        let p0 = &a * a.adjoint();
        let mut m0 = zeros(vd, vd);
        for &h in cov.sub.members() {
            m0 += cov.u.get(h) * &p0 * cov.u.get(h).adjoint();
        }
        let mut t = zeros(vd, vd);
        for w in 0..cov.omega_size() {
            t += cov.u_at(w) * &m0 * cov.u_at(w).adjoint();
        }
        let (vals, _) = eigh(&t);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        if lo > 1e-3 * hi || k == vd {
            break (m0, t);
        }
        k += 1;
    };
    let r = inv_sqrt(&t);
    let m0 = &r * m0 * &r;
    let effects = (0..cov.omega_size())
        .map(|w| cov.u_at(w) * &m0 * cov.u_at(w).adjoint())
        .collect();
    ObservableSpec::new(effects, cov).unwrap()
}

pub fn flip_observable(p: f64) -> ObservableSpec {
    let z2 = FiniteGroup::cyclic(2);
    let x = pauli_x();
    let u = MultiplierRep::from_matrices(z2.clone(), vec![identity(2), x], &tol()).unwrap();
    let cov = Covariance::new(SubgroupData::trivial_subgroup(z2), u).unwrap();
    let m0 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(p), c(1.0 - p)]));
    let m1 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0 - p), c(p)]));
    ObservableSpec::new(vec![m0, m1], cov).unwrap()
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// S(b) = w·b + (1−w)·XbX on M_2, covariant under Z on both sides.
pub fn unitary_mixture(w: f64) -> CPMapSpec {
    let z2 = FiniteGroup::cyclic(2);
    let zrep = MultiplierRep::from_matrices(z2, vec![identity(2), pauli_z()], &tol()).unwrap();
    let x = pauli_x();
    CPMapSpec::from_fn(FiniteCStarAlgebra::full(2), ModuleSpace::new(1, 2), |b| {
        b * c(w) + &x * b * &x * c(1.0 - w)
    })
    .unwrap()
    .with_symmetry(CpSymmetry {
        u_v: zrep.clone(),
        implementer: zrep,
    })
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct OracleVerdict {
    pub extreme: bool,
    pub directions: usize,
    /// For a non-extreme point: x ± εΔ are both PSD.
    pub split_psd: bool,
}

/// x is extreme in {y ≥ 0 : y − x ∈ L} iff no nonzero Hermitian Δ ∈ L has range(Δ) ⊆ range(x).
/// L is given by the real-linear residual map, which must vanish exactly on L.
pub fn psd_face_oracle(x: &CMatrix, residual: &dyn Fn(&CMatrix) -> Vec<C64>) -> OracleVerdict {
    let (vals, vecs) = eigh(x);
    let top = vals.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-9 * top).collect();
    let r = keep.len();
    let p = CMatrix::from_fn(x.nrows(), r, |i, j| vecs[(i, keep[j])]);
    let mut basis = vec![];
    for a in 0..r {
        for b in a..r {
            let mut m = zeros(r, r);
            m[(a, b)] = c(1.0);
            m[(b, a)] = c(1.0);
            basis.push(m);
            if a != b {
                let mut m = zeros(r, r);
                m[(a, b)] = C64::new(0.0, 1.0);
                m[(b, a)] = C64::new(0.0, -1.0);
                basis.push(m);
            }
        }
    }
    if basis.is_empty() {
        return OracleVerdict {
            extreme: true,
            directions: 0,
            split_psd: false,
        };
    }
    let deltas: Vec<CMatrix> = basis.iter().map(|h| &p * h * p.adjoint()).collect();
    let cols: Vec<Vec<C64>> = deltas.iter().map(|d| residual(d)).collect();
    let m = cols[0].len();
    let nb = basis.len();
    let rows = (2 * m).max(nb);
    let mut a = DMatrix::<f64>::zeros(rows, nb);
    for (k, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            a[(2 * i, k)] = z.re;
            a[(2 * i + 1, k)] = z.im;
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let null: Vec<usize> = (0..nb).filter(|&i| svd.singular_values[i] <= 1e-8 * smax).collect();
    if null.is_empty() {
        return OracleVerdict {
            extreme: true,
            directions: 0,
            split_psd: false,
        };
    }
    let row = null[0];
    let mut delta = zeros(x.nrows(), x.ncols());
    for k in 0..nb {
        delta += &deltas[k] * c(vt[(row, k)]);
    }
    let lmin = keep.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min);
    let eps = 0.5 * lmin / spectral_norm(&delta);
    let psd = |m: CMatrix| eigh(&m).0.last().copied().unwrap_or(0.0) >= -1e-10;
    let split_psd = psd(x + &delta * c(eps)) && psd(x - &delta * c(eps));
    OracleVerdict {
        extreme: false,
        directions: null.len(),
        split_psd,
    }
}

fn push_all(out: &mut Vec<C64>, m: &CMatrix) {
    out.extend(m.iter().copied());
}

/// Oracle for covariant observables: x = ⊕M_ω, directions covariant with ΣΔ_ω = 0.
pub fn observable_oracle(spec: &ObservableSpec) -> OracleVerdict {
    let n = spec.effects.len();
    let v = spec.effects[0].nrows();
    let x = direct_sum(&spec.effects);
    let sub = &spec.covariance.sub;
    let u = &spec.covariance.u;
    let residual = |d: &CMatrix| {
        let blk = |i: usize, j: usize| d.view((i * v, j * v), (v, v)).into_owned();
        let mut out = vec![];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    push_all(&mut out, &blk(i, j));
                }
            }
        }
        let mut sum = zeros(v, v);
        for i in 0..n {
            sum += blk(i, i);
        }
        push_all(&mut out, &sum);
        for g in sub.parent().elements() {
            for w in 0..n {
                let r = u.get(g) * blk(w, w) * u.get(g).adjoint() - blk(sub.act(g, w), sub.act(g, w));
                push_all(&mut out, &r);
            }
        }
        out
    };
    psd_face_oracle(&x, &residual)
}

/// S_Δ(b) for a Choi-shaped Δ over the algebra's ambient positions.
fn choi_apply(d: &CMatrix, alg: &FiniteCStarAlgebra, nv: usize, b: &CMatrix) -> CMatrix {
    let mut out = zeros(nv, nv);
    for u in 0..alg.dim() {
        let (r, col) = alg.unit_position(u);
        let z = b[(r, col)];
        if z != c(0.0) {
            out += d.view((r * nv, col * nv), (nv, nv)) * z;
        }
    }
    out
}

/// Oracle for covariant CP maps with a fixed unit value: x = Choi matrix, directions are
/// covariant Hermitian Choi deltas supported on the algebra with Δ(1) = 0.
pub fn cp_oracle(spec: &CPMapSpec) -> OracleVerdict {
    let alg = spec.algebra.clone();
    let nv = spec.n_v();
    let size = alg.size();
    let x = spec.choi();
    let sym = spec.symmetry.clone();
    let mut inside = vec![vec![false; size]; size];
    for u in 0..alg.dim() {
        let (r, col) = alg.unit_position(u);
        inside[r][col] = true;
    }
    let residual = |d: &CMatrix| {
        let mut out = vec![];
        for r in 0..size {
            for col in 0..size {
                if !inside[r][col] {
                    push_all(&mut out, &d.view((r * nv, col * nv), (nv, nv)).into_owned());
                }
            }
        }
        push_all(&mut out, &choi_apply(d, &alg, nv, &identity(size)));
        if let Some(s) = &sym {
            for g in s.u_v.group().elements() {
                let ug = s.implementer.get(g);
                for u in 0..alg.dim() {
                    let e = alg.unit_matrix(u);
                    let lhs = choi_apply(d, &alg, nv, &(ug * &e * ug.adjoint()));
                    let rhs = s.u_v.get(g) * choi_apply(d, &alg, nv, &e) * s.u_v.get(g).adjoint();
                    push_all(&mut out, &(lhs - rhs));
                }
            }
        }
        out
    };
    psd_face_oracle(&x, &residual)
}

/// Largest Frobenius distance between paired matrices.
pub fn max_dist(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| fro(&(x - y))).fold(0.0, f64::max)
}
