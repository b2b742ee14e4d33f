//! Property tests. Each case draws a seed and builds its instance from a ChaCha stream, so
//! failures shrink to a reproducible seed.

mod common;

use common::*;
use covkit::cpmaps::{cp_extremal, kraus_extract, ksgns};
use covkit::cstar::ModuleSpace;
use covkit::fingroup::{heisenberg_rep, irrep_decompose, IrrepSet, SubgroupData, SubgroupRep};
use covkit::instruments::{
    b_from_instrument, check_b_family, decomposable_extract, instrument_from_b, lambda_from_observable, naimark,
    observable_extremal, observable_extremal_cp, observable_extremal_kernel, observable_from_lambda, phase_space,
    sample_many, outcome_probabilities, validate_instrument, validate_observable, wigner_rotation, DecomposableOp,
};
use covkit::kernels::{equivalence_unitary, kernel_extremal, kolmogorov_decompose, validate_kernel};
use covkit::numlin::{
    constrained_commutant, eigh, fro, identity, null_space, numerical_rank, psd_factor, spectral_norm, zeros,
    CMatrix,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn group_irreps(pick: usize) -> IrrepSet {
    let name = ["Z2", "Z3", "Z4", "S3", "D4"][pick % 5];
    IrrepSet::of_group(&named_group(name), 3, &tol()).unwrap()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn psd_factor_is_minimal(seed in any::<u64>(), n in 1usize..7, r in 1usize..7) {
        let mut rng = rng(seed);
        let a = random_state(&mut rng, n, r.min(n)) * c(3.0);
        let pf = psd_factor(&a, &tol()).unwrap();
        prop_assert!(fro(&(pf.f.adjoint() * &pf.f - &a)) <= 1e-8 * spectral_norm(&a).max(1.0));
        prop_assert_eq!(pf.rank, r.min(n));
        prop_assert_eq!(numerical_rank(&pf.f, &tol()), pf.rank);
    }

    #[test]
    fn null_space_complements_rank(seed in any::<u64>(), m in 1usize..8, n in 1usize..8, r in 1usize..8) {
        let mut rng = rng(seed);
        let r = r.min(m).min(n);
        let a = random_matrix(&mut rng, m, r) * random_matrix(&mut rng, r, n);
        let ns = null_space(&a, &tol());
        prop_assert_eq!(numerical_rank(&a, &tol()) + ns.ncols(), n);
        prop_assert!(fro(&(&a * &ns)) <= 1e-10 * fro(&a));
        prop_assert!(fro(&(ns.adjoint() * &ns - identity(ns.ncols()))) <= 1e-10);
    }

    #[test]
    fn hermitian_commutant_commutes(seed in any::<u64>(), pick in 0usize..5, dim in 1usize..5) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let u = random_rep(&mut rng, &irreps, dim, false);
        let basis = constrained_commutant(dim, u.matrices(), &[], true, &tol()).unwrap();
        prop_assert!(!basis.is_empty());
        for d in &basis {
            prop_assert!(fro(&(d - d.adjoint())) <= 1e-12 * fro(d));
            for a in u.matrices() {
                prop_assert!(fro(&(d * a - a * d)) <= 1e-9 * spectral_norm(d) * spectral_norm(a));
            }
        }
    }

    #[test]
    fn multiplier_inverse_relation(seed in any::<u64>(), pick in 0usize..5, dim in 1usize..5) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let u = random_rep(&mut rng, &irreps, dim, true);
        let g = u.group().clone();
        for a in g.elements() {
            let lhs = u.get(a) * u.get(g.inv(a));
            let rhs = identity(dim) * u.cocycle().get(a, g.inv(a));
            prop_assert!(fro(&(lhs - rhs)) <= 1e-8);
        }
    }

    #[test]
    fn irrep_decomposition_accounts_for_dimension(seed in any::<u64>(), pick in 0usize..5, dim in 1usize..6) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let u = random_rep(&mut rng, &irreps, dim, false);
        let dec = irrep_decompose(&u, seed, &tol()).unwrap();
        let total: usize = dec.blocks.iter().map(|b| b.irrep.dim * b.multiplicity).sum();
        prop_assert_eq!(total, dim);
        let projector_sum = dec
            .blocks
            .iter()
            .fold(zeros(dim, dim), |acc, b| acc + &b.columns * b.columns.adjoint());
        prop_assert!(fro(&(projector_sum - identity(dim))) <= 1e-8);
        prop_assert!(dec.residual() <= 1e-8);
    }

    #[test]
    fn heisenberg_square_integrability(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = rng(seed);
        let h = heisenberg_rep(d);
        let phi = random_matrix(&mut rng, d, 1);
        let psi = random_matrix(&mut rng, d, 1);
        let (phi, psi) = (&phi / c(phi.norm()), &psi / c(psi.norm()));
        let s: f64 = h.rep.matrices().iter().map(|w| (phi.adjoint() * w * &psi)[(0, 0)].norm_sqr()).sum();
        prop_assert!((s - d as f64).abs() <= 1e-10);
    }

    #[test]
    fn twirl_identity(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = rng(seed);
        let h = heisenberg_rep(d);
        let rho = random_matrix(&mut rng, d, d);
        let tw = h.rep.matrices().iter().fold(zeros(d, d), |acc, w| acc + w * &rho * w.adjoint());
        prop_assert!(fro(&(tw - identity(d) * (rho.trace() * c(d as f64)))) <= 1e-10 * fro(&rho).max(1.0) * d as f64);
    }

    #[test]
    fn module_inner_product(seed in any::<u64>(), k in 1usize..4, nv in 1usize..4) {
        let mut rng = rng(seed);
        let m = ModuleSpace::new(k, nv);
        let v = random_matrix(&mut rng, nv, k);
        let w = random_matrix(&mut rng, nv, k);
        let vw = m.inner(&v, &w).unwrap();
        prop_assert!(fro(&(vw.adjoint() - m.inner(&w, &v).unwrap())) <= 1e-14);
        prop_assert!((m.norm(&v).unwrap() - spectral_norm(&v)).abs() <= 1e-12);
    }

    #[test]
    fn wigner_rotation_is_strict(seed in any::<u64>(), pick in 0usize..5, dim in 1usize..4) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let g = irreps.group.clone();
        let subs = g.subgroups();
        let sub = SubgroupData::new(g.clone(), subs.choose(&mut rng).unwrap()).unwrap();
        let u = random_rep(&mut rng, &irreps, dim, false);
        let rho = SubgroupRep::restrict(&u, sub, &tol()).unwrap();
        let y = wigner_rotation(&rho);
        prop_assert!(y.strictness(&tol()).all_ok());
    }

    #[test]
    fn decomposable_round_trip(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut inv = vec![0; n];
        for (w, &t) in perm.iter().enumerate() {
            inv[t] = w;
        }
        let fibers: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let blocks: Vec<CMatrix> = (0..n).map(|w| random_matrix(&mut rng, fibers[w], fibers[inv[w]])).collect();
        let op = DecomposableOp::new(fibers.clone(), perm.clone(), blocks).unwrap();
        let back = decomposable_extract(&op.assemble(), &fibers, &perm, &tol()).unwrap();
        prop_assert_eq!(back, op);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn kernel_decomposition_is_consistent(seed in any::<u64>(), pick in 0usize..4) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let spec = random_kernel(&mut rng, &irreps);
        let d = kolmogorov_decompose(&spec, &tol()).unwrap();
        for x in 0..spec.x_size() {
            for y in 0..spec.x_size() {
                prop_assert!(fro(&(d.f[x].adjoint() * &d.f[y] - &spec.blocks[x][y])) <= 1e-8);
            }
        }
        // re-decomposing after a unitary change of the factor stays equivalent
        let q = random_unitary(&mut rng, d.n);
        let moved = d.conjugated(&q);
        let (w, _) = equivalence_unitary(&d, &moved, &tol()).unwrap();
        prop_assert!(fro(&(w - q)) <= 1e-8);
        let z: Vec<(usize, usize)> = (0..spec.x_size()).map(|x| (x, x)).collect();
        let e = kernel_extremal(&spec, &z, &d, &tol()).unwrap();
        if let Some((kp, km)) = e.split {
            prop_assert!(validate_kernel(&kp, &tol()).unwrap().ok());
            prop_assert!(validate_kernel(&km, &tol()).unwrap().ok());
            for &(x, y) in &z {
                let mid = (&kp.blocks[x][y] + &km.blocks[x][y]) * c(0.5);
                prop_assert!(fro(&(mid - &spec.blocks[x][y])) <= 1e-8);
                prop_assert!(fro(&(&kp.blocks[x][y] - &spec.blocks[x][y])) <= 1e-8);
            }
        }
    }

    #[test]
    fn cp_dilation_and_kraus(seed in any::<u64>(), pick in 0usize..3, nv in 1usize..4) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let n = rng.gen_range(2..=3);
        let spec = random_cp_map(&mut rng, &irreps, &[n], nv);
        let d = ksgns(&spec, &tol()).unwrap();
        prop_assert!(d.certificate.all_ok());
        let ops = kraus_extract(&spec, &d, &tol()).unwrap();
        prop_assert_eq!(ops.len(), spec.choi_rank(&tol()));
        let b = random_matrix(&mut rng, n, n);
        let s = spec.apply(&b, &tol()).unwrap();
        let k = ops.iter().fold(zeros(nv, nv), |acc, a| acc + a.adjoint() * &b * a);
        prop_assert!(fro(&(&s - k)) <= 1e-8 * fro(&s).max(1e-300));
        let e = cp_extremal(&spec, &d, &tol()).unwrap();
        if d.n <= 4 {
            prop_assert_eq!(e.extreme, cp_oracle(&spec).extreme);
        }
    }

    #[test]
    fn naimark_invariants(seed in any::<u64>(), pick in 0usize..5, rank in 1usize..3) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let spec = random_observable(&mut rng, &irreps, rank);
        let nd = naimark(&spec, &tol()).unwrap();
        prop_assert!(nd.certificate.all_ok());
        let v = spec.v_dim();
        prop_assert!(fro(&(nd.k.adjoint() * &nd.k - identity(v))) <= 1e-8);
        for (w, p) in nd.projections.iter().enumerate() {
            prop_assert!(fro(&(nd.k.adjoint() * p * &nd.k - &spec.effects[w])) <= 1e-8);
        }
        let g = spec.covariance.sub.parent().clone();
        for a in g.elements() {
            for b in g.elements() {
                let lhs = nd.y_rep.get(a) * nd.y_rep.get(b);
                let rhs = nd.y_rep.get(g.mul(a, b)) * nd.y_rep.cocycle().get(a, b);
                prop_assert!(fro(&(lhs - rhs)) <= 1e-8);
            }
        }
    }

    #[test]
    fn observable_paths_agree(seed in any::<u64>(), pick in 0usize..5, rank in 1usize..3) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let spec = random_observable(&mut rng, &irreps, rank);
        prop_assert!(validate_observable(&spec, &tol()).unwrap().ok());
        let kernel = observable_extremal_kernel(&spec, &tol()).unwrap();
        let cp = observable_extremal_cp(&spec, &tol()).unwrap();
        prop_assert_eq!(kernel, cp);
        prop_assert_eq!(kernel, observable_oracle(&spec).extreme);
        if spec.covariance.cocycle_trivial_on_sub() {
            let data = lambda_from_observable(&spec, seed, &tol()).unwrap();
            let back = observable_from_lambda(&data, &tol()).unwrap();
            prop_assert!(max_dist(&back.effects, &spec.effects) <= 1e-8);
            prop_assert_eq!(observable_extremal(&data, &tol()).unwrap().extreme, kernel);
        } else {
            prop_assert!(lambda_from_observable(&spec, seed, &tol()).is_err());
        }
    }

    #[test]
    fn instrument_b_round_trip(seed in any::<u64>(), pick in 0usize..5) {
        let mut rng = rng(seed);
        let irreps = group_irreps(pick);
        let spec = random_instrument(&mut rng, &irreps);
        prop_assert!(validate_instrument(&spec, &tol()).unwrap().ok());
        let data = b_from_instrument(&spec, &tol()).unwrap();
        // (Hinv) is implied by covariance, so it never fails on valid input
        prop_assert!(check_b_family(&data, &tol()).all_ok());
        let back = instrument_from_b(&data, &tol()).unwrap();
        prop_assert!(max_dist(&back.choi, &spec.choi) <= 1e-8);
        let again = b_from_instrument(&back, &tol()).unwrap();
        prop_assert!(max_dist(&instrument_from_b(&again, &tol()).unwrap().choi, &spec.choi) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(config(4))]

    #[test]
    fn sampler_chi_square(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let s = random_state(&mut rng, 2, 2);
        let (vals, vecs) = eigh(&s);
        let b: Vec<CMatrix> = (0..2)
            .map(|j| {
                let v = vecs.column(j).into_owned();
                &v * v.adjoint() * c((vals[j] / 2.0).sqrt())
            })
            .collect();
        let ps = phase_space(2, b, &tol()).unwrap();
        let rho = random_state(&mut rng, 2, 1);
        let p = outcome_probabilities(&ps.instrument, &rho, &tol()).unwrap();
        let n = 100_000;
        let draws = sample_many(&ps.instrument, &rho, n, seed, &tol()).unwrap();
        let mut counts = vec![0usize; p.len()];
        for d in &draws {
            counts[d.outcome] += 1;
        }
        let chi2: f64 = p
            .iter()
            .zip(&counts)
            .filter(|(&pi, _)| pi > 1e-12)
            .map(|(&pi, &k)| {
                let e = pi * n as f64;
                (k as f64 - e).powi(2) / e
            })
            .sum();
        // 3 degrees of freedom; 16.27 is the 0.1% quantile
        prop_assert!(chi2 < 16.27, "chi2 = {}", chi2);
    }
}
