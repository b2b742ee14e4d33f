//! Dense complex linear algebra: positivity, minimal factorizations, null spaces,
//! constrained commutants and least-squares definitions of linear maps.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Numerical thresholds. All are relative to the scale of the input they are applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub psd_eig: f64,
    /// Relative to the largest singular value.
    pub rank_rel: f64,
    pub unitary_fro: f64,
    pub recon_fro: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_eig: 1e-9,
            rank_rel: 1e-9,
            unitary_fro: 1e-8,
            recon_fro: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.psd_eig, self.rank_rel, self.unitary_fro, self.recon_fro];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::invalid("tolerances must be finite and strictly positive"))
        }
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Frobenius norm.
pub fn fro(a: &CMatrix) -> f64 {
    a.norm()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMatrix::from_fn(r, cols, |i, j| rows[i][j])
}

pub fn from_real(r: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_fn(r, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn diag(d: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_column_slice(d))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cl: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, cl);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share the row count `rows`.
pub fn hstack(rows: usize, blocks: &[CMatrix]) -> CMatrix {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut j = 0;
    for b in blocks {
        out.view_mut((0, j), (rows, b.ncols())).copy_from(b);
        j += b.ncols();
    }
    out
}

/// ‖A†A − I‖_F.
pub fn unitary_residual(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    fro(&(a.adjoint() * a - identity(a.nrows())))
}

/// ‖A − A†‖_F.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    fro(&(a - a.adjoint()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hermitian eigendecomposition of (A+A†)/2, eigenvalues in descending order.
///
/// Cyclic Jacobi. nalgebra's complex eigen and SVD routines lose accuracy (or stall) on
/// clustered spectra, which are the norm here since everything is group-averaged.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let mut h = (a + a.adjoint()).scale(0.5);
    let mut v = identity(n);
    let norm = fro(&h);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let g = h[(p, q)].norm();
                let floor = f64::EPSILON * (h[(p, p)].re * h[(q, q)].re).abs().sqrt().max(1e-3 * norm);
                if g == 0.0 || g <= floor {
                    continue;
                }
                rotated = true;
                let e = h[(p, q)] / g;
                let (cs, sn) = jacobi_angle(h[(p, p)].re, h[(q, q)].re, g);
                let eb = e.conj();
                rotate_columns(&mut h, p, q, cs, sn, eb);
                for k in 0..n {
                    let (x, y) = (h[(p, k)], h[(q, k)]);
                    h[(p, k)] = x * cs - e * y * sn;
                    h[(q, k)] = x * sn + e * y * cs;
                }
                h[(p, q)] = ZERO;
                h[(q, p)] = ZERO;
                rotate_columns(&mut v, p, q, cs, sn, eb);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| h[(j, j)].re.total_cmp(&h[(i, i)].re));
    let vals = order.iter().map(|&i| h[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    (vals, vecs)
}

/// Cosine and sine of the rotation zeroing the off-diagonal of [[α, g], [g, β]].
fn jacobi_angle(alpha: f64, beta: f64, g: f64) -> (f64, f64) {
    let tau = (beta - alpha) / (2.0 * g);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    (cs, cs * t)
}

/// X ← X·[[c, s], [−s·ē, c·ē]] on columns p, q.
fn rotate_columns<T: ComplexField<RealField = f64>>(x: &mut DMatrix<T>, p: usize, q: usize, cs: f64, sn: f64, eb: T) {
    let (c, s) = (T::from_real(cs), T::from_real(sn));
    for i in 0..x.nrows() {
        let (a, b) = (x[(i, p)].clone(), x[(i, q)].clone());
        x[(i, p)] = a.clone() * c.clone() - eb.clone() * b.clone() * s.clone();
        x[(i, q)] = a * s.clone() + eb.clone() * b * c.clone();
    }
}

/// One-sided (Hestenes) Jacobi: right singular vectors spanning the whole domain and the
/// singular values ‖A v‖, descending and padded by zeros.
fn jacobi_svd<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let (m, n) = a.shape();
    let (vals, v, _) = jacobi_rotate(if m > n { a.clone().qr().r() } else { a.clone() });
    (vals, v)
}

/// Orthogonalizes the columns of `w`; returns the column norms (descending), the
/// accumulated rotation V and the rotated columns W·V, both in that order.
fn jacobi_rotate<T: ComplexField<RealField = f64>>(mut w: DMatrix<T>) -> (Vec<f64>, DMatrix<T>, DMatrix<T>) {
    let n = w.ncols();
    let mut v = DMatrix::<T>::identity(n, n);
    let rows = w.nrows();
    let floor = f64::EPSILON * (rows.max(1) as f64);
    // pairs of numerically zero columns are left alone
    let absolute = 1e-30 * w.iter().map(|x| x.clone().modulus_squared()).sum::<f64>();
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, T::zero());
                for i in 0..rows {
                    let (x, y) = (w[(i, p)].clone(), w[(i, q)].clone());
                    alpha += x.clone().modulus_squared();
                    beta += y.clone().modulus_squared();
                    gamma += x.conjugate() * y;
                }
                let g = gamma.clone().modulus();
                if g <= absolute || g <= floor * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let eb = (gamma / T::from_real(g)).conjugate();
                let (cs, sn) = jacobi_angle(alpha, beta, g);
                rotate_columns(&mut w, p, q, cs, sn, eb.clone());
                rotate_columns(&mut v, p, q, cs, sn, eb);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let vals = order.iter().map(|&i| norms[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, col| v[(r, order[col])].clone());
    let cols = DMatrix::from_fn(w.nrows(), n, |r, col| w[(r, order[col])].clone());
    (vals, vecs, cols)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd_values(a).first().copied().unwrap_or(0.0)
}

fn svd_values(a: &CMatrix) -> Vec<f64> {
    let k = a.nrows().min(a.ncols());
    jacobi_svd(a).0.into_iter().take(k).collect()
}


fn check_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

fn scale_of(a: &CMatrix) -> f64 {
    spectral_norm(a).max(1.0)
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    check_square(a, "matrix")?;
    Ok(eigh(a).0.last().copied().unwrap_or(0.0))
}

/// True iff `a` is Hermitian within tolerance and its spectrum is bounded below by
/// `-psd_eig * max(1, ‖a‖)`.
pub fn psd_check(a: &CMatrix, tol: &Tolerances) -> Result<bool> {
    check_square(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(true);
    }
    let scale = scale_of(a);
    if hermitian_residual(a) > tol.psd_eig * scale {
        return Ok(false);
    }
    Ok(min_eigenvalue(a)? >= -tol.psd_eig * scale)
}

/// Minimal factorization `A = F†F`, F of shape `rank × n` with full row rank.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub rank: usize,
    pub f: CMatrix,
}

pub fn psd_factor(a: &CMatrix, tol: &Tolerances) -> Result<PsdFactor> {
    check_square(a, "matrix")?;
    let n = a.nrows();
    let scale = scale_of(a);
    if hermitian_residual(a) > tol.psd_eig * scale {
        return Err(Error::invalid("matrix is not Hermitian"));
    }
    let (vals, vecs) = eigh(a);
    if let Some(&m) = vals.last() {
        if m < -tol.psd_eig * scale {
            return Err(Error::NotPositive { min_eig: m });
        }
    }
    let cut = tol.psd_eig * scale;
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
    let mut f = zeros(keep.len(), n);
    for (r, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for col in 0..n {
            f[(r, col)] = vecs[(col, i)].conj() * s;
        }
    }
    let rank = keep.len();
    let resid = fro(&(f.adjoint() * &f - a));
    if resid > tol.recon_fro * scale {
        return Err(Error::tolerance("psd_factor reconstruction", resid, tol.recon_fro * scale));
    }
    Ok(PsdFactor { rank, f })
}

/// Square root of a PSD matrix (negative round-off clamped).
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    spectral_fn(a, |x| x.max(0.0).sqrt())
}

/// Applies `f` to the eigenvalues of the Hermitian part of `a`.
pub fn spectral_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(a);
    let d: Vec<C64> = vals.iter().map(|&x| c(f(x), 0.0)).collect();
    &vecs * diag(&d) * vecs.adjoint()
}

/// Number of singular values above `rank_rel * σ_max`.
pub fn numerical_rank(a: &CMatrix, tol: &Tolerances) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = svd_values(a);
    let cut = tol.rank_rel * s[0];
    if s[0] == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis (as columns) of the numerical kernel of `a`.
pub fn null_space(a: &CMatrix, tol: &Tolerances) -> CMatrix {
    let n = a.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if a.nrows() == 0 {
        return identity(n);
    }
    let (s, v) = jacobi_svd(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = tol.rank_rel * smax;
    let cols: Vec<usize> = (0..n).filter(|&i| smax == 0.0 || s[i] <= cut).collect();
    CMatrix::from_fn(n, cols.len(), |r, col| v[(r, cols[col])])
}

/// Real analogue of [`null_space`].
pub fn real_null_space(a: &RMatrix, tol: &Tolerances) -> RMatrix {
    let (m, n) = a.shape();
    if n == 0 {
        return RMatrix::zeros(0, 0);
    }
    if m == 0 {
        return RMatrix::identity(n, n);
    }
    let (s, v) = jacobi_svd(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = tol.rank_rel * smax;
    let cols: Vec<usize> = (0..n).filter(|&i| smax == 0.0 || s[i] <= cut).collect();
    RMatrix::from_fn(n, cols.len(), |r, col| v[(r, cols[col])])
}

/// Frobenius-orthonormal real basis of the n×n Hermitian matrices.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a..n {
            if a == b {
                let mut m = zeros(n, n);
                m[(a, a)] = ONE;
                out.push(m);
            } else {
                let mut re = zeros(n, n);
                re[(a, b)] = c(h, 0.0);
                re[(b, a)] = c(h, 0.0);
                out.push(re);
                let mut im = zeros(n, n);
                im[(a, b)] = c(0.0, h);
                im[(b, a)] = c(0.0, -h);
                out.push(im);
            }
        }
    }
    out
}

/// tr(C†D) = Σ conj(C_ij) D_ij.
pub fn frob_inner(cm: &CMatrix, d: &CMatrix) -> C64 {
    cm.iter().zip(d.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Basis of `{D : [D,A_i] = 0, tr(C_j† D) = 0}` (Hermitian D only if requested).
///
/// The returned matrices are Frobenius-orthonormal; over the reals when
/// `hermitian_only` is set.
pub fn constrained_commutant(
    n: usize,
    generators: &[CMatrix],
    constraints: &[CMatrix],
    hermitian_only: bool,
    tol: &Tolerances,
) -> Result<Vec<CMatrix>> {
    for g in generators.iter().chain(constraints) {
        if g.shape() != (n, n) {
            return Err(Error::dim(format!(
                "expected {n}x{n} generator/constraint, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let basis: Vec<CMatrix> = if hermitian_only {
        hermitian_basis(n)
    } else {
        (0..n * n)
            .map(|k| {
                let mut m = zeros(n, n);
                m[(k % n, k / n)] = ONE;
                m
            })
            .collect()
    };
    let gens: Vec<CMatrix> = generators
        .iter()
        .filter(|g| fro(g) > 0.0)
        .map(|g| g.unscale(fro(g)))
        .collect();
    let cons: Vec<CMatrix> = constraints
        .iter()
        .filter(|g| fro(g) > 0.0)
        .map(|g| g.unscale(fro(g)))
        .collect();
    let rows = gens.len() * n * n + cons.len();
    let mut m = zeros(rows, basis.len());
    for (k, b) in basis.iter().enumerate() {
        let mut r = 0;
        for g in &gens {
            let cm = commutator(b, g);
            for z in cm.iter() {
                m[(r, k)] = *z;
                r += 1;
            }
        }
        for cj in &cons {
            m[(r, k)] = frob_inner(cj, b);
            r += 1;
        }
    }
    let combine = |coef: &dyn Fn(usize) -> C64| -> CMatrix {
        let mut d = zeros(n, n);
        for (k, b) in basis.iter().enumerate() {
            d += b * coef(k);
        }
        d
    };
    if hermitian_only {
        let mut rm = RMatrix::zeros(2 * rows, basis.len());
        for i in 0..rows {
            for k in 0..basis.len() {
                rm[(i, k)] = m[(i, k)].re;
                rm[(rows + i, k)] = m[(i, k)].im;
            }
        }
        let ns = real_null_space(&rm, tol);
        Ok((0..ns.ncols())
            .map(|col| {
                let d = combine(&|k| c(ns[(k, col)], 0.0));
                (&d + d.adjoint()).scale(0.5)
            })
            .collect())
    } else {
        let ns = null_space(&m, tol);
        Ok((0..ns.ncols()).map(|col| combine(&|k| ns[(k, col)])).collect())
    }
}

/// Moore–Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(a: &CMatrix, tol: &Tolerances) -> CMatrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return zeros(n, m);
    }
    let (q, r) = if m > n {
        let qr = a.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, a.clone())
    };
    let (vals, v, w) = jacobi_rotate(r);
    let smax = vals[0];
    let cut = tol.rank_rel * smax;
    let mut out = zeros(n, w.nrows());
    for (i, &s) in vals.iter().enumerate() {
        if smax > 0.0 && s > cut {
            out += v.column(i) * w.column(i).adjoint() * c(1.0 / (s * s), 0.0);
        }
    }
    match q {
        Some(q) => out * q.adjoint(),
        None => out,
    }
}

/// Solves for the matrix L minimizing Σ‖L·input_i − target_i‖_F² and returns it with
/// the residual ‖L·[inputs] − [targets]‖_F.
pub fn lstsq_define(pairs: &[(CMatrix, CMatrix)], tol: &Tolerances) -> Result<(CMatrix, f64)> {
    let Some((in0, tg0)) = pairs.first() else {
        return Err(Error::dim("lstsq_define needs at least one pair"));
    };
    let (p, q) = (in0.nrows(), tg0.nrows());
    for (i, t) in pairs {
        if i.nrows() != p || t.nrows() != q || i.ncols() != t.ncols() {
            return Err(Error::dim("inconsistent block shapes in lstsq_define"));
        }
    }
    let ins: Vec<CMatrix> = pairs.iter().map(|x| x.0.clone()).collect();
    let tgs: Vec<CMatrix> = pairs.iter().map(|x| x.1.clone()).collect();
    let a = hstack(p, &ins);
    let b = hstack(q, &tgs);
    let l = &b * pinv(&a, tol);
    let resid = fro(&(&l * &a - &b));
    Ok((l, resid))
}

/// Column-major vectorization.
pub fn vec_of(a: &CMatrix) -> DVector<C64> {
    DVector::from_iterator(a.len(), a.iter().copied())
}
