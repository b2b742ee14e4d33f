//! Finite-dimensional C*-algebras ⊕_i M_{n_i}(ℂ) in matrix-unit coordinates, Hilbert
//! modules L(ℂ^k; ℂ^n) over M_k, and M_k-valued sesquilinear forms.

use crate::error::{Error, Result};
use crate::numlin::{fro, kron, psd_check, zeros, CMatrix, Tolerances, C64, ONE};

/// ⊕_i M_{n_i}(ℂ), realized as block-diagonal matrices of size Σ n_i.
///
/// The matrix units E^{(i)}_{ab} are enumerated block by block, row-major inside a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteCStarAlgebra {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    units: Vec<(usize, usize, usize)>,
}

impl FiniteCStarAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::invalid("algebra needs at least one block, all of positive size"));
        }
        let mut offsets = vec![];
        let mut units = vec![];
        let mut off = 0;
        for (i, &n) in blocks.iter().enumerate() {
            offsets.push(off);
            off += n;
            for a in 0..n {
                for b in 0..n {
                    units.push((i, a, b));
                }
            }
        }
        Ok(FiniteCStarAlgebra {
            blocks,
            offsets,
            units,
        })
    }

    /// M_n.
    pub fn full(n: usize) -> Self {
        Self::new(vec![n]).expect("positive size")
    }

    /// Fun(Ω) ≅ ℂ^k.
    pub fn commutative(k: usize) -> Self {
        Self::new(vec![1; k]).expect("positive size")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn block_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Dimension as a vector space, Σ n_i².
    pub fn dim(&self) -> usize {
        self.units.len()
    }

    /// Size of the block-diagonal matrices, Σ n_i.
    pub fn size(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// (block, row, col) of the matrix unit with index `u`.
    pub fn unit(&self, u: usize) -> (usize, usize, usize) {
        self.units[u]
    }

    pub fn unit_index(&self, block: usize, a: usize, b: usize) -> usize {
        let before: usize = self.blocks[..block].iter().map(|n| n * n).sum();
        before + a * self.blocks[block] + b
    }

    /// Position of unit `u` inside the block-diagonal matrix.
    pub fn unit_position(&self, u: usize) -> (usize, usize) {
        let (i, a, b) = self.units[u];
        (self.offsets[i] + a, self.offsets[i] + b)
    }

    pub fn unit_matrix(&self, u: usize) -> CMatrix {
        let n = self.size();
        let mut m = zeros(n, n);
        m[self.unit_position(u)] = ONE;
        m
    }

    pub fn adjoint_unit(&self, u: usize) -> usize {
        let (i, a, b) = self.units[u];
        self.unit_index(i, b, a)
    }

    /// E_u E_v as a unit index, or None when the product vanishes.
    pub fn product_unit(&self, u: usize, v: usize) -> Option<usize> {
        let (i, a, b) = self.units[u];
        let (j, c, d) = self.units[v];
        (i == j && b == c).then(|| self.unit_index(i, a, d))
    }

    /// Indices of the diagonal units; their sum is the unit element.
    pub fn diagonal_units(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&u| {
                let (_, a, b) = self.units[u];
                a == b
            })
            .collect()
    }

    pub fn unit_coefficients(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        for u in self.diagonal_units() {
            v[u] = ONE;
        }
        v
    }

    pub fn element(&self, coeffs: &[C64]) -> Result<CMatrix> {
        if coeffs.len() != self.dim() {
            return Err(Error::dim(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coeffs.len()
            )));
        }
        let n = self.size();
        let mut m = zeros(n, n);
        for (u, z) in coeffs.iter().enumerate() {
            m[self.unit_position(u)] = *z;
        }
        Ok(m)
    }

    /// Off-block mass of a matrix, ‖m − Σ_u m_u E_u‖_F.
    pub fn off_block_residual(&self, m: &CMatrix) -> f64 {
        let coeffs = self.read_coefficients(m);
        let back = self.element(&coeffs).expect("matching length");
        fro(&(m - back))
    }

    fn read_coefficients(&self, m: &CMatrix) -> Vec<C64> {
        (0..self.dim()).map(|u| m[self.unit_position(u)]).collect()
    }

    /// Matrix-unit coefficients of a block-diagonal matrix.
    pub fn coefficients(&self, m: &CMatrix, tol: &Tolerances) -> Result<Vec<C64>> {
        let n = self.size();
        if m.shape() != (n, n) {
            return Err(Error::dim(format!("expected {n}x{n} algebra element")));
        }
        let r = self.off_block_residual(m);
        if r > tol.recon_fro * fro(m).max(1.0) {
            return Err(Error::tolerance("element lies outside the algebra", r, tol.recon_fro));
        }
        Ok(self.read_coefficients(m))
    }

    /// Each diagonal block is PSD.
    pub fn alg_positive(&self, m: &CMatrix, tol: &Tolerances) -> Result<bool> {
        self.coefficients(m, tol)?;
        for (i, &n) in self.blocks.iter().enumerate() {
            let o = self.offsets[i];
            if !psd_check(&m.view((o, o), (n, n)).into_owned(), tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Whether conjugation by `u` maps the algebra onto itself.
    pub fn preserved_by(&self, u: &CMatrix, tol: &Tolerances) -> bool {
        let n = self.size();
        if u.shape() != (n, n) {
            return false;
        }
        (0..self.dim()).all(|k| {
            let img = u * self.unit_matrix(k) * u.adjoint();
            self.off_block_residual(&img) <= tol.recon_fro
        })
    }

    /// Whether `u` itself lies in the algebra (so conjugation by it is inner).
    pub fn contains(&self, u: &CMatrix, tol: &Tolerances) -> bool {
        u.shape() == (self.size(), self.size()) && self.off_block_residual(u) <= tol.recon_fro * fro(u).max(1.0)
    }
}

/// A declared factorization A = B ⊗ C, with A's blocks ordered (i, j) ↦ n_i·m_j,
/// B-index major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSplit {
    pub b: FiniteCStarAlgebra,
    pub c: FiniteCStarAlgebra,
    pub product: FiniteCStarAlgebra,
}

impl TensorSplit {
    pub fn new(b: FiniteCStarAlgebra, c: FiniteCStarAlgebra) -> Self {
        let mut blocks = vec![];
        for &n in b.blocks() {
            for &m in c.blocks() {
                blocks.push(n * m);
            }
        }
        let product = FiniteCStarAlgebra::new(blocks).expect("positive sizes");
        TensorSplit { b, c, product }
    }

    /// Unit index of E^B_u ⊗ E^C_v in the product algebra.
    pub fn product_unit(&self, u: usize, v: usize) -> usize {
        let (i, a, b) = self.b.unit(u);
        let (j, c, d) = self.c.unit(v);
        let m = self.c.blocks()[j];
        let block = i * self.c.blocks().len() + j;
        self.product.unit_index(block, a * m + c, b * m + d)
    }

    /// ⊕_{i,j} b_i ⊗ c_j.
    pub fn tensor_element(&self, b: &CMatrix, c: &CMatrix) -> CMatrix {
        let mut parts = vec![];
        for (i, &n) in self.b.blocks().iter().enumerate() {
            let bo = self.b.block_offset(i);
            for (j, &m) in self.c.blocks().iter().enumerate() {
                let co = self.c.block_offset(j);
                parts.push(kron(
                    &b.view((bo, bo), (n, n)).into_owned(),
                    &c.view((co, co), (m, m)).into_owned(),
                ));
            }
        }
        crate::numlin::direct_sum(&parts)
    }

    /// Implementer of β⊗γ on the product from implementers of β (on B) and γ (on C).
    pub fn product_implementer(&self, ub: &CMatrix, uc: &CMatrix) -> CMatrix {
        let n = self.product.size();
        let mut out = zeros(n, n);
        let nb = self.b.blocks().len();
        let nc = self.c.blocks().len();
        for i2 in 0..nb {
            for i in 0..nb {
                let (s2, s) = (self.b.blocks()[i2], self.b.blocks()[i]);
                let sub_b = ub
                    .view((self.b.block_offset(i2), self.b.block_offset(i)), (s2, s))
                    .into_owned();
                if fro(&sub_b) == 0.0 {
                    continue;
                }
                for j2 in 0..nc {
                    for j in 0..nc {
                        let (t2, t) = (self.c.blocks()[j2], self.c.blocks()[j]);
                        let sub_c = uc
                            .view((self.c.block_offset(j2), self.c.block_offset(j)), (t2, t))
                            .into_owned();
                        if fro(&sub_c) == 0.0 {
                            continue;
                        }
                        let k = kron(&sub_b, &sub_c);
                        let r0 = self.product.block_offset(i2 * nc + j2);
                        let c0 = self.product.block_offset(i * nc + j);
                        let mut view = out.view_mut((r0, c0), (k.nrows(), k.ncols()));
                        view += &k;
                    }
                }
            }
        }
        out
    }
}

/// The Hilbert M_k-module L(ℂ^k; ℂ^{n_V}) with ⟨v,w⟩ = v†w.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModuleSpace {
    pub k: usize,
    pub n_v: usize,
}

impl ModuleSpace {
    pub fn new(k: usize, n_v: usize) -> Self {
        ModuleSpace { k, n_v }
    }

    fn check(&self, v: &CMatrix) -> Result<()> {
        if v.shape() != (self.n_v, self.k) {
            return Err(Error::dim(format!(
                "module element must be {}x{}, got {}x{}",
                self.n_v,
                self.k,
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(())
    }

    pub fn inner(&self, v: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
        self.check(v)?;
        self.check(w)?;
        Ok(v.adjoint() * w)
    }

    /// √‖⟨v,v⟩‖.
    pub fn norm(&self, v: &CMatrix) -> Result<f64> {
        Ok(crate::numlin::spectral_norm(&self.inner(v, v)?).sqrt())
    }

    /// The standard spanning family v = e_r e_s†.
    pub fn matrix_unit(&self, r: usize, s: usize) -> CMatrix {
        let mut m = zeros(self.n_v, self.k);
        m[(r, s)] = ONE;
        m
    }
}

/// The sesquilinear form s(v,w) = v†Tw.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix(pub CMatrix);

impl FormMatrix {
    pub fn eval(&self, v: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
        let n = self.0.nrows();
        if !self.0.is_square() || v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
            return Err(Error::dim("form and module elements disagree in shape"));
        }
        Ok(v.adjoint() * &self.0 * w)
    }

    pub fn is_positive(&self, tol: &Tolerances) -> Result<bool> {
        psd_check(&self.0, tol)
    }
}

pub fn form_eval(t: &FormMatrix, v: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
    t.eval(v, w)
}

pub fn form_positive(t: &FormMatrix, tol: &Tolerances) -> Result<bool> {
    t.is_positive(tol)
}

/// An adjointable module map v ↦ Lv.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleMap(pub CMatrix);

impl ModuleMap {
    pub fn apply(&self, v: &CMatrix) -> Result<CMatrix> {
        if v.nrows() != self.0.ncols() {
            return Err(Error::dim("module map and element disagree in shape"));
        }
        Ok(&self.0 * v)
    }

    pub fn adjoint(&self) -> ModuleMap {
        ModuleMap(self.0.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{c, from_real, identity, unitary_residual};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn unit_tables() {
        let a = FiniteCStarAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(a.dim(), 5);
        assert_eq!(a.size(), 3);
        let e01 = a.unit_index(0, 0, 1);
        let e10 = a.unit_index(0, 1, 0);
        assert_eq!(a.adjoint_unit(e01), e10);
        assert_eq!(a.product_unit(e01, e10), Some(a.unit_index(0, 0, 0)));
        assert_eq!(a.product_unit(e01, e01), None);
        let one = a.element(&a.unit_coefficients()).unwrap();
        assert_eq!(one, identity(3));
        assert_eq!(a.product_unit(e01, a.unit_index(1, 0, 0)), None);
    }

    #[test]
    fn positivity_examples() {
        let m2 = FiniteCStarAlgebra::full(2);
        let one = m2.element(&m2.unit_coefficients()).unwrap();
        assert!(m2.alg_positive(&one, &tol()).unwrap());
        let x = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!m2.alg_positive(&x, &tol()).unwrap());
        let c2 = FiniteCStarAlgebra::commutative(2);
        let d = from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(c2.alg_positive(&d, &tol()).unwrap());
        assert!(c2.alg_positive(&x, &tol()).is_err());
    }

    #[test]
    fn form_examples() {
        let t = FormMatrix(identity(2));
        let sp = ModuleSpace::new(2, 2);
        let e11 = sp.matrix_unit(0, 0);
        assert_eq!(t.eval(&e11, &e11).unwrap(), e11);
        assert_eq!(FormMatrix(zeros(2, 2)).eval(&e11, &e11).unwrap(), zeros(2, 2));
        assert!(form_positive(&t, &tol()).unwrap());
        assert!(!form_positive(&FormMatrix(from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])), &tol()).unwrap());
        assert!(form_positive(&FormMatrix(from_real(2, 2, &[1.0, 1.0, 1.0, 1.0])), &tol()).unwrap());
    }

    #[test]
    fn tensor_split_units() {
        let s = TensorSplit::new(FiniteCStarAlgebra::full(2), FiniteCStarAlgebra::commutative(3));
        assert_eq!(s.product.blocks(), &[2, 2, 2]);
        let b = s.b.unit_matrix(1);
        let cm = s.c.unit_matrix(2);
        let m = s.tensor_element(&b, &cm);
        assert_eq!(m, s.product.unit_matrix(s.product_unit(1, 2)));
    }

    #[test]
    fn product_implementer_acts_factorwise() {
        let s = TensorSplit::new(FiniteCStarAlgebra::full(2), FiniteCStarAlgebra::commutative(2));
        let ub = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let uc = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = s.product_implementer(&ub, &uc);
        assert!(unitary_residual(&p) < 1e-14);
        let b = from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let cm = from_real(2, 2, &[5.0, 0.0, 0.0, 7.0]);
        let lhs = &p * s.tensor_element(&b, &cm) * p.adjoint();
        let rhs = s.tensor_element(&(&ub * &b * ub.adjoint()), &(&uc * &cm * uc.adjoint()));
        assert!(fro(&(lhs - rhs)) < 1e-12);
        assert!(s.product.preserved_by(&p, &tol()));
        assert!(!s.product.contains(&p, &tol()));
    }

    #[test]
    fn module_norm_is_operator_norm() {
        let sp = ModuleSpace::new(2, 3);
        let v = CMatrix::from_fn(3, 2, |i, j| c(i as f64 + 0.5, j as f64 - 0.25));
        let n = sp.norm(&v).unwrap();
        assert!((n - crate::numlin::spectral_norm(&v)).abs() < 1e-12);
        assert!(sp.inner(&v, &zeros(2, 2)).is_err());
    }
}
