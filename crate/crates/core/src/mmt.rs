//! Matrix multiplication tensors and the factor matrices of their polyadic
//! decompositions.
//!
//! All vectorizations are column-major. For `A` of size `m×p`, entry
//! `A(i1, i2)` sits at `vec(A)[i1 + i2*m]` (0-based). The tensor `T_mpn` has
//! shape `mp × pn × mn` and encodes the bilinear map `(A, B) ↦ (AB)ᵀ`, so the
//! third mode indexes `vec(Cᵀ)` with `Cᵀ` of size `n×m`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of dense entries any tensor may hold.
pub const DENSE_ENTRY_CAP: usize = 10_000_000;

/// Integer entries up to this magnitude are verified in `i64` arithmetic.
const INTEGER_PATH_MAX: f64 = 8.0;

/// Dimensions `(m, p, n)` of the product of an `m×p` and a `p×n` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub m: usize,
    pub p: usize,
    pub n: usize,
}

impl Shape {
    pub fn new(m: usize, p: usize, n: usize) -> Result<Self> {
        if m == 0 || p == 0 || n == 0 {
            return Err(Error::InvalidShape(format!("({m},{p},{n}) has a zero dimension")));
        }
        Ok(Shape { m, p, n })
    }

    /// Mode sizes `(mp, pn, mn)` of `T_mpn`.
    pub fn tensor_dims(&self) -> [usize; 3] {
        [self.m * self.p, self.p * self.n, self.m * self.n]
    }

    pub fn tensor_len(&self) -> usize {
        self.tensor_dims().iter().product()
    }

    /// Row count `mp + pn + mn` of the stacked factor matrices.
    pub fn stacked_rows(&self) -> usize {
        self.tensor_dims().iter().sum()
    }

    pub fn is_square(&self) -> bool {
        self.m == self.p && self.p == self.n
    }

    /// Shape of the tensor reached by one level of recursion.
    pub fn squared(&self) -> Shape {
        Shape { m: self.m * self.m, p: self.p * self.p, n: self.n * self.n }
    }

    pub fn label(&self) -> String {
        format!("{}{}{}", self.m, self.p, self.n)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.m, self.p, self.n)
    }
}

/// Dense 3-way array stored column-major: entry `(i, j, k)` lives at
/// `i + j*d0 + k*d0*d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    /// Column-major vectorization.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Tensor3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// The matrix multiplication tensor `T_mpn`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mmt {
    shape: Shape,
    entries: Tensor3,
}

impl Mmt {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn entries(&self) -> &Tensor3 {
        &self.entries
    }

    /// 0-based coordinates of the `mpn` ones.
    pub fn nonzeros(&self) -> Vec<[usize; 3]> {
        ones(self.shape)
    }
}

/// Coordinates of the ones of `T_mpn`, enumerated as `(i1, i2, j2)` =
/// (row of A, shared index, column of B).
fn ones(shape: Shape) -> Vec<[usize; 3]> {
    let Shape { m, p, n } = shape;
    let mut out = Vec::with_capacity(m * p * n);
    for j2 in 0..n {
        for i2 in 0..p {
            for i1 in 0..m {
                out.push([i1 + i2 * m, i2 + j2 * p, j2 + i1 * n]);
            }
        }
    }
    out
}

/// Builds `T_mpn`: entry `(i1 + i2 m, j1 + j2 p, k1 + k2 n)` is one iff
/// `i1 = k2`, `i2 = j1` and `j2 = k1`.
pub fn build_mmt(m: usize, p: usize, n: usize) -> Result<Mmt> {
    let shape = Shape::new(m, p, n)?;
    let entries = shape.tensor_len();
    if entries > DENSE_ENTRY_CAP {
        return Err(Error::TooLarge { entries, cap: DENSE_ENTRY_CAP });
    }
    let mut tensor = Tensor3::zeros(shape.tensor_dims());
    for [i, j, k] in ones(shape) {
        tensor.set(i, j, k, 1.0);
    }
    Ok(Mmt { shape, entries: tensor })
}

/// Factor matrices `U (mp×r)`, `V (pn×r)`, `W (mn×r)` of a length-`r` PD.
///
/// Column `i` of `U` is `vec(U_i)` with `U_i` of size `m×p`; likewise
/// `V_i` is `p×n` and `W_i` is `n×m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple {
    shape: Shape,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl FactorTriple {
    pub fn new(shape: Shape, u: DMatrix<f64>, v: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let [ru, rv, rw] = shape.tensor_dims();
        if u.nrows() != ru || v.nrows() != rv || w.nrows() != rw {
            return Err(Error::DimensionMismatch(format!(
                "factor rows ({},{},{}) do not match {shape}: expected ({ru},{rv},{rw})",
                u.nrows(),
                v.nrows(),
                w.nrows()
            )));
        }
        if u.ncols() != v.ncols() || v.ncols() != w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "column counts differ: U has {}, V has {}, W has {}",
                u.ncols(),
                v.ncols(),
                w.ncols()
            )));
        }
        if u.ncols() == 0 {
            return Err(Error::DimensionMismatch("a PD needs at least one column".into()));
        }
        Ok(FactorTriple { shape, u, v, w })
    }

    pub fn zeros(shape: Shape, r: usize) -> Result<Self> {
        let [a, b, c] = shape.tensor_dims();
        Self::new(shape, DMatrix::zeros(a, r), DMatrix::zeros(b, r), DMatrix::zeros(c, r))
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn into_parts(self) -> (Shape, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.shape, self.u, self.v, self.w)
    }

    /// `[vec(U); vec(V); vec(W)]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape.stacked_rows() * self.rank());
        out.extend_from_slice(self.u.as_slice());
        out.extend_from_slice(self.v.as_slice());
        out.extend_from_slice(self.w.as_slice());
        out
    }

    pub fn from_stacked(shape: Shape, r: usize, x: &[f64]) -> Result<Self> {
        let [a, b, c] = shape.tensor_dims();
        if x.len() != (a + b + c) * r {
            return Err(Error::DimensionMismatch(format!(
                "stacked vector has length {}, expected {}",
                x.len(),
                (a + b + c) * r
            )));
        }
        let u = DMatrix::from_column_slice(a, r, &x[..a * r]);
        let v = DMatrix::from_column_slice(b, r, &x[a * r..(a + b) * r]);
        let w = DMatrix::from_column_slice(c, r, &x[(a + b) * r..]);
        Self::new(shape, u, v, w)
    }

    /// `U_i` reshaped to `m×p`.
    pub fn u_mat(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.shape.m, self.shape.p, self.u.column(i).as_slice())
    }

    /// `V_i` reshaped to `p×n`.
    pub fn v_mat(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.shape.p, self.shape.n, self.v.column(i).as_slice())
    }

    /// `W_i` reshaped to `n×m`.
    pub fn w_mat(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.shape.n, self.shape.m, self.w.column(i).as_slice())
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().chain(self.v.iter()).chain(self.w.iter()).copied()
    }

    /// True when every entry is exactly -1, 0 or 1.
    pub fn is_practical(&self) -> bool {
        self.entries().all(|x| x == 0.0 || x == 1.0 || x == -1.0)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let r = self.rank();
        if let Some(bad) = cols.iter().find(|&&c| c >= r) {
            return Err(Error::DimensionMismatch(format!("column {bad} out of range 0..{r}")));
        }
        Self::new(self.shape, self.u.select_columns(cols), self.v.select_columns(cols), self.w.select_columns(cols))
    }
}

/// `Σ_i u_i ∘ v_i ∘ w_i` as a dense tensor.
pub fn reconstruct(factors: &FactorTriple) -> Tensor3 {
    let dims = factors.shape.tensor_dims();
    let mut out = Tensor3::zeros(dims);
    let [di, dj, dk] = dims;
    for l in 0..factors.rank() {
        let (u, v, w) = (factors.u.column(l), factors.v.column(l), factors.w.column(l));
        for k in 0..dk {
            let wk = w[k];
            if wk == 0.0 {
                continue;
            }
            for j in 0..dj {
                let vw = v[j] * wk;
                if vw == 0.0 {
                    continue;
                }
                let base = di * (j + dj * k);
                for i in 0..di {
                    out.data[base + i] += u[i] * vw;
                }
            }
        }
    }
    out
}

/// Integer reconstruction, or `None` when some entry is not an integer of
/// magnitude at most 8.
fn reconstruct_i64(factors: &FactorTriple) -> Option<Vec<i64>> {
    let to_int = |m: &DMatrix<f64>| -> Option<Vec<i64>> {
        m.iter().map(|&x| (x.fract() == 0.0 && x.abs() <= INTEGER_PATH_MAX).then_some(x as i64)).collect()
    };
    let (u, v, w) = (to_int(&factors.u)?, to_int(&factors.v)?, to_int(&factors.w)?);
    let [di, dj, dk] = factors.shape.tensor_dims();
    let mut out = vec![0i64; di * dj * dk];
    for l in 0..factors.rank() {
        let (uc, vc, wc) = (&u[l * di..(l + 1) * di], &v[l * dj..(l + 1) * dj], &w[l * dk..(l + 1) * dk]);
        for (k, &wk) in wc.iter().enumerate() {
            if wk == 0 {
                continue;
            }
            for (j, &vj) in vc.iter().enumerate() {
                let vw = vj * wk;
                if vw == 0 {
                    continue;
                }
                let base = di * (j + dj * k);
                for i in 0..di {
                    out[base + i] += uc[i] * vw;
                }
            }
        }
    }
    Some(out)
}

/// Outcome of checking a candidate decomposition against `T_mpn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Integer factors reproduce the tensor exactly in `i64` arithmetic.
    ExactInteger,
    /// Floating-point residual norm within the requested tolerance.
    ExactFloat {
        residual_norm: f64,
    },
    Failed {
        residual_norm: f64,
    },
}

impl Verdict {
    pub fn is_exact(&self) -> bool {
        !matches!(self, Verdict::Failed { .. })
    }

    pub fn residual_norm(&self) -> f64 {
        match *self {
            Verdict::ExactInteger => 0.0,
            Verdict::ExactFloat { residual_norm } | Verdict::Failed { residual_norm } => residual_norm,
        }
    }
}

pub fn verify_pd(factors: &FactorTriple, tensor: &Mmt, tol: f64) -> Result<Verdict> {
    if factors.shape != tensor.shape {
        return Err(Error::DimensionMismatch(format!(
            "factors are for {} but the tensor is {}",
            factors.shape, tensor.shape
        )));
    }
    if let Some(ints) = reconstruct_i64(factors) {
        let exact = ints.iter().zip(tensor.entries.as_slice()).all(|(&a, &t)| a == t as i64);
        if exact {
            return Ok(Verdict::ExactInteger);
        }
    }
    let residual_norm = reconstruct(factors).distance(&tensor.entries);
    Ok(if residual_norm <= tol { Verdict::ExactFloat { residual_norm } } else { Verdict::Failed { residual_norm } })
}

/// Multiplies `a (m×p)` by `b (p×n)` with the bilinear algorithm induced by
/// the decomposition and returns `(ab)ᵀ` of size `n×m`.
///
/// Uses exactly `r` products of linear combinations. The result is only the
/// true product when the factors verify against `T_mpn`.
pub fn apply_base_algorithm(factors: &FactorTriple, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let Shape { m, p, n } = factors.shape;
    if a.shape() != (m, p) || b.shape() != (p, n) {
        return Err(Error::DimensionMismatch(format!(
            "expected A {m}x{p} and B {p}x{n}, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let va = a.as_slice();
    let vb = b.as_slice();
    let mut out = DMatrix::zeros(n, m);
    for l in 0..factors.rank() {
        let left: f64 = factors.u.column(l).iter().zip(va).map(|(x, y)| x * y).sum();
        if left == 0.0 {
            continue;
        }
        let right: f64 = factors.v.column(l).iter().zip(vb).map(|(x, y)| x * y).sum();
        let prod = left * right;
        for (o, wv) in out.as_mut_slice().iter_mut().zip(factors.w.column(l).iter()) {
            *o += prod * wv;
        }
    }
    Ok(out)
}

/// The rank-`mpn` decomposition with one rank-1 term per one of `T_mpn`.
pub fn naive_pd(shape: Shape) -> Result<FactorTriple> {
    let tensor = build_mmt(shape.m, shape.p, shape.n)?;
    let ones = tensor.nonzeros();
    let mut f = FactorTriple::zeros(shape, ones.len())?;
    for (l, [i, j, k]) in ones.into_iter().enumerate() {
        f.u[(i, l)] = 1.0;
        f.v[(j, l)] = 1.0;
        f.w[(k, l)] = 1.0;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tensors_have_mpn_ones() {
        let t = build_mmt(2, 2, 2).unwrap();
        assert_eq!(t.entries().dims(), [4, 4, 4]);
        assert_eq!(t.entries().nonzero_count(), 8);

        let t = build_mmt(2, 2, 3).unwrap();
        assert_eq!(t.entries().dims(), [4, 6, 6]);
        assert_eq!(t.entries().nonzero_count(), 12);

        let t = build_mmt(1, 1, 1).unwrap();
        assert_eq!(t.entries().dims(), [1, 1, 1]);
        assert_eq!(t.entries().get(0, 0, 0), 1.0);
    }

    #[test]
    fn rejects_zero_and_oversized() {
        assert!(matches!(build_mmt(0, 2, 2), Err(Error::InvalidShape(_))));
        assert!(matches!(build_mmt(16, 16, 16), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn index_rule_matches_definition() {
        // Brute force over all six indices (1-based in the definition).
        let (m, p, n) = (2, 3, 2);
        let t = build_mmt(m, p, n).unwrap();
        for i1 in 0..m {
            for i2 in 0..p {
                for j1 in 0..p {
                    for j2 in 0..n {
                        for k1 in 0..n {
                            for k2 in 0..m {
                                let want = (i1 == k2 && i2 == j1 && j2 == k1) as u8 as f64;
                                assert_eq!(t.entries().get(i1 + i2 * m, j1 + j2 * p, k1 + k2 * n), want);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_factors_reconstruct_to_zero() {
        let f = FactorTriple::zeros(Shape::new(2, 2, 2).unwrap(), 1).unwrap();
        assert_eq!(reconstruct(&f).nonzero_count(), 0);
    }

    #[test]
    fn mismatched_columns_rejected() {
        let s = Shape::new(2, 2, 2).unwrap();
        let err = FactorTriple::new(s, DMatrix::zeros(4, 7), DMatrix::zeros(4, 6), DMatrix::zeros(4, 7));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn naive_pd_multiplies() {
        let f = naive_pd(Shape::new(2, 3, 2).unwrap()).unwrap();
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(apply_base_algorithm(&f, &a, &b).unwrap(), (&a * &b).transpose());
    }

    #[test]
    fn zero_input_gives_zero_product() {
        let f = naive_pd(Shape::new(2, 2, 2).unwrap()).unwrap();
        let out = apply_base_algorithm(&f, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(out, DMatrix::zeros(2, 2));
    }
}
