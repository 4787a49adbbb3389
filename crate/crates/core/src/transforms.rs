//! Invariance transformations, recursive composition and Jacobian rank.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::layout::{contract, expand, Blocks, GenCsLayout, StructuredPoint};
use crate::mmt::{build_mmt, FactorTriple, Mmt, Shape, DENSE_ENTRY_CAP};
use crate::nls::jacobian;

/// Smallest accepted ratio `σ_min / σ_max` for PQR matrices.
const MIN_RCOND: f64 = 1e-12;

/// Default relative threshold on singular values for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// A map sending decompositions of `T_mpn` to decompositions of `T_mpn`.
#[derive(Debug, Clone, PartialEq)]
pub enum InvTransform {
    /// `α_i u_i, β_i v_i, w_i / (α_i β_i)`.
    Scaling { alpha: Vec<f64>, beta: Vec<f64> },
    /// `P U_i Q⁻¹, Q V_i R⁻¹, R W_i P⁻¹` with `P` `m×m`, `Q` `p×p`, `R` `n×n`.
    Pqr { p: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64> },
    /// `U_i ← V_iᵀ, V_i ← U_iᵀ, W_i ← W_iᵀ`; square shapes only.
    Transpose,
    /// `(U, V, W) ← (V, W, U)`; square shapes only.
    CyclicShift,
    /// Column `i` of the result is column `perm[i]` of the input.
    ColumnPermutation(Vec<usize>),
}

fn inverse_checked(mat: &DMatrix<f64>, name: &str, dim: usize) -> Result<DMatrix<f64>> {
    if mat.shape() != (dim, dim) {
        return Err(Error::InvalidTransform(format!("{name} must be {dim}x{dim}, got {:?}", mat.shape())));
    }
    let sv = mat.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(min > MIN_RCOND * max) {
        return Err(Error::InvalidTransform(format!("{name} is singular (σ_min = {min:e}, σ_max = {max:e})")));
    }
    mat.clone().try_inverse().ok_or_else(|| Error::InvalidTransform(format!("{name} is singular")))
}

fn require_square(shape: Shape, what: &str) -> Result<()> {
    if !shape.is_square() {
        return Err(Error::InvalidTransform(format!("{what} needs m = p = n, got {shape}")));
    }
    Ok(())
}

/// Applies `f` to every reshaped column of one factor and re-vectorizes.
fn map_columns(
    factor: &DMatrix<f64>,
    rows: usize,
    cols: usize,
    f: impl Fn(DMatrix<f64>) -> DMatrix<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(factor.nrows(), factor.ncols());
    for l in 0..factor.ncols() {
        let m = DMatrix::from_column_slice(rows, cols, factor.column(l).as_slice());
        out.column_mut(l).copy_from_slice(f(m).as_slice());
    }
    out
}

pub fn apply_transform(factors: &FactorTriple, tf: &InvTransform) -> Result<FactorTriple> {
    let shape = factors.shape();
    let Shape { m, p, n } = shape;
    let r = factors.rank();
    let (u, v, w) = (factors.u(), factors.v(), factors.w());
    match tf {
        InvTransform::Scaling { alpha, beta } => {
            if alpha.len() != r || beta.len() != r {
                return Err(Error::InvalidTransform(format!("scaling needs {r} factors per mode")));
            }
            if alpha.iter().chain(beta).any(|&x| x == 0.0 || !x.is_finite()) {
                return Err(Error::InvalidTransform("scaling factors must be finite and nonzero".into()));
            }
            let mut u2 = u.clone();
            let mut v2 = v.clone();
            let mut w2 = w.clone();
            for l in 0..r {
                u2.column_mut(l).scale_mut(alpha[l]);
                v2.column_mut(l).scale_mut(beta[l]);
                w2.column_mut(l).scale_mut(1.0 / (alpha[l] * beta[l]));
            }
            FactorTriple::new(shape, u2, v2, w2)
        }
        InvTransform::Pqr { p: pm, q: qm, r: rm } => {
            let pi = inverse_checked(pm, "P", m)?;
            let qi = inverse_checked(qm, "Q", p)?;
            let ri = inverse_checked(rm, "R", n)?;
            FactorTriple::new(
                shape,
                map_columns(u, m, p, |x| pm * x * &qi),
                map_columns(v, p, n, |x| qm * x * &ri),
                map_columns(w, n, m, |x| rm * x * &pi),
            )
        }
        InvTransform::Transpose => {
            require_square(shape, "transpose")?;
            let t = |x: DMatrix<f64>| x.transpose();
            FactorTriple::new(shape, map_columns(v, m, m, t), map_columns(u, m, m, t), map_columns(w, m, m, t))
        }
        InvTransform::CyclicShift => {
            require_square(shape, "cyclic shift")?;
            FactorTriple::new(shape, v.clone(), w.clone(), u.clone())
        }
        InvTransform::ColumnPermutation(perm) => {
            let mut seen = vec![false; r];
            for &c in perm {
                if c >= r || std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidTransform(format!("{perm:?} is not a permutation of 0..{r}")));
                }
            }
            if perm.len() != r {
                return Err(Error::InvalidTransform(format!("{perm:?} is not a permutation of 0..{r}")));
            }
            factors.select_columns(perm)
        }
    }
}

fn check_cap(shape: Shape) -> Result<()> {
    let entries = shape.tensor_len();
    if entries > DENSE_ENTRY_CAP {
        return Err(Error::TooLarge { entries, cap: DENSE_ENTRY_CAP });
    }
    Ok(())
}

fn vec_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    a.kronecker(b).as_slice().to_vec()
}

/// `u'_{i2 + i1 r} = vec(U_{i1} ⊗ U_{i2})` and likewise for `V`
/// and `W` give a rank-`r²` decomposition of `T_{m²p²n²}`.
pub fn recursive_pd(factors: &FactorTriple) -> Result<FactorTriple> {
    let shape = factors.shape();
    let big = shape.squared();
    check_cap(big)?;
    let r = factors.rank();
    let [a, b, c] = big.tensor_dims();
    let mut u = DMatrix::zeros(a, r * r);
    let mut v = DMatrix::zeros(b, r * r);
    let mut w = DMatrix::zeros(c, r * r);
    let us: Vec<_> = (0..r).map(|i| factors.u_mat(i)).collect();
    let vs: Vec<_> = (0..r).map(|i| factors.v_mat(i)).collect();
    let ws: Vec<_> = (0..r).map(|i| factors.w_mat(i)).collect();
    for i1 in 0..r {
        for i2 in 0..r {
            let col = i2 + i1 * r;
            u.column_mut(col).copy_from_slice(&vec_kron(&us[i1], &us[i2]));
            v.column_mut(col).copy_from_slice(&vec_kron(&vs[i1], &vs[i2]));
            w.column_mut(col).copy_from_slice(&vec_kron(&ws[i1], &ws[i2]));
        }
    }
    FactorTriple::new(big, u, v, w)
}

/// Recursive composition of a cyclic-symmetric decomposition, arranged so the
/// result is cyclic-symmetric with `s' = s²` and `t' = t(s + r)`.
///
/// With `A_i, B_j, C_j, D_j` the reshaped blocks:
/// `A'_{i2 + i1 s} = A_{i1} ⊗ A_{i2}`, `B' = [B'_1 B'_2]` with
/// `B'_{1, j + i1 t} = A_{i1} ⊗ B_j` and `B'_{2, k + j r} = B_j ⊗ U_k`;
/// `C'` and `D'` use `C_j ⊗ W_k` and `D_j ⊗ V_k`.
pub fn recursive_cs_pd(factors: &FactorTriple, layout: &GenCsLayout) -> Result<(FactorTriple, GenCsLayout)> {
    if !layout.is_full_cs() {
        return Err(Error::InvalidLayout(format!(
            "recursive CS composition needs m = p = n and s + 3t = r, got {} r={} s={} t={}",
            layout.shape(),
            layout.r(),
            layout.s(),
            layout.t()
        )));
    }
    let point = contract(factors, layout, 0.0)?;
    let blocks = point.blocks();
    let shape = layout.shape();
    let big = shape.squared();
    check_cap(big)?;
    let (m, r, s, t) = (shape.m, layout.r(), layout.s(), layout.t());
    let reshape = |mat: &DMatrix<f64>, j: usize| DMatrix::from_column_slice(m, m, mat.column(j).as_slice());
    let a: Vec<_> = (0..s).map(|i| reshape(&blocks.a, i)).collect();
    let b: Vec<_> = (0..t).map(|j| reshape(&blocks.b, j)).collect();
    let c: Vec<_> = (0..t).map(|j| reshape(&blocks.c, j)).collect();
    let d: Vec<_> = (0..t).map(|j| reshape(&blocks.d, j)).collect();

    let (s2, t2) = (s * s, t * (s + r));
    let rows = big.m * big.m;
    let mut a2 = DMatrix::zeros(rows, s2);
    let mut b2 = DMatrix::zeros(rows, t2);
    let mut c2 = DMatrix::zeros(rows, t2);
    let mut d2 = DMatrix::zeros(rows, t2);
    for i1 in 0..s {
        for i2 in 0..s {
            a2.column_mut(i2 + i1 * s).copy_from_slice(&vec_kron(&a[i1], &a[i2]));
        }
        for j in 0..t {
            let col = j + i1 * t;
            b2.column_mut(col).copy_from_slice(&vec_kron(&a[i1], &b[j]));
            c2.column_mut(col).copy_from_slice(&vec_kron(&a[i1], &c[j]));
            d2.column_mut(col).copy_from_slice(&vec_kron(&a[i1], &d[j]));
        }
    }
    for j in 0..t {
        for k in 0..r {
            let col = s * t + k + j * r;
            b2.column_mut(col).copy_from_slice(&vec_kron(&b[j], &factors.u_mat(k)));
            c2.column_mut(col).copy_from_slice(&vec_kron(&c[j], &factors.w_mat(k)));
            d2.column_mut(col).copy_from_slice(&vec_kron(&d[j], &factors.v_mat(k)));
        }
    }
    let layout2 = GenCsLayout::new(big, r * r, s2, t2)?;
    let empty = |rows: usize| DMatrix::zeros(rows, 0);
    let blocks2 = Blocks {
        a: a2,
        b: b2,
        c: c2,
        d: d2,
        u_tilde: DMatrix::zeros(0, s2 + 3 * t2),
        v_tilde: DMatrix::zeros(0, s2 + 3 * t2),
        v_hat: DMatrix::zeros(0, s2 + 3 * t2),
        w_hat: DMatrix::zeros(0, s2 + 3 * t2),
        u_dot: empty(rows),
        v_dot: empty(rows),
        w_dot: empty(rows),
    };
    let out = expand(&StructuredPoint::from_blocks(layout2, &blocks2)?);
    Ok((out, layout2))
}

/// Singular-value summary of the structured Jacobian at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub rows: usize,
    pub cols: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Relative threshold: values above `tol · σ_max` count.
    pub tol: f64,
}

impl JacobianReport {
    pub fn from_matrix(jac: DMatrix<f64>, tol: f64) -> Self {
        let (rows, cols) = jac.shape();
        let mut sv: Vec<f64> =
            if rows == 0 || cols == 0 { Vec::new() } else { jac.singular_values().as_slice().to_vec() };
        sv.sort_by(|a, b| b.total_cmp(a));
        let max = sv.first().copied().unwrap_or(0.0);
        let rank = if max > 0.0 { sv.iter().filter(|&&x| x > tol * max).count() } else { 0 };
        JacobianReport { rows, cols, singular_values: sv, rank, tol }
    }

    /// JSON summary with the 20 largest singular values.
    pub fn summary_json(&self) -> Value {
        json!({
            "dims": [self.rows, self.cols],
            "rank": self.rank,
            "tol": self.tol,
            "singular_values": self.singular_values.iter().take(20).collect::<Vec<_>>(),
        })
    }
}

pub fn jacobian_rank(point: &StructuredPoint, tensor: &Mmt, tol: f64) -> Result<JacobianReport> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("rank tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(JacobianReport::from_matrix(jacobian(point, tensor)?, tol))
}

/// Builds `T` for the squared shape, used to verify composed decompositions.
pub fn squared_tensor(shape: Shape) -> Result<Mmt> {
    let big = shape.squared();
    build_mmt(big.m, big.p, big.n)
}
