//! Generalized cyclic-symmetric parameterization of the factor matrices.
//!
//! The first `r_cs = s + 3t` columns share their top-left `m×m` sub-blocks
//! across `U`, `V` and `W`:
//!
//! ```text
//! U = [A B C D | U_dot]    V = [A D B C | V_dot]    W = [A C D B | W_dot]
//! ```
//!
//! where the shared part of `U_i` is `U_i(:, 1:m)`, of `V_i` is
//! `V_i(1:m, 1:m)` and of `W_i` is `W_i(1:m, :)`. The remaining entries of
//! the structured columns are the free border blocks `U_tilde`, `V_tilde`,
//! `V_hat` and `W_hat`; the last `r - r_cs` columns are unconstrained.
//!
//! The flat variable vector concatenates the column-major vectorizations of
//! `A, B, C, D, U_tilde, V_tilde, V_hat, W_hat, U_dot, V_dot, W_dot`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmt::{FactorTriple, Shape};

/// Names of the variable blocks in storage order.
pub const BLOCK_NAMES: [&str; 11] =
    ["A", "B", "C", "D", "U_tilde", "V_tilde", "V_hat", "W_hat", "U_dot", "V_dot", "W_dot"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenCsLayout {
    shape: Shape,
    r: usize,
    s: usize,
    t: usize,
}

impl GenCsLayout {
    /// Validates `s + 3t ≤ r`. Structured layouts (`r_cs > 0`) need
    /// `m ≤ p ≤ n`; reorder the product dimensions before searching.
    pub fn new(shape: Shape, r: usize, s: usize, t: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidLayout("rank must be positive".into()));
        }
        if s + 3 * t > r {
            return Err(Error::InvalidLayout(format!("s + 3t = {} exceeds r = {r}", s + 3 * t)));
        }
        if s + 3 * t > 0 && !(shape.m <= shape.p && shape.p <= shape.n) {
            return Err(Error::InvalidLayout(format!("structured layouts need m <= p <= n, got {shape}")));
        }
        Ok(GenCsLayout { shape, r, s, t })
    }

    pub fn unstructured(shape: Shape, r: usize) -> Result<Self> {
        Self::new(shape, r, 0, 0)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn r_cs(&self) -> usize {
        self.s + 3 * self.t
    }

    pub fn is_unstructured(&self) -> bool {
        self.r_cs() == 0
    }

    /// Square shape with every column cyclic-symmetric.
    pub fn is_full_cs(&self) -> bool {
        self.shape.is_square() && self.r_cs() == self.r
    }

    /// `(rows, cols)` of each block, in storage order.
    pub fn block_dims(&self) -> [(usize, usize); 11] {
        let Shape { m, p, n } = self.shape;
        let (s, t, rcs, r) = (self.s, self.t, self.r_cs(), self.r);
        let m2 = m * m;
        [
            (m2, s),
            (m2, t),
            (m2, t),
            (m2, t),
            (m * (p - m), rcs),
            (p * (n - m), rcs),
            ((p - m) * m, rcs),
            ((n - m) * m, rcs),
            (m * p, r - rcs),
            (p * n, r - rcs),
            (n * m, r - rcs),
        ]
    }

    /// Number of free variables, `(mp + pn + mn) r − 2 m² r_cs`.
    pub fn n_vars(&self) -> usize {
        self.shape.stacked_rows() * self.r - 2 * self.shape.m * self.shape.m * self.r_cs()
    }

    /// Length of `[vec U; vec V; vec W]`.
    pub fn full_len(&self) -> usize {
        self.shape.stacked_rows() * self.r
    }

    pub fn structure_map(&self) -> StructureMap {
        structure_map(self)
    }

    pub fn zero_point(&self) -> StructuredPoint {
        StructuredPoint { layout: *self, x: vec![0.0; self.n_vars()] }
    }
}

/// All admissible `(s, t)` with `s + 3t ≤ r`, ordered by decreasing `r_cs`
/// and, within equal `r_cs`, increasing `s`.
pub fn enumerate_st(r: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for rcs in (0..=r).rev() {
        for t in (0..=rcs / 3).rev() {
            out.push((rcs - 3 * t, t));
        }
    }
    out
}

/// The named blocks of a structured point as matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub u_tilde: DMatrix<f64>,
    pub v_tilde: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
    pub w_hat: DMatrix<f64>,
    pub u_dot: DMatrix<f64>,
    pub v_dot: DMatrix<f64>,
    pub w_dot: DMatrix<f64>,
}

impl Blocks {
    fn as_array(&self) -> [&DMatrix<f64>; 11] {
        [
            &self.a,
            &self.b,
            &self.c,
            &self.d,
            &self.u_tilde,
            &self.v_tilde,
            &self.v_hat,
            &self.w_hat,
            &self.u_dot,
            &self.v_dot,
            &self.w_dot,
        ]
    }
}

/// A layout together with its flat variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPoint {
    layout: GenCsLayout,
    x: Vec<f64>,
}

impl StructuredPoint {
    pub fn new(layout: GenCsLayout, x: Vec<f64>) -> Result<Self> {
        if x.len() != layout.n_vars() {
            return Err(Error::DimensionMismatch(format!(
                "layout needs {} variables, got {}",
                layout.n_vars(),
                x.len()
            )));
        }
        Ok(StructuredPoint { layout, x })
    }

    pub fn layout(&self) -> &GenCsLayout {
        &self.layout
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn from_blocks(layout: GenCsLayout, blocks: &Blocks) -> Result<Self> {
        let mut x = Vec::with_capacity(layout.n_vars());
        for ((name, want), got) in BLOCK_NAMES.iter().zip(layout.block_dims()).zip(blocks.as_array()) {
            // Empty blocks may be given with either dimension zero.
            let empty = want.0 * want.1 == 0 && got.is_empty();
            if !empty && got.shape() != want {
                return Err(Error::DimensionMismatch(format!(
                    "block {name} should be {}x{}, got {}x{}",
                    want.0,
                    want.1,
                    got.nrows(),
                    got.ncols()
                )));
            }
            x.extend_from_slice(got.as_slice());
        }
        Self::new(layout, x)
    }

    pub fn blocks(&self) -> Blocks {
        let mut offset = 0;
        let mut mats = self.layout.block_dims().map(|(rows, cols)| {
            let m = DMatrix::from_column_slice(rows, cols, &self.x[offset..offset + rows * cols]);
            offset += rows * cols;
            m
        });
        let take = |i: usize, mats: &mut [DMatrix<f64>; 11]| std::mem::replace(&mut mats[i], DMatrix::zeros(0, 0));
        Blocks {
            a: take(0, &mut mats),
            b: take(1, &mut mats),
            c: take(2, &mut mats),
            d: take(3, &mut mats),
            u_tilde: take(4, &mut mats),
            v_tilde: take(5, &mut mats),
            v_hat: take(6, &mut mats),
            w_hat: take(7, &mut mats),
            u_dot: take(8, &mut mats),
            v_dot: take(9, &mut mats),
            w_dot: take(10, &mut mats),
        }
    }
}

/// The 0/1 matrix `S` with `[vec U; vec V; vec W] = S x`.
///
/// Every row of `S` holds exactly one 1, so the map is stored as the source
/// variable of each stacked-factor position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureMap {
    n_vars: usize,
    var_of_full: Vec<usize>,
    /// Name of the factor/block tie each full position realizes, as
    /// `(block index, factor index)` with factor 0/1/2 for U/V/W.
    origin: Vec<(u8, u8)>,
}

impl StructureMap {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn full_len(&self) -> usize {
        self.var_of_full.len()
    }

    /// Source variable of each stacked-factor position.
    pub fn var_of_full(&self) -> &[usize] {
        &self.var_of_full
    }

    /// `S x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.var_of_full.iter().map(|&v| x[v]).collect()
    }

    /// `Sᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars];
        for (&v, yi) in self.var_of_full.iter().zip(y) {
            out[v] += yi;
        }
        out
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_vars];
        for &v in &self.var_of_full {
            out[v] += 1;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.full_len(), self.n_vars);
        for (row, &v) in self.var_of_full.iter().enumerate() {
            s[(row, v)] = 1.0;
        }
        s
    }
}

pub fn structure_map(layout: &GenCsLayout) -> StructureMap {
    let Shape { m, p, n } = layout.shape;
    let (s, t, rcs, r) = (layout.s, layout.t, layout.r_cs(), layout.r);
    let [mp, pn, nm] = layout.shape.tensor_dims();
    let off_v = mp * r;
    let off_w = (mp + pn) * r;
    let u_pos = |row: usize, col: usize| row + col * mp;
    let v_pos = |row: usize, col: usize| off_v + row + col * pn;
    let w_pos = |row: usize, col: usize| off_w + row + col * nm;

    let full_len = layout.full_len();
    let mut var_of_full = vec![usize::MAX; full_len];
    let mut origin = vec![(0u8, 0u8); full_len];
    let mut var = 0;
    let mut feed = |var: usize, pos: usize, block: usize, factor: u8| {
        debug_assert_eq!(var_of_full[pos], usize::MAX, "position fed twice");
        var_of_full[pos] = var;
        origin[pos] = (block as u8, factor);
    };

    // Shared m×m blocks: (block index, column offsets in U, V, W).
    let shared: [(usize, usize, [usize; 3]); 4] = [
        (0, s, [0, 0, 0]),
        (1, t, [s, s + t, s + 2 * t]),
        (2, t, [s + t, s + 2 * t, s]),
        (3, t, [s + 2 * t, s, s + t]),
    ];
    for (block, cols, [cu, cv, cw]) in shared {
        for col in 0..cols {
            for a2 in 0..m {
                for a1 in 0..m {
                    feed(var, u_pos(a1 + a2 * m, cu + col), block, 0);
                    feed(var, v_pos(a1 + a2 * p, cv + col), block, 1);
                    feed(var, w_pos(a1 + a2 * n, cw + col), block, 2);
                    var += 1;
                }
            }
        }
    }
    // U_tilde: U_i(:, m..p).
    for col in 0..rcs {
        for a2 in 0..p - m {
            for a1 in 0..m {
                feed(var, u_pos(a1 + (a2 + m) * m, col), 4, 0);
                var += 1;
            }
        }
    }
    // V_tilde: V_i(:, m..n).
    for col in 0..rcs {
        for b2 in 0..n - m {
            for b1 in 0..p {
                feed(var, v_pos(b1 + (b2 + m) * p, col), 5, 1);
                var += 1;
            }
        }
    }
    // V_hat: V_i(m..p, 0..m).
    for col in 0..rcs {
        for b2 in 0..m {
            for b1 in 0..p - m {
                feed(var, v_pos(b1 + m + b2 * p, col), 6, 1);
                var += 1;
            }
        }
    }
    // W_hat: W_i(m..n, :).
    for col in 0..rcs {
        for c2 in 0..m {
            for c1 in 0..n - m {
                feed(var, w_pos(c1 + m + c2 * n, col), 7, 2);
                var += 1;
            }
        }
    }
    for col in rcs..r {
        for row in 0..mp {
            feed(var, u_pos(row, col), 8, 0);
            var += 1;
        }
    }
    for col in rcs..r {
        for row in 0..pn {
            feed(var, v_pos(row, col), 9, 1);
            var += 1;
        }
    }
    for col in rcs..r {
        for row in 0..nm {
            feed(var, w_pos(row, col), 10, 2);
            var += 1;
        }
    }
    debug_assert_eq!(var, layout.n_vars());
    debug_assert!(var_of_full.iter().all(|&v| v != usize::MAX));
    StructureMap { n_vars: var, var_of_full, origin }
}

/// Assembles the full factor matrices from a structured point.
pub fn expand(point: &StructuredPoint) -> FactorTriple {
    expand_with(&point.layout.structure_map(), point)
}

pub(crate) fn expand_with(map: &StructureMap, point: &StructuredPoint) -> FactorTriple {
    let full = map.apply(&point.x);
    FactorTriple::from_stacked(point.layout.shape, point.layout.r, &full)
        .expect("structure map produces consistent factor sizes")
}

/// Inverse of [`expand`]. Fails with the first violated tie when the factors
/// do not follow the layout to within `tol`.
pub fn contract(factors: &FactorTriple, layout: &GenCsLayout, tol: f64) -> Result<StructuredPoint> {
    if factors.shape() != layout.shape || factors.rank() != layout.r {
        return Err(Error::DimensionMismatch(format!(
            "factors of {} with rank {} do not fit layout {} r={}",
            factors.shape(),
            factors.rank(),
            layout.shape,
            layout.r
        )));
    }
    let map = layout.structure_map();
    let full = factors.stacked();
    let mut x = vec![f64::NAN; map.n_vars];
    // Largest discrepancy per (block, factor) tie.
    let mut worst = [[0.0f64; 3]; 11];
    for (pos, &v) in map.var_of_full.iter().enumerate() {
        let value = full[pos];
        if x[v].is_nan() {
            x[v] = value;
        } else {
            let (block, factor) = map.origin[pos];
            let d = (x[v] - value).abs();
            let slot = &mut worst[block as usize][factor as usize];
            *slot = slot.max(d);
        }
    }
    const FACTORS: [&str; 3] = ["U", "V", "W"];
    for (block, per_factor) in worst.iter().enumerate() {
        for (factor, &d) in per_factor.iter().enumerate() {
            if d > tol {
                return Err(Error::StructureViolation {
                    tie: format!("block {} in U vs {}", BLOCK_NAMES[block], FACTORS[factor]),
                    discrepancy: d,
                });
            }
        }
    }
    StructuredPoint::new(*layout, x)
}
