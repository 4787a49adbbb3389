//! Known decompositions used as references.
//!
//! Blocks are written row by row, rows separated by `;`.

use nalgebra::DMatrix;

use crate::layout::{expand, Blocks, GenCsLayout, StructuredPoint};
use crate::mmt::{naive_pd, FactorTriple, Shape};

fn mat(text: &str) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| r.split_whitespace().map(|x| x.parse().expect("numeric fixture entry")).collect())
        .collect();
    let cols = rows[0].len();
    assert!(rows.iter().all(|r| r.len() == cols), "ragged fixture matrix");
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn empty(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::zeros(rows, cols)
}

fn shape(m: usize, p: usize, n: usize) -> Shape {
    Shape::new(m, p, n).expect("fixture shapes are valid")
}

/// Strassen's algorithm. Bases: `vec(A) = [a11 a21 a12 a22]`,
/// `vec(B) = [b11 b21 b12 b22]`, third mode `vec(Cᵀ) = [c11 c12 c21 c22]`.
pub fn strassen() -> FactorTriple {
    let u = mat("1 0 1 0 1 -1 0; 0 1 0 0 0 1 0; 0 0 0 0 1 0 1; 1 1 0 1 0 0 -1");
    let v = mat("1 1 0 -1 0 1 0; 0 0 0 1 0 0 1; 0 0 1 0 0 1 0; 1 0 -1 0 1 0 1");
    let w = mat("1 0 0 1 -1 0 1; 0 0 1 0 1 0 0; 0 1 0 1 0 0 0; 1 -1 1 0 0 1 0");
    FactorTriple::new(shape(2, 2, 2), u, v, w).expect("consistent fixture")
}

/// Strassen's columns reordered to the cyclic-symmetric layout `(s, t) = (1, 2)`.
pub fn strassen_cs() -> (FactorTriple, GenCsLayout) {
    let f = strassen().select_columns(&[0, 1, 3, 6, 4, 2, 5]).expect("valid columns");
    let layout = GenCsLayout::new(f.shape(), 7, 1, 2).expect("valid layout");
    (f, layout)
}

/// The standard algorithm for `T_222` with eight products.
pub fn naive_222() -> FactorTriple {
    naive_pd(shape(2, 2, 2)).expect("small shape")
}

fn build(layout: GenCsLayout, blocks: Blocks) -> StructuredPoint {
    StructuredPoint::from_blocks(layout, &blocks).expect("fixture blocks fit their layout")
}

/// A practical cyclic-symmetric rank-7 decomposition of `T_222` with
/// `(s, t) = (4, 1)`, found by search and discretization.
pub fn t222_r7_cs41() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(2, 2, 2), 7, 4, 1).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("0 0 0 1; -1 0 1 0; 0 1 -1 0; 1 1 -1 0"),
            b: mat("0; 1; 0; 0"),
            c: mat("0; 0; 1; 0"),
            d: mat("1; 1; -1; -1"),
            u_tilde: empty(0, 7),
            v_tilde: empty(0, 7),
            v_hat: empty(0, 7),
            w_hat: empty(0, 7),
            u_dot: empty(4, 0),
            v_dot: empty(4, 0),
            w_dot: empty(4, 0),
        },
    )
}

/// Practical rank-11 decomposition of `T_223` with `(s, t) = (2, 2)`.
pub fn t223_r11() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(2, 2, 3), 11, 2, 2).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("0 1; 0 0; 0 0; 1 0"),
            b: mat("0 0; 0 0; -1 -1; 0 0"),
            c: mat("-1 0; 1 -1; -1 0; 0 0"),
            d: mat("0 0; 1 1; 0 -1; 0 1"),
            u_tilde: empty(0, 8),
            v_tilde: mat("0 0 0 0 0 0 1 -1; 0 0 0 0 0 0 -1 1"),
            v_hat: empty(0, 8),
            w_hat: mat("0 0 -1 0 0 0 0 -1; 0 0 -1 0 0 0 0 -1"),
            u_dot: mat("0 1 0; 0 -1 -1; -1 1 0; 1 -1 -1"),
            v_dot: mat("0 0 0; 0 0 1; 0 0 0; 0 0 0; -1 -1 0; 1 0 -1"),
            w_dot: mat("0 0 0; 0 0 0; 0 -1 1; 1 0 0; 0 0 0; 1 0 1"),
        },
    )
}

/// Practical rank-14 decomposition of `T_224` with `(s, t) = (3, 1)`.
pub fn t224_r14() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(2, 2, 4), 14, 3, 1).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("1 1 0; 1 0 0; 0 -1 0; 0 0 1"),
            b: mat("-1; -1; 1; 1"),
            c: mat("0; 0; 1; 0"),
            d: mat("0; 1; 0; 0"),
            u_tilde: empty(0, 6),
            v_tilde: empty(4, 6),
            v_hat: empty(0, 6),
            w_hat: empty(4, 6),
            u_dot: mat("0 0 1 1 1 1 0 -1; -1 0 0 1 1 0 0 0; 0 -1 0 -1 0 1 0 0; -1 -1 0 0 0 0 -1 1"),
            v_dot: mat("0 0 0 -1 0 0 0 0; 0 0 0 -1 0 0 0 0; 0 0 0 1 0 0 0 0; 0 0 0 0 0 0 0 0; \
                 0 0 -1 0 -1 0 0 0; 0 -1 1 0 0 -1 0 1; 1 0 0 0 1 0 1 -1; 0 1 0 0 0 0 -1 0"),
            w_dot: mat("0 0 0 1 0 0 0 0; 0 0 0 1 0 0 0 0; 0 0 -1 0 0 -1 0 0; 0 -1 0 0 0 -1 -1 1; \
                 0 0 0 -1 0 0 0 0; 0 0 0 0 0 0 0 0; -1 0 1 0 -1 0 0 1; -1 0 0 0 0 0 1 0"),
        },
    )
}

/// Practical rank-15 decomposition of `T_233` with `(s, t) = (6, 1)`.
pub fn t233_r15() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(2, 3, 3), 15, 6, 1).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("0 1 0 0 0 0; 0 0 -1 0 1 0; 0 0 0 1 -1 0; 0 0 1 1 -1 0"),
            b: mat("0; 0; 1; 0"),
            c: mat("1; 1; -1; -1"),
            d: mat("0; 1; 0; 0"),
            u_tilde: mat("1 0 0 0 0 1 0 0 0; 1 0 0 0 0 0 0 0 0"),
            v_tilde: mat("-1 -1 0 0 0 0 0 0 0; 0 0 1 1 -1 0 -1 0 -1; -1 0 0 0 0 -1 0 0 0"),
            v_hat: mat("0 0 0 0 0 1 0 0 1; 0 1 0 1 -1 -1 1 1 -1"),
            w_hat: mat("0 0 0 0 0 -1 0 0 0; -1 0 0 0 0 1 0 0 0"),
            u_dot: mat("0 1 1 0 0 0; -1 0 1 1 1 1; 0 1 0 0 -1 0; 0 0 0 0 0 1; 1 -1 -1 0 0 0; 1 0 -1 -1 -1 -1"),
            v_dot: mat("0 0 0 0 0 0; 0 0 0 0 0 0; -1 0 0 1 0 0; 0 0 0 0 0 0; 0 0 0 0 0 0; \
                 1 1 -1 -1 1 0; -1 0 1 0 0 0; 0 0 0 1 -1 1; 0 0 0 0 0 0"),
            w_dot: mat("-1 0 1 1 1 0; 0 -1 0 0 0 0; -1 1 1 1 1 0; 0 0 0 -1 -1 0; 0 0 0 0 -1 -1; 1 0 0 -1 0 1"),
        },
    )
}

/// Practical rank-18 decomposition of `T_225` with `(s, t) = (6, 1)`.
pub fn t225_r18() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(2, 2, 5), 18, 6, 1).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("1 -1 1 0 0 0; 0 1 -1 0 0 0; 1 -1 0 0 0 0; 0 0 0 1 1 -1"),
            b: mat("0; 1; 0; 0"),
            c: mat("1; -1; 1; -1"),
            d: mat("0; 0; -1; 0"),
            u_tilde: empty(0, 9),
            v_tilde: mat("0 0 0 0 0 0 0 0 0; 0 0 0 -1 0 1 0 0 0; 0 0 0 0 0 0 0 0 0; \
                 0 0 0 -1 0 1 0 0 0; 0 0 0 0 0 0 0 0 0; 0 0 0 0 -1 1 0 0 0"),
            v_hat: empty(0, 9),
            w_hat: mat("0 0 0 0 0 0 0 0 0; 0 0 0 0 -1 1 0 0 0; 0 0 0 -1 0 1 0 0 0; \
                 0 0 0 0 0 0 0 0 0; 0 0 0 0 1 -1 0 0 0; 0 0 0 1 0 -1 0 0 0"),
            u_dot: mat("0 1 0 1 0 0 -1 -1 1; 0 0 0 0 1 1 0 0 1; 1 0 1 -1 0 0 1 0 -1; 1 0 1 -1 0 0 0 0 -1"),
            v_dot: mat("0 0 0 0 0 0 0 0 0; 0 0 0 0 0 0 0 0 0; 0 0 0 0 0 0 0 0 0; 0 0 0 0 0 0 0 0 0; \
                 0 1 0 0 -1 0 0 0 0; 0 1 0 -1 0 0 -1 0 0; 0 0 1 1 -1 0 0 0 1; 0 0 1 0 0 0 0 0 0; \
                 0 0 1 1 0 -1 0 -1 1; -1 0 1 0 0 0 0 0 0"),
            w_dot: mat("0 0 0 0 0 0 0 0 0; 0 0 0 0 0 0 0 0 0; 0 1 0 0 0 0 -1 0 0; 1 0 1 1 0 0 1 -1 0; \
                 -1 0 0 0 0 0 0 1 0; 0 0 0 0 0 0 0 0 0; 0 0 0 0 0 0 0 0 0; 0 0 0 1 -1 -1 1 0 -1; \
                 0 0 0 -1 0 1 -1 0 1; 0 0 0 0 0 -1 0 0 0"),
        },
    )
}

/// Practical rank-23 decomposition of `T_333` whose first 11 columns are
/// symmetric: `(s, t) = (11, 0)`.
pub fn t333_r23() -> StructuredPoint {
    let layout = GenCsLayout::new(shape(3, 3, 3), 23, 11, 0).expect("valid layout");
    build(
        layout,
        Blocks {
            a: mat("1 0 0 0 0 0 0 0 0 0 0; 0 0 0 1 0 0 0 0 -1 0 0; 0 -1 -1 0 1 0 0 0 0 0 1; \
                 0 0 -1 0 0 1 -1 -1 1 0 1; 0 0 0 1 0 0 1 0 -1 0 0; 0 -1 -1 0 1 1 0 -1 0 0 1; \
                 0 0 0 0 0 0 0 1 0 0 -1; 0 0 1 0 -1 -1 0 0 0 1 0; 0 1 1 0 -1 -1 0 1 0 1 -1"),
            b: empty(9, 0),
            c: empty(9, 0),
            d: empty(9, 0),
            u_tilde: empty(0, 11),
            v_tilde: empty(0, 11),
            v_hat: empty(0, 11),
            w_hat: empty(0, 11),
            u_dot: mat("-1 0 0 0 0 -1 0 0 0 0 0 0; 1 0 0 1 0 0 -1 0 -1 0 0 0; 0 0 0 1 0 -1 0 0 -1 -1 0 0; \
                 -1 0 0 0 0 -1 0 0 0 0 -1 1; 1 0 0 1 0 0 0 0 0 0 0 0; 0 0 0 1 0 -1 0 1 0 0 -1 0; \
                 1 0 1 0 1 1 0 0 0 0 0 0; -1 1 -1 -1 0 0 0 0 0 0 0 0; 0 0 0 -1 0 1 0 0 0 0 0 0"),
            v_dot: mat("0 0 0 0 0 0 -1 0 0 1 0 0; 0 0 0 0 0 0 1 1 0 0 -1 1; 0 0 0 0 1 0 0 1 0 1 -1 0; \
                 1 0 -1 0 0 0 -1 0 0 1 0 0; 0 0 0 0 0 0 1 1 0 0 0 0; 0 1 -1 0 0 0 0 1 0 1 0 0; \
                 0 0 0 0 0 -1 1 0 1 -1 0 0; 0 0 0 -1 0 0 -1 -1 -1 0 0 0; 0 0 0 0 0 0 0 -1 0 -1 0 0"),
            w_dot: mat("0 0 0 0 1 0 0 0 0 0 0 1; -1 1 -1 0 0 0 0 0 0 0 0 -1; 0 1 -1 0 1 1 0 0 0 0 0 0; \
                 0 0 0 0 1 0 1 0 -1 0 0 1; 0 1 0 0 0 0 0 0 0 0 0 -1; 0 1 0 -1 1 0 0 0 -1 0 0 0; \
                 0 0 0 0 -1 0 0 0 0 -1 1 -1; 0 -1 0 0 0 0 0 1 0 0 -1 1; 0 -1 0 0 -1 0 0 0 0 0 0 0"),
        },
    )
}

/// All structured reference decompositions, by name.
pub fn structured() -> Vec<(&'static str, StructuredPoint)> {
    vec![
        ("t222_r7_s4_t1", t222_r7_cs41()),
        ("t223_r11_s2_t2", t223_r11()),
        ("t224_r14_s3_t1", t224_r14()),
        ("t233_r15_s6_t1", t233_r15()),
        ("t225_r18_s6_t1", t225_r18()),
        ("t333_r23_s11_t0", t333_r23()),
    ]
}

/// Every reference decomposition expanded to factor matrices.
pub fn all_factors() -> Vec<(&'static str, FactorTriple)> {
    let mut out = vec![("strassen", strassen()), ("strassen_cs", strassen_cs().0), ("naive_222", naive_222())];
    out.extend(structured().into_iter().map(|(name, p)| (name, expand(&p))));
    out
}
