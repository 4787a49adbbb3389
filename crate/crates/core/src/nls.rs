//! Residual, Jacobian and Gauss–Newton quantities of the least-squares cost
//! `f(x) = ½‖F(x) − vec(T)‖²` in structured variables.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::layout::{expand_with, GenCsLayout, StructureMap, StructuredPoint};
use crate::mmt::{FactorTriple, Mmt};

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// `vec(reconstruction) − vec(T)`, column-major.
    pub value: Vec<f64>,
    /// `½‖value‖²`.
    pub cost: f64,
}

impl Residual {
    fn from_value(value: Vec<f64>) -> Self {
        let cost = 0.5 * value.iter().map(|v| v * v).sum::<f64>();
        Residual { value, cost }
    }

    pub fn norm(&self) -> f64 {
        (2.0 * self.cost).sqrt()
    }
}

/// A fitting problem: one tensor, one layout, the precomputed structure map.
#[derive(Debug, Clone)]
pub struct NlsProblem {
    tensor: Mmt,
    layout: GenCsLayout,
    map: StructureMap,
}

impl NlsProblem {
    pub fn new(tensor: &Mmt, layout: &GenCsLayout) -> Result<Self> {
        if tensor.shape() != layout.shape() {
            return Err(Error::DimensionMismatch(format!(
                "layout is for {} but the tensor is {}",
                layout.shape(),
                tensor.shape()
            )));
        }
        Ok(NlsProblem { tensor: tensor.clone(), layout: *layout, map: layout.structure_map() })
    }

    pub fn tensor(&self) -> &Mmt {
        &self.tensor
    }

    pub fn layout(&self) -> &GenCsLayout {
        &self.layout
    }

    pub fn map(&self) -> &StructureMap {
        &self.map
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    pub fn rows(&self) -> usize {
        self.layout.shape().tensor_len()
    }

    pub fn factors(&self, x: &[f64]) -> FactorTriple {
        let point = StructuredPoint::new(self.layout, x.to_vec()).expect("x has n_vars entries");
        expand_with(&self.map, &point)
    }

    pub fn residual(&self, x: &[f64]) -> Residual {
        let f = self.factors(x);
        Residual::from_value(factor_residual(&f, &self.tensor))
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.residual(x).cost
    }

    /// Explicit Jacobian `J_full · S` of the residual.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let f = self.factors(x);
        let [di, dj, dk] = self.layout.shape().tensor_dims();
        let r = f.rank();
        let off_v = di * r;
        let off_w = (di + dj) * r;
        let var = self.map.var_of_full();
        let mut jac = DMatrix::zeros(di * dj * dk, self.n_vars());
        let (u, v, w) = (f.u(), f.v(), f.w());
        for l in 0..r {
            for k in 0..dk {
                for j in 0..dj {
                    for i in 0..di {
                        let row = i + di * (j + dj * k);
                        jac[(row, var[i + l * di])] += v[(j, l)] * w[(k, l)];
                        jac[(row, var[off_v + j + l * dj])] += u[(i, l)] * w[(k, l)];
                        jac[(row, var[off_w + k + l * dk])] += u[(i, l)] * v[(j, l)];
                    }
                }
            }
        }
        jac
    }

    /// Gradient `Jᵀ(F − T)` and cost at `x`.
    pub fn gradient(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let f = self.factors(x);
        let res = factor_residual(&f, &self.tensor);
        let cost = 0.5 * res.iter().map(|v| v * v).sum::<f64>();
        (self.map.apply_transpose(&full_gradient(&f, &res)), cost)
    }

    /// Gauss–Newton matrix `JᵀJ`, gradient `Jᵀ(F − T)` and cost at `x`,
    /// assembled from Gram matrices of the factors without forming `J`.
    pub fn normal_equations(&self, x: &[f64]) -> (DMatrix<f64>, Vec<f64>, f64) {
        let f = self.factors(x);
        let res = factor_residual(&f, &self.tensor);
        let cost = 0.5 * res.iter().map(|v| v * v).sum::<f64>();
        let grad_full = full_gradient(&f, &res);
        let grad = self.map.apply_transpose(&grad_full);

        let (u, v, w) = (f.u(), f.v(), f.w());
        let r = f.rank();
        let [di, dj, dk] = self.layout.shape().tensor_dims();
        let (guu, gvv, gww) = (u.tr_mul(u), v.tr_mul(v), w.tr_mul(w));
        let var = self.map.var_of_full();
        let off_v = di * r;
        let off_w = (di + dj) * r;
        let nv = self.n_vars();
        let mut h = DMatrix::<f64>::zeros(nv, nv);

        // Diagonal factor blocks: δ_ab (G1 ∘ G2)(l, l').
        let diag_block = |h: &mut DMatrix<f64>, off: usize, rows: usize, g1: &DMatrix<f64>, g2: &DMatrix<f64>| {
            for l in 0..r {
                for lp in 0..r {
                    let val = g1[(l, lp)] * g2[(l, lp)];
                    for a in 0..rows {
                        h[(var[off + a + l * rows], var[off + a + lp * rows])] += val;
                    }
                }
            }
        };
        diag_block(&mut h, 0, di, &gvv, &gww);
        diag_block(&mut h, off_v, dj, &guu, &gww);
        diag_block(&mut h, off_w, dk, &guu, &gvv);

        // Cross blocks between factors X (rows ra) and Y (rows rb) with the
        // remaining factor's Gram matrix G: X(a, l') Y(b, l) G(l, l').
        let cross = |h: &mut DMatrix<f64>,
                     (ox, x_mat, ra): (usize, &DMatrix<f64>, usize),
                     (oy, y_mat, rb): (usize, &DMatrix<f64>, usize),
                     g: &DMatrix<f64>| {
            for l in 0..r {
                for lp in 0..r {
                    let glp = g[(l, lp)];
                    if glp == 0.0 {
                        continue;
                    }
                    for b in 0..rb {
                        let yb = y_mat[(b, l)] * glp;
                        if yb == 0.0 {
                            continue;
                        }
                        let col = var[oy + b + lp * rb];
                        for a in 0..ra {
                            let val = x_mat[(a, lp)] * yb;
                            let row = var[ox + a + l * ra];
                            h[(row, col)] += val;
                            h[(col, row)] += val;
                        }
                    }
                }
            }
        };
        cross(&mut h, (0, u, di), (off_v, v, dj), &gww);
        cross(&mut h, (0, u, di), (off_w, w, dk), &gvv);
        cross(&mut h, (off_v, v, dj), (off_w, w, dk), &guu);
        (h, grad, cost)
    }
}

/// `vec(Σ u∘v∘w) − vec(T)`.
pub(crate) fn factor_residual(f: &FactorTriple, tensor: &Mmt) -> Vec<f64> {
    let [di, dj, dk] = f.shape().tensor_dims();
    let mut out: Vec<f64> = tensor.entries().as_slice().iter().map(|t| -t).collect();
    let (u, v, w) = (f.u(), f.v(), f.w());
    for l in 0..f.rank() {
        let (uc, vc, wc) = (u.column(l), v.column(l), w.column(l));
        for k in 0..dk {
            for j in 0..dj {
                let vw = vc[j] * wc[k];
                let base = di * (j + dj * k);
                for i in 0..di {
                    out[base + i] += uc[i] * vw;
                }
            }
        }
    }
    out
}

/// `J_fullᵀ res` in stacked-factor coordinates.
fn full_gradient(f: &FactorTriple, res: &[f64]) -> Vec<f64> {
    let [di, dj, dk] = f.shape().tensor_dims();
    let r = f.rank();
    let (u, v, w) = (f.u(), f.v(), f.w());
    let mut g = vec![0.0; (di + dj + dk) * r];
    let (gu, rest) = g.split_at_mut(di * r);
    let (gv, gw) = rest.split_at_mut(dj * r);
    for l in 0..r {
        let (uc, vc, wc) = (u.column(l), v.column(l), w.column(l));
        for k in 0..dk {
            for j in 0..dj {
                let base = di * (j + dj * k);
                let vw = vc[j] * wc[k];
                let mut dot_u = 0.0;
                for i in 0..di {
                    let rv = res[base + i];
                    gu[i + l * di] += rv * vw;
                    dot_u += rv * uc[i];
                }
                gv[j + l * dj] += dot_u * wc[k];
                gw[k + l * dk] += dot_u * vc[j];
            }
        }
    }
    g
}

/// Residual of the structured point against the tensor.
pub fn residual(point: &StructuredPoint, tensor: &Mmt) -> Result<Residual> {
    Ok(NlsProblem::new(tensor, point.layout())?.residual(point.x()))
}

/// Analytic Jacobian with respect to the structured variables, of size
/// `(mp·pn·mn) × n_vars`.
pub fn jacobian(point: &StructuredPoint, tensor: &Mmt) -> Result<DMatrix<f64>> {
    Ok(NlsProblem::new(tensor, point.layout())?.jacobian(point.x()))
}

/// Jacobian of the residual with respect to `[vec U; vec V; vec W]`.
pub fn full_jacobian(factors: &FactorTriple) -> DMatrix<f64> {
    let [di, dj, dk] = factors.shape().tensor_dims();
    let r = factors.rank();
    let (u, v, w) = (factors.u(), factors.v(), factors.w());
    let mut jac = DMatrix::zeros(di * dj * dk, (di + dj + dk) * r);
    for l in 0..r {
        for k in 0..dk {
            for j in 0..dj {
                for i in 0..di {
                    let row = i + di * (j + dj * k);
                    jac[(row, i + l * di)] = v[(j, l)] * w[(k, l)];
                    jac[(row, di * r + j + l * dj)] = u[(i, l)] * w[(k, l)];
                    jac[(row, (di + dj) * r + k + l * dk)] = u[(i, l)] * v[(j, l)];
                }
            }
        }
    }
    jac
}

/// Representatives `(i, j, k)` of the cyclic orbits of `[0, N)³`: the
/// diagonal plus every triple with `i ≤ j` and `i < k`.
pub fn cyclic_orbit_representatives(dim: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity((dim * dim * dim - dim) / 3 + dim);
    for i in 0..dim {
        for j in i..dim {
            for k in i + 1..dim {
                out.push([i, j, k]);
            }
        }
    }
    for i in 0..dim {
        out.push([i, i, i]);
    }
    out
}

fn require_full_cs(layout: &GenCsLayout) -> Result<()> {
    if !layout.is_full_cs() {
        return Err(Error::InvalidLayout(format!(
            "the orbit-reduced residual needs m = p = n and s + 3t = r, got {} r={} s={} t={}",
            layout.shape(),
            layout.r(),
            layout.s(),
            layout.t()
        )));
    }
    Ok(())
}

/// Residual restricted to one entry per cyclic orbit, valid for square
/// shapes whose every column is cyclic-symmetric. It has
/// `(m⁶ − m²)/3 + m²` rows and vanishes iff the full residual does.
pub fn reduced_residual_cs(point: &StructuredPoint, tensor: &Mmt) -> Result<Residual> {
    require_full_cs(point.layout())?;
    let full = residual(point, tensor)?;
    let dim = tensor.shape().tensor_dims()[0];
    let value =
        cyclic_orbit_representatives(dim).into_iter().map(|[i, j, k]| full.value[i + dim * (j + dim * k)]).collect();
    Ok(Residual::from_value(value))
}

/// Rows of [`jacobian`] matching [`reduced_residual_cs`].
pub fn reduced_jacobian_cs(point: &StructuredPoint, tensor: &Mmt) -> Result<DMatrix<f64>> {
    require_full_cs(point.layout())?;
    let jac = jacobian(point, tensor)?;
    let dim = tensor.shape().tensor_dims()[0];
    let rows: Vec<usize> =
        cyclic_orbit_representatives(dim).into_iter().map(|[i, j, k]| i + dim * (j + dim * k)).collect();
    Ok(jac.select_rows(&rows))
}
