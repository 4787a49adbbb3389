//! JSON persistence of decompositions.
//!
//! A file holds `m, p, n, r, s, t` (`s = t = −1` when unstructured), the
//! factor matrices `U, V, W` as lists of rows, the `practical` flag and a
//! free-form `provenance` object. Integer-valued entries are written without
//! a fractional part. The residual norm is always recomputed on load.

use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{json, Map, Number, Value};

use crate::error::{Error, Result};
use crate::layout::{contract, GenCsLayout};
use crate::mmt::{build_mmt, reconstruct, FactorTriple, Shape};

/// Tolerance used when checking that stored factors follow their declared
/// structure.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PdRecord {
    pub factors: FactorTriple,
    /// `(s, t)` when the factors follow a generalized cyclic-symmetric layout.
    pub structure: Option<(usize, usize)>,
    pub residual_norm: f64,
    pub practical: bool,
    pub provenance: Map<String, Value>,
}

impl PdRecord {
    /// Wraps factors, computing the residual norm and the practical flag.
    pub fn new(
        factors: FactorTriple,
        structure: Option<(usize, usize)>,
        provenance: Map<String, Value>,
    ) -> Result<Self> {
        let shape = factors.shape();
        if let Some((s, t)) = structure {
            GenCsLayout::new(shape, factors.rank(), s, t)?;
        }
        let tensor = build_mmt(shape.m, shape.p, shape.n)?;
        let residual_norm = reconstruct(&factors).distance(tensor.entries());
        let practical = factors.is_practical();
        Ok(PdRecord { factors, structure, residual_norm, practical, provenance })
    }

    pub fn shape(&self) -> Shape {
        self.factors.shape()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// The declared layout, unstructured when no `(s, t)` is recorded.
    pub fn layout(&self) -> Result<GenCsLayout> {
        match self.structure {
            Some((s, t)) => GenCsLayout::new(self.shape(), self.rank(), s, t),
            None => GenCsLayout::unstructured(self.shape(), self.rank()),
        }
    }

    /// Checks that the factors follow the declared structure.
    pub fn check_structure(&self) -> Result<()> {
        if self.structure.is_some() {
            contract(&self.factors, &self.layout()?, STRUCTURE_TOL)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let Shape { m, p, n } = self.shape();
        let (s, t) = match self.structure {
            Some((s, t)) => (s as i64, t as i64),
            None => (-1, -1),
        };
        json!({
            "m": m,
            "p": p,
            "n": n,
            "r": self.rank(),
            "s": s,
            "t": t,
            "U": rows_json(self.factors.u()),
            "V": rows_json(self.factors.v()),
            "W": rows_json(self.factors.w()),
            "practical": self.practical,
            "residual_norm": number(self.residual_norm),
            "provenance": Value::Object(self.provenance.clone()),
        })
    }

    /// Pretty JSON with fixed key order and one matrix row per line.
    pub fn to_json_string(&self) -> String {
        let value = self.to_json();
        let keys = ["m", "p", "n", "r", "s", "t", "practical", "residual_norm", "U", "V", "W", "provenance"];
        let mut out = String::from("{\n");
        for (i, key) in keys.iter().enumerate() {
            let v = &value[*key];
            let body = match v {
                Value::Array(rows) if rows.is_empty() => "[]".to_string(),
                Value::Array(rows) => {
                    let lines: Vec<String> = rows.iter().map(|r| format!("    {r}")).collect();
                    format!("[\n{}\n  ]", lines.join(",\n"))
                }
                Value::Object(_) => {
                    serde_json::to_string_pretty(v).expect("JSON values serialize").replace('\n', "\n  ")
                }
                _ => v.to_string(),
            };
            let sep = if i + 1 < keys.len() { "," } else { "" };
            out.push_str(&format!("  \"{key}\": {body}{sep}\n"));
        }
        out.push_str("}\n");
        out
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Format("top level must be an object".into()))?;
        let dim = |key: &str| -> Result<usize> {
            obj.get(key)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("`{key}` must be a nonnegative integer")))
        };
        let signed = |key: &str| -> Result<i64> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(-1),
                Some(v) => v.as_i64().ok_or_else(|| Error::Format(format!("`{key}` must be an integer"))),
            }
        };
        let shape = Shape::new(dim("m")?, dim("p")?, dim("n")?)?;
        let r = dim("r")?;
        let [a, b, c] = shape.tensor_dims();
        let u = matrix_from_json(obj.get("U"), a, r, "U")?;
        let v = matrix_from_json(obj.get("V"), b, r, "V")?;
        let w = matrix_from_json(obj.get("W"), c, r, "W")?;
        let factors = FactorTriple::new(shape, u, v, w)?;
        let structure = match (signed("s")?, signed("t")?) {
            (s, t) if s < 0 && t < 0 => None,
            (s, t) if s >= 0 && t >= 0 => Some((s as usize, t as usize)),
            (s, t) => return Err(Error::Format(format!("s={s}, t={t}: both or neither must be −1"))),
        };
        let provenance = match obj.get("provenance") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(map)) => map.clone(),
            Some(_) => return Err(Error::Format("`provenance` must be an object".into())),
        };
        let claimed_practical = obj.get("practical").and_then(Value::as_bool).unwrap_or(false);
        let record = PdRecord::new(factors, structure, provenance)?;
        if claimed_practical && !record.practical {
            return Err(Error::Format("file claims practical but has entries outside {-1, 0, 1}".into()));
        }
        Ok(record)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Integral values become JSON integers, everything else a float.
fn number(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::Number(Number::from(x as i64))
    } else {
        Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
    }
}

fn rows_json(mat: &DMatrix<f64>) -> Value {
    Value::Array((0..mat.nrows()).map(|i| Value::Array(mat.row(i).iter().map(|&x| number(x)).collect())).collect())
}

fn matrix_from_json(value: Option<&Value>, rows: usize, cols: usize, name: &str) -> Result<DMatrix<f64>> {
    let list =
        value.and_then(Value::as_array).ok_or_else(|| Error::Format(format!("`{name}` must be a list of rows")))?;
    if list.len() != rows {
        return Err(Error::Format(format!("`{name}` has {} rows, expected {rows}", list.len())));
    }
    let mut mat = DMatrix::zeros(rows, cols);
    for (i, row) in list.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| Error::Format(format!("`{name}` row {i} is not a list")))?;
        if row.len() != cols {
            return Err(Error::Format(format!("`{name}` row {i} has {} entries, expected {cols}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            mat[(i, j)] = x.as_f64().ok_or_else(|| Error::Format(format!("`{name}`[{i}][{j}] is not a number")))?;
        }
    }
    Ok(mat)
}
