//! Problem files: JSON documents with row-major matrices.
//!
//! ```json
//! {
//!   "name": "scalar",
//!   "dims": { "n": 1, "m": 1, "p": 1, "q": 1 },
//!   "A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "K": [[1.0]],
//!   "z": [-1.0], "v": [0.0],
//!   "P": [[0.5]],
//!   "steady_state": { "x_e": [0.5], "u_e": [0.5] },
//!   "tolerances": { "quad_tol": 1e-10 }
//! }
//! ```
//!
//! `P`, `steady_state` and `tolerances` are optional; unknown fields are
//! rejected.

use std::path::Path;

use dissicert::spectral::SpectralError;
use dissicert::{Ocp64, OcpInstance, SteadyState, SymmetricOperator, Tolerances};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateSpec {
    pub x_e: Vec<f64>,
    pub u_e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub dims: Dims,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state: Option<SteadyStateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub ocp: Ocp64,
    pub p: Option<SymmetricOperator<f64>>,
    pub steady_state: Option<SteadyState<f64>>,
    pub tolerances: Tolerances,
}

fn matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != nrows {
        return Err(CliError::Dimension(format!(
            "{name} has {} rows, expected {nrows}",
            rows.len()
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(CliError::Dimension(format!(
            "{name} row {i} has {} entries, expected {ncols}",
            row.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

fn vector(name: &str, values: &[f64], len: usize) -> Result<DVector<f64>, CliError> {
    if values.len() != len {
        return Err(CliError::Dimension(format!(
            "{name} has {} entries, expected {len}",
            values.len()
        )));
    }
    Ok(DVector::from_column_slice(values))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(CliError::from_json)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize") + "\n"
    }

    /// Checks dimensions and the symmetry of `P` and builds the model.
    pub fn validate(&self) -> Result<Problem, CliError> {
        let Dims { n, m, p, q } = self.dims;
        if n == 0 || m == 0 {
            return Err(CliError::Dimension("n and m must be positive".into()));
        }
        let a = matrix("A", &self.a, n, n)?;
        let b = matrix("B", &self.b, n, m)?;
        let c = matrix("C", &self.c, p, n)?;
        let k = matrix("K", &self.k, q, m)?;
        let z = vector("z", &self.z, n)?;
        let v = vector("v", &self.v, m)?;
        let tolerances = self.tolerances.unwrap_or_default();
        let p_op = match &self.p {
            Some(rows) => {
                let pm = matrix("P", rows, n, n)?;
                Some(SymmetricOperator::new(pm, tolerances.sym_tol).map_err(|e| match e {
                    SpectralError::NotSymmetric { asymmetry, tolerance } => CliError::Symmetry { asymmetry, tolerance },
                    other => CliError::Dimension(other.to_string()),
                })?)
            }
            None => None,
        };
        let steady_state = match &self.steady_state {
            Some(ss) => Some(SteadyState::new(vector("x_e", &ss.x_e, n)?, vector("u_e", &ss.u_e, m)?)),
            None => None,
        };
        let ocp = OcpInstance::new_deferred(a, b, c, k, z, v).map_err(|e| CliError::Dimension(e.to_string()))?;
        Ok(Problem {
            name: self.name.clone(),
            ocp,
            p: p_op,
            steady_state,
            tolerances,
        })
    }

    pub fn from_instance(name: impl Into<String>, ocp: &Ocp64) -> Self {
        Self {
            name: name.into(),
            dims: Dims {
                n: ocp.n(),
                m: ocp.m(),
                p: ocp.p(),
                q: ocp.q(),
            },
            a: rows_of(ocp.a()),
            b: rows_of(ocp.b()),
            c: rows_of(ocp.c()),
            k: rows_of(ocp.k()),
            z: ocp.z().iter().copied().collect(),
            v: ocp.v().iter().copied().collect(),
            p: None,
            steady_state: None,
            tolerances: None,
        }
    }
}

/// Applies a partial tolerance document on top of `base`. Unknown keys are
/// rejected.
pub fn apply_overrides(base: Tolerances, text: &str) -> Result<Tolerances, CliError> {
    let overrides: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(text).map_err(CliError::from_json)?;
    let mut merged = serde_json::to_value(base).expect("tolerances serialize");
    let obj = merged.as_object_mut().expect("tolerances serialize to an object");
    for (key, value) in overrides {
        obj.insert(key, value);
    }
    serde_json::from_value(merged).map_err(|e| CliError::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })
}
