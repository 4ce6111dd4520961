//! Spectral Galerkin truncation of the 1-D Dirichlet heat equation on (0, 1).
//!
//! In the sine basis `φ_k(ξ) = √2 sin(kπξ)` the Laplacian is diagonal, so
//! `A = diag(−κ k² π²)` for `k = 1..n_modes`.

use std::fmt;
use std::str::FromStr;

use dissicert::{Ocp64, OcpInstance};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Actuation: either the first `k` modes are driven independently, or one
/// input acts through a profile given by its sine coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlProfile {
    FirstK(usize),
    Coefficients(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputSpec {
    Full,
    FirstK(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatInstanceSpec {
    pub n_modes: usize,
    pub control_profile: ControlProfile,
    pub output: OutputSpec,
    pub diffusion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

fn parse_first(s: &str) -> Option<usize> {
    s.strip_prefix("first_")?.parse().ok()
}

impl FromStr for ControlProfile {
    type Err = String;

    /// `first_<k>` or `coefficients:<c1>,<c2>,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(k) = parse_first(s) {
            return Ok(ControlProfile::FirstK(k));
        }
        if let Some(list) = s.strip_prefix("coefficients:") {
            let coeffs = list
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coefficient {c:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(ControlProfile::Coefficients(coeffs));
        }
        Err(format!("expected first_<k> or coefficients:<list>, got {s:?}"))
    }
}

impl FromStr for OutputSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(OutputSpec::Full);
        }
        parse_first(s)
            .map(OutputSpec::FirstK)
            .ok_or_else(|| format!("expected full or first_<k>, got {s:?}"))
    }
}

impl fmt::Display for OutputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputSpec::Full => write!(f, "full"),
            OutputSpec::FirstK(k) => write!(f, "first_{k}"),
        }
    }
}

impl HeatInstanceSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.n_modes;
        let bad = |msg: String| Err(CliError::Usage(msg));
        if n == 0 {
            return bad("n_modes must be at least 1".into());
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return bad(format!("diffusion must be positive, got {}", self.diffusion));
        }
        match &self.control_profile {
            ControlProfile::FirstK(k) if *k == 0 || *k > n => {
                return bad(format!("control first_{k} needs 1 ≤ k ≤ {n}"));
            }
            ControlProfile::Coefficients(c) if c.is_empty() || c.len() > n => {
                return bad(format!("control profile needs 1 to {n} coefficients, got {}", c.len()));
            }
            _ => {}
        }
        if let OutputSpec::FirstK(k) = self.output {
            if k == 0 || k > n {
                return bad(format!("output first_{k} needs 1 ≤ k ≤ {n}"));
            }
        }
        let m = self.inputs();
        if let Some(z) = &self.z {
            if z.len() != n {
                return bad(format!("z has {} entries, expected {n}", z.len()));
            }
        }
        if let Some(v) = &self.v {
            if v.len() != m {
                return bad(format!("v has {} entries, expected {m}", v.len()));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        match &self.control_profile {
            ControlProfile::FirstK(k) => *k,
            ControlProfile::Coefficients(_) => 1,
        }
    }

    pub fn name(&self) -> String {
        let control = match &self.control_profile {
            ControlProfile::FirstK(k) => format!("first_{k}"),
            ControlProfile::Coefficients(_) => "profile".to_string(),
        };
        format!("heat-{}-{}-{}", self.n_modes, control, self.output)
    }
}

pub fn generate_heat_instance(spec: &HeatInstanceSpec) -> Result<Ocp64, CliError> {
    spec.validate()?;
    let n = spec.n_modes;
    let m = spec.inputs();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let k = (i + 1) as f64;
            -spec.diffusion * k * k * pi2
        } else {
            0.0
        }
    });
    let b = match &spec.control_profile {
        ControlProfile::FirstK(k) => DMatrix::from_fn(n, *k, |i, j| if i == j { 1.0 } else { 0.0 }),
        ControlProfile::Coefficients(c) => DMatrix::from_fn(n, 1, |i, _| c.get(i).copied().unwrap_or(0.0)),
    };
    let c = match spec.output {
        OutputSpec::Full => DMatrix::identity(n, n),
        OutputSpec::FirstK(k) => DMatrix::from_fn(k, n, |i, j| if i == j { 1.0 } else { 0.0 }),
    };
    let z = spec.z.as_ref().map_or_else(|| DVector::zeros(n), |z| DVector::from_column_slice(z));
    let v = spec.v.as_ref().map_or_else(|| DVector::zeros(m), |v| DVector::from_column_slice(v));
    OcpInstance::new_deferred(a, b, c, DMatrix::identity(m, m), z, v).map_err(|e| CliError::Dimension(e.to_string()))
}
