//! Reports emitted by the commands, in machine (JSON) and human renderings.

use std::fmt::Write as _;

use dissicert::certifier::ConditionRecord;
use dissicert::{Certificate64, CertificateKind, QuadraticStorage, SteadyState, SymmetricOperator};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StrictlyDissipative,
    StrictlyPreDissipative,
    FormInequalityFailed,
    AlgebraicConditionFailed,
    NotCoercive,
    NotSteadyState,
    NotDetectable,
    VerificationFailed,
}

impl Verdict {
    pub fn is_certified(self) -> bool {
        matches!(self, Verdict::StrictlyDissipative | Verdict::StrictlyPreDissipative)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::StrictlyDissipative => "strictly-dissipative",
            Verdict::StrictlyPreDissipative => "strictly-pre-dissipative",
            Verdict::FormInequalityFailed => "form-inequality-failed",
            Verdict::AlgebraicConditionFailed => "algebraic-condition-failed",
            Verdict::NotCoercive => "not-coercive",
            Verdict::NotSteadyState => "not-steady-state",
            Verdict::NotDetectable => "not-detectable",
            Verdict::VerificationFailed => "verification-failed",
        }
    }
}

/// Non-finite numbers are written as `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn entries(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value: finite(value),
            detail: detail.into(),
        }
    }
}

impl From<&ConditionRecord> for Check {
    fn from(r: &ConditionRecord) -> Self {
        Check::new(r.name, r.passed, r.value, r.detail.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatePayload {
    pub bounded_below: bool,
    pub gamma: f64,
    pub eta: f64,
    pub m: f64,
    pub alpha_c: f64,
    /// `null` encodes `c_K = ∞`.
    pub c_k: Option<f64>,
    /// Final storage operator `γηP`.
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub x_e: Vec<f64>,
    pub u_e: Vec<f64>,
    pub lower_bound: Option<f64>,
}

impl CertificatePayload {
    pub fn from_certificate(cert: &Certificate64) -> Self {
        Self {
            bounded_below: cert.is_strictly_dissipative(),
            gamma: cert.gamma,
            eta: cert.eta,
            m: cert.m,
            alpha_c: cert.alpha_c,
            c_k: cert.c_k,
            p: rows(cert.storage.p.matrix()),
            w: entries(&cert.storage.w),
            w_tilde: entries(&cert.w_tilde),
            x_e: entries(&cert.ss.x_e),
            u_e: entries(&cert.ss.u_e),
            lower_bound: cert.lower_bound,
        }
    }

    /// Rebuilds the certificate; the checklist is not carried over.
    pub fn to_certificate(&self, n: usize, m: usize) -> Result<Certificate64, CliError> {
        let dim = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(CliError::Dimension(format!("certificate {what} has size {got}, expected {want}")))
            }
        };
        dim("P", self.p.len(), n)?;
        for row in &self.p {
            dim("P row", row.len(), n)?;
        }
        dim("w", self.w.len(), n)?;
        dim("w_tilde", self.w_tilde.len(), n)?;
        dim("x_e", self.x_e.len(), n)?;
        dim("u_e", self.u_e.len(), m)?;
        let p = DMatrix::from_row_iterator(n, n, self.p.iter().flatten().copied());
        Ok(Certificate64 {
            kind: if self.bounded_below {
                CertificateKind::StrictDissipative
            } else {
                CertificateKind::StrictPreDissipative
            },
            ss: SteadyState::new(DVector::from_column_slice(&self.x_e), DVector::from_column_slice(&self.u_e)),
            storage: QuadraticStorage::new(SymmetricOperator::symmetrize(p), DVector::from_column_slice(&self.w)),
            gamma: self.gamma,
            eta: self.eta,
            m: self.m,
            alpha_c: self.alpha_c,
            w_tilde: DVector::from_column_slice(&self.w_tilde),
            c_k: self.c_k,
            lower_bound: self.lower_bound,
            diagnostics: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Validation {
    pub scenarios: usize,
    pub seed: u64,
    pub quad_tol: f64,
    pub violations: usize,
    /// Smallest `rhs − lhs` over all scenarios.
    pub worst_margin: Option<f64>,
    /// Scenario index attaining the worst margin.
    pub worst_scenario: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertReport {
    pub schema_version: u32,
    pub command: String,
    pub problem: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub p_source: Option<String>,
    pub certificate: Option<CertificatePayload>,
    pub checklist: Vec<Check>,
    pub validation: Option<Validation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateReport {
    pub schema_version: u32,
    pub command: String,
    pub problem: String,
    pub status: String,
    pub exit_code: i32,
    pub x_e: Option<Vec<f64>>,
    pub u_e: Option<Vec<f64>>,
    pub optimal_cost: Option<f64>,
    pub stationarity_residual: Option<f64>,
    pub kernel_dim: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchurSummary {
    pub eps: f64,
    pub eta: f64,
    pub kappa: f64,
    pub split_dims: (usize, usize),
    pub t11_margin: f64,
    pub schur_margin: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectReport {
    pub schema_version: u32,
    pub command: String,
    pub problem: String,
    pub detectable: bool,
    pub exit_code: i32,
    /// Unobservable eigenvalues as `[re, im]`.
    pub unobservable_modes: Vec<[f64; 2]>,
    #[serde(rename = "F")]
    pub f: Option<Vec<Vec<f64>>>,
    pub closed_loop_abscissa: Option<f64>,
    #[serde(rename = "P")]
    pub p: Option<Vec<Vec<f64>>>,
    pub eta: Option<f64>,
    pub m: Option<f64>,
    pub halvings: Option<usize>,
    pub schur: Option<SchurSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: String,
    pub problem: String,
    pub certificate_source: String,
    pub holds: bool,
    pub exit_code: i32,
    pub validation: Option<Validation>,
    pub error: Option<String>,
}

pub fn to_machine<S: Serialize>(report: &S) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
}

// Adding +0.0 turns −0 into +0.
fn fmt_num(x: f64) -> String {
    format!("{:.6e}", x + 0.0)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), fmt_num)
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_rows(m: &[Vec<f64>], indent: &str, out: &mut String) {
    for row in m {
        let _ = writeln!(out, "{indent}{}", fmt_vec(row));
    }
}

fn fmt_validation(v: &Validation, out: &mut String) {
    let _ = writeln!(
        out,
        "validation: {} scenarios (seed {}, quad_tol {:e}), {} violations, worst margin {}",
        v.scenarios,
        v.seed,
        v.quad_tol,
        v.violations,
        fmt_opt(v.worst_margin)
    );
}

impl CertReport {
    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem: {}", self.problem);
        let _ = writeln!(out, "verdict: {} (exit {})", self.verdict.as_str(), self.exit_code);
        if let Some(src) = &self.p_source {
            let _ = writeln!(out, "P source: {src}");
        }
        if let Some(err) = &self.error {
            let _ = writeln!(out, "reason: {err}");
        }
        if let Some(c) = &self.certificate {
            let _ = writeln!(out, "certificate:");
            let _ = writeln!(out, "  gamma        {:.6e}", c.gamma);
            let _ = writeln!(out, "  eta          {:.6e}", c.eta);
            let _ = writeln!(out, "  m            {:.6e}", c.m);
            let _ = writeln!(out, "  alpha_c      {:.6e}", c.alpha_c);
            let _ = writeln!(out, "  c_K          {}", c.c_k.map_or("inf".into(), |x| format!("{x:.6e}")));
            let _ = writeln!(out, "  lower bound  {}", fmt_opt(c.lower_bound));
            let _ = writeln!(out, "  x_e          {}", fmt_vec(&c.x_e));
            let _ = writeln!(out, "  u_e          {}", fmt_vec(&c.u_e));
            let _ = writeln!(out, "  w            {}", fmt_vec(&c.w));
            let _ = writeln!(out, "  w_tilde      {}", fmt_vec(&c.w_tilde));
            let _ = writeln!(out, "  P");
            fmt_rows(&c.p, "    ", &mut out);
        }
        if !self.checklist.is_empty() {
            let _ = writeln!(out, "checklist:");
            for c in &self.checklist {
                let mark = if c.passed { "pass" } else { "FAIL" };
                let _ = writeln!(out, "  [{mark}] {:<20} {:>14}  {}", c.name, fmt_opt(c.value), c.detail);
            }
        }
        if let Some(v) = &self.validation {
            fmt_validation(v, &mut out);
        }
        out
    }
}

impl SteadyStateReport {
    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem: {}", self.problem);
        let _ = writeln!(out, "status: {} (exit {})", self.status, self.exit_code);
        if let Some(err) = &self.error {
            let _ = writeln!(out, "reason: {err}");
        }
        if let (Some(x), Some(u)) = (&self.x_e, &self.u_e) {
            let _ = writeln!(out, "x_e: {}", fmt_vec(x));
            let _ = writeln!(out, "u_e: {}", fmt_vec(u));
        }
        let _ = writeln!(out, "optimal cost: {}", fmt_opt(self.optimal_cost));
        let _ = writeln!(out, "stationarity residual: {}", fmt_opt(self.stationarity_residual));
        let _ = writeln!(out, "dim ker[A B]: {}", self.kernel_dim);
        out
    }
}

impl DetectReport {
    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem: {}", self.problem);
        let _ = writeln!(out, "detectable: {} (exit {})", self.detectable, self.exit_code);
        if let Some(err) = &self.error {
            let _ = writeln!(out, "reason: {err}");
        }
        let modes: Vec<String> = self
            .unobservable_modes
            .iter()
            .map(|[re, im]| format!("{re:.4e}{im:+.4e}i"))
            .collect();
        let _ = writeln!(out, "unobservable modes: [{}]", modes.join(", "));
        if let Some(f) = &self.f {
            let _ = writeln!(out, "F (spectral abscissa of A + FC: {})", fmt_opt(self.closed_loop_abscissa));
            fmt_rows(f, "  ", &mut out);
        }
        if let Some(p) = &self.p {
            let _ = writeln!(out, "P");
            fmt_rows(p, "  ", &mut out);
            let _ = writeln!(out, "eta: {}", fmt_opt(self.eta));
            let _ = writeln!(out, "m: {}", fmt_opt(self.m));
            let _ = writeln!(out, "halvings: {}", self.halvings.unwrap_or(0));
        }
        match &self.schur {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "Schur certificate: split {}+{}, eps {:.3e}, kappa {:.3e}, T11 margin {:.3e}, Schur margin {:.3e}, positive {}",
                    s.split_dims.0, s.split_dims.1, s.eps, s.kappa, s.t11_margin, s.schur_margin, s.positive
                );
            }
            None if self.p.is_some() => {
                let _ = writeln!(out, "Schur certificate: not applicable (one block is trivial)");
            }
            None => {}
        }
        out
    }
}

impl SimulateReport {
    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem: {}", self.problem);
        let _ = writeln!(out, "certificate: {}", self.certificate_source);
        let _ = writeln!(out, "integral inequality holds: {} (exit {})", self.holds, self.exit_code);
        if let Some(err) = &self.error {
            let _ = writeln!(out, "reason: {err}");
        }
        if let Some(v) = &self.validation {
            fmt_validation(v, &mut out);
        }
        out
    }
}
