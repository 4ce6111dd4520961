//! Command implementations. Each returns a report carrying its exit code;
//! usage and parse problems surface as [`CliError`].

use std::path::Path;

use dissicert::certifier::{certify_at, CertifyError, CertifyOptions};
use dissicert::detectability::{hautus_detectable, spectral_abscissa, DetectabilityError};
use dissicert::steady_state::{kernel_basis, SteadyStateError};
use dissicert::{solve_steady_state, storage_from_detectability, Certificate64, SteadyState};

use crate::error::CliError;
use crate::problem::{apply_overrides, Problem, ProblemFile};
use crate::report::{
    entries, finite, rows, CertReport, CertificatePayload, Check, DetectReport, SchurSummary, SimulateReport,
    SteadyStateReport, Verdict, SCHEMA_VERSION,
};
use crate::validation::validate_certificate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

pub const DEFAULT_SEED: u64 = 42;

/// Reads a problem file and applies an optional tolerance override file on
/// top of the tolerances it declares.
pub fn load_problem(path: &Path, overrides: Option<&Path>) -> Result<Problem, CliError> {
    let mut problem = ProblemFile::read(path)?.validate()?;
    if let Some(o) = overrides {
        let text = std::fs::read_to_string(o).map_err(|e| CliError::io(o, e))?;
        problem.tolerances = apply_overrides(problem.tolerances, &text)?;
    }
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifyFlags {
    pub from_detectability: bool,
    pub require_bounded: bool,
    pub validate: usize,
    pub seed: u64,
}

impl Default for CertifyFlags {
    fn default() -> Self {
        Self {
            from_detectability: false,
            require_bounded: false,
            validate: 0,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub report: CertReport,
    pub certificate: Option<Certificate64>,
}

struct Refusal {
    verdict: Verdict,
    reason: String,
}

fn refuse(verdict: Verdict, reason: impl ToString) -> Refusal {
    Refusal {
        verdict,
        reason: reason.to_string(),
    }
}

fn certify_error_verdict(err: &CertifyError) -> Verdict {
    match err {
        CertifyError::FormInequalityFailed { .. } => Verdict::FormInequalityFailed,
        CertifyError::AlgebraicConditionFailed { .. } => Verdict::AlgebraicConditionFailed,
        CertifyError::CompatibilityFailed { .. } => Verdict::NotCoercive,
        CertifyError::NotSteadyState { .. } => Verdict::NotSteadyState,
        CertifyError::SteadyState(SteadyStateError::NotCoercive { .. }) => Verdict::NotCoercive,
        _ => Verdict::VerificationFailed,
    }
}

fn acquire_steady_state(problem: &Problem, checklist: &mut Vec<Check>) -> Result<SteadyState<f64>, Refusal> {
    if let Some(ss) = &problem.steady_state {
        checklist.push(Check::new("steady-state-source", true, 0.0, "supplied in the problem file"));
        return Ok(ss.clone());
    }
    let ocp = &problem.ocp;
    match solve_steady_state(ocp, &problem.tolerances) {
        Ok(sol) => {
            checklist.push(Check::new(
                "optimal-steady-state",
                true,
                sol.stationarity_residual,
                "stationarity residual of the optimal steady state",
            ));
            Ok(sol.ss)
        }
        Err(SteadyStateError::EmptyKernel) => {
            checklist.push(Check::new("optimal-steady-state", true, 0.0, "ker[A B] = {0}: origin"));
            Ok(SteadyState::origin(ocp.n(), ocp.m()))
        }
        Err(e @ SteadyStateError::NotCoercive { min_eig }) => {
            checklist.push(Check::new("optimal-steady-state", false, min_eig, "reduced operator not coercive"));
            Err(refuse(Verdict::NotCoercive, e))
        }
        Err(e) => {
            checklist.push(Check::new("optimal-steady-state", false, f64::NAN, e.to_string()));
            Err(refuse(Verdict::VerificationFailed, e))
        }
    }
}

fn run_certify(
    problem: &Problem,
    flags: &CertifyFlags,
    checklist: &mut Vec<Check>,
    p_source: &mut Option<String>,
) -> Result<Certificate64, Refusal> {
    let ocp = &problem.ocp;
    let tol = &problem.tolerances;

    let compat = ocp
        .compatibility_constant(tol)
        .map_err(|e| refuse(Verdict::VerificationFailed, e))?;
    let c_k = compat.c_k.unwrap_or(f64::INFINITY);
    if !compat.holds {
        checklist.push(Check::new("compatibility", false, c_k, "c_K in ‖Ku‖ ≥ c_K‖Bu‖"));
        return Err(refuse(Verdict::NotCoercive, CertifyError::CompatibilityFailed { c_k }));
    }

    let ss = acquire_steady_state(problem, checklist)?;

    let p = if flags.from_detectability {
        match storage_from_detectability(ocp.a(), ocp.c(), tol) {
            Ok(s) => {
                checklist.push(Check::new(
                    "detectability-storage",
                    true,
                    s.m,
                    format!("form margin of the constructed storage ({} halvings)", s.halvings),
                ));
                *p_source = Some("detectability".into());
                s.p.scaled(s.eta)
            }
            Err(e) => {
                checklist.push(Check::new("detectability-storage", false, f64::NAN, e.to_string()));
                let verdict = match e {
                    DetectabilityError::NotDetectable { .. } => Verdict::NotDetectable,
                    _ => Verdict::VerificationFailed,
                };
                return Err(refuse(verdict, e));
            }
        }
    } else {
        *p_source = Some("file".into());
        problem.p.clone().expect("checked by cmd_certify")
    };

    let opts = CertifyOptions {
        tol: *tol,
        seed: flags.seed,
        ..CertifyOptions::default()
    };
    certify_at(ocp, &ss, &p, &opts).map_err(|e| {
        let verdict = certify_error_verdict(&e);
        checklist.push(Check::new(verdict.as_str(), false, f64::NAN, e.to_string()));
        refuse(verdict, e)
    })
}

/// Compatibility, steady state, storage candidate, certification and the
/// optional trajectory validation, in that order.
pub fn cmd_certify(problem: &Problem, flags: &CertifyFlags) -> Result<CertifyOutcome, CliError> {
    if !flags.from_detectability && problem.p.is_none() {
        return Err(CliError::Usage(
            "no storage candidate: supply P in the problem file or pass --from-detectability".into(),
        ));
    }
    let mut checklist = Vec::new();
    let mut p_source = None;
    let mut report = CertReport {
        schema_version: SCHEMA_VERSION,
        command: "certify".into(),
        problem: problem.name.clone(),
        verdict: Verdict::VerificationFailed,
        exit_code: EXIT_FAILED,
        p_source: None,
        certificate: None,
        checklist: Vec::new(),
        validation: None,
        error: None,
    };
    let outcome = run_certify(problem, flags, &mut checklist, &mut p_source);
    report.p_source = p_source;
    let certificate = match outcome {
        Err(r) => {
            log::info!("certification refused: {}", r.reason);
            report.verdict = r.verdict;
            report.error = Some(r.reason);
            None
        }
        Ok(cert) => {
            checklist.extend(cert.diagnostics.iter().map(Check::from));
            report.certificate = Some(CertificatePayload::from_certificate(&cert));
            if cert.is_strictly_dissipative() {
                report.verdict = Verdict::StrictlyDissipative;
                report.exit_code = EXIT_OK;
            } else {
                report.verdict = Verdict::StrictlyPreDissipative;
                if flags.require_bounded {
                    report.error = Some("storage is not bounded from below and --require-bounded is set".into());
                } else {
                    report.exit_code = EXIT_OK;
                }
            }
            if flags.validate > 0 {
                match validate_certificate(&problem.ocp, &cert, flags.validate, flags.seed, problem.tolerances.quad_tol) {
                    Ok(v) => {
                        checklist.push(Check::new(
                            "trajectory-validation",
                            v.violations == 0,
                            v.worst_margin.unwrap_or(f64::NAN),
                            format!("{} of {} scenarios violated", v.violations, v.scenarios),
                        ));
                        if v.violations > 0 {
                            report.verdict = Verdict::VerificationFailed;
                            report.exit_code = EXIT_FAILED;
                            report.error = Some(format!("{} trajectory scenarios violated", v.violations));
                        }
                        report.validation = Some(v);
                    }
                    Err(e) => {
                        checklist.push(Check::new("trajectory-validation", false, f64::NAN, e.to_string()));
                        report.verdict = Verdict::VerificationFailed;
                        report.exit_code = EXIT_FAILED;
                        report.error = Some(e.to_string());
                    }
                }
            }
            Some(cert)
        }
    };
    report.checklist = checklist;
    Ok(CertifyOutcome { report, certificate })
}

pub fn cmd_steady_state(problem: &Problem) -> SteadyStateReport {
    let ocp = &problem.ocp;
    let tol = &problem.tolerances;
    let mut report = SteadyStateReport {
        schema_version: SCHEMA_VERSION,
        command: "steady-state".into(),
        problem: problem.name.clone(),
        status: String::new(),
        exit_code: EXIT_OK,
        x_e: None,
        u_e: None,
        optimal_cost: None,
        stationarity_residual: None,
        kernel_dim: kernel_basis(ocp, tol).dim(),
        error: None,
    };
    match solve_steady_state(ocp, tol) {
        Ok(sol) => {
            report.status = "optimal".into();
            report.x_e = Some(entries(&sol.ss.x_e));
            report.u_e = Some(entries(&sol.ss.u_e));
            report.optimal_cost = finite(sol.optimal_cost);
            report.stationarity_residual = finite(sol.stationarity_residual);
        }
        Err(SteadyStateError::EmptyKernel) => {
            let ss = SteadyState::origin(ocp.n(), ocp.m());
            report.status = "origin-only".into();
            report.optimal_cost = ocp.running_cost(&ss.x_e, &ss.u_e).ok();
            report.x_e = Some(entries(&ss.x_e));
            report.u_e = Some(entries(&ss.u_e));
            report.stationarity_residual = Some(0.0);
        }
        Err(e) => {
            report.status = match e {
                SteadyStateError::NotCoercive { .. } => "not-coercive",
                _ => "failed",
            }
            .into();
            report.exit_code = EXIT_FAILED;
            report.error = Some(e.to_string());
        }
    }
    report
}

pub fn cmd_detect(problem: &Problem) -> DetectReport {
    let ocp = &problem.ocp;
    let tol = &problem.tolerances;
    let mut report = DetectReport {
        schema_version: SCHEMA_VERSION,
        command: "detect".into(),
        problem: problem.name.clone(),
        detectable: false,
        exit_code: EXIT_FAILED,
        unobservable_modes: Vec::new(),
        f: None,
        closed_loop_abscissa: None,
        p: None,
        eta: None,
        m: None,
        halvings: None,
        schur: None,
        error: None,
    };
    match hautus_detectable(ocp.a(), ocp.c(), tol) {
        Ok(h) => {
            report.unobservable_modes = h.unobservable_modes.iter().map(|z| [z.re, z.im]).collect();
        }
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    }
    match storage_from_detectability(ocp.a(), ocp.c(), tol) {
        Ok(s) => {
            report.detectable = true;
            report.exit_code = EXIT_OK;
            report.closed_loop_abscissa = spectral_abscissa(&(ocp.a() + &s.detector.f * ocp.c())).ok();
            report.f = Some(rows(&s.detector.f));
            report.p = Some(rows(s.p.matrix()));
            report.eta = Some(s.eta);
            report.m = Some(s.m);
            report.halvings = Some(s.halvings);
            report.schur = s.schur.as_ref().map(|c| SchurSummary {
                eps: c.eps,
                eta: c.eta,
                kappa: c.kappa,
                split_dims: c.split_dims,
                t11_margin: c.t11_margin,
                schur_margin: c.schur_margin,
                positive: c.positive,
            });
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulateFlags {
    pub from_detectability: bool,
    pub scenarios: usize,
    pub seed: u64,
}

/// Checks the integral dissipation inequality on seeded scenarios, for a
/// certificate read from a previous `certify` report or computed afresh.
pub fn cmd_simulate(
    problem: &Problem,
    certificate: Option<&Path>,
    flags: &SimulateFlags,
) -> Result<SimulateReport, CliError> {
    let ocp = &problem.ocp;
    let mut report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        problem: problem.name.clone(),
        certificate_source: String::new(),
        holds: false,
        exit_code: EXIT_FAILED,
        validation: None,
        error: None,
    };
    let cert = match certificate {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let prior: CertReport = serde_json::from_str(&text).map_err(CliError::from_json)?;
            let payload = prior
                .certificate
                .ok_or_else(|| CliError::Usage(format!("{} carries no certificate", path.display())))?;
            report.certificate_source = path.display().to_string();
            payload.to_certificate(ocp.n(), ocp.m())?
        }
        None => {
            let certify = CertifyFlags {
                from_detectability: flags.from_detectability,
                seed: flags.seed,
                ..CertifyFlags::default()
            };
            let outcome = cmd_certify(problem, &certify)?;
            report.certificate_source = format!("certify ({})", outcome.report.verdict.as_str());
            match outcome.certificate {
                Some(c) => c,
                None => {
                    report.error = outcome.report.error;
                    return Ok(report);
                }
            }
        }
    };
    match validate_certificate(ocp, &cert, flags.scenarios, flags.seed, problem.tolerances.quad_tol) {
        Ok(v) => {
            report.holds = v.violations == 0;
            if report.holds {
                report.exit_code = EXIT_OK;
            }
            report.validation = Some(v);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report)
}
