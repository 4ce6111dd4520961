use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dissicert_cli::report::{CertReport, DetectReport, SimulateReport, SteadyStateReport};
use dissicert_cli::ProblemFile;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

const SCALAR: &str = r#"{
  "name": "scalar",
  "dims": {"n": 1, "m": 1, "p": 1, "q": 1},
  "A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "K": [[1.0]],
  "z": [-1.0], "v": [0.0],
  "P": [[0.5]]
}"#;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("dissicert-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.0.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn dissicert(args: &[&str], problem: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dissicert"));
    cmd.args(args);
    if let Some(p) = problem {
        cmd.arg("--problem").arg(p);
    }
    cmd.output().unwrap()
}

#[test]
fn certify_scalar_machine_report() {
    let dir = Scratch::new("scalar");
    let problem = dir.file("scalar.json", SCALAR);
    let out = dissicert(&["certify", "--output", "machine"], Some(&problem));
    assert_eq!(out.status.code(), Some(0));
    let report: CertReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.verdict.as_str(), "strictly-dissipative");
    let cert = report.certificate.unwrap();
    assert!((cert.alpha_c - 0.9375).abs() < 1e-9);
    assert_eq!(report.p_source.as_deref(), Some("file"));
}

#[test]
fn human_output_names_the_verdict() {
    let dir = Scratch::new("human");
    let problem = dir.file("scalar.json", SCALAR);
    let out = dissicert(&["certify"], Some(&problem));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict: strictly-dissipative"));
    assert!(text.contains("[pass] reduced-inequality"));
}

#[test]
fn algebraic_failure_exits_two() {
    let dir = Scratch::new("alg");
    let problem = dir.file(
        "pinned.json",
        r#"{"name": "pinned", "dims": {"n": 1, "m": 1, "p": 1, "q": 1},
            "A": [[0.0]], "B": [[0.0]], "C": [[1.0]], "K": [[1.0]],
            "z": [1.0], "v": [0.0], "P": [[1.0]],
            "steady_state": {"x_e": [0.0], "u_e": [0.0]}}"#,
    );
    let out = dissicert(&["certify", "--output", "machine"], Some(&problem));
    assert_eq!(out.status.code(), Some(2));
    let report: CertReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.verdict.as_str(), "algebraic-condition-failed");
    assert_eq!(report.exit_code, 2);
}

#[test]
fn usage_and_parse_errors_exit_one() {
    let dir = Scratch::new("usage");
    let broken = dir.file("broken.json", "{\"name\": \"x\",\n \"dims\": {\"n\": 1}}");
    let out = dissicert(&["certify"], Some(&broken));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let no_p = dir.file("nop.json", &SCALAR.replace(",\n  \"P\": [[0.5]]", ""));
    assert_eq!(dissicert(&["certify"], Some(&no_p)).status.code(), Some(1));

    let scalar = dir.file("scalar.json", SCALAR);
    let typo = dir.file("tol.json", r#"{"quad_tl": 1e-10}"#);
    let out = dissicert(&["certify", "--tol-overrides", typo.to_str().unwrap()], Some(&scalar));
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(dissicert(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(dissicert(&["certify"], None).status.code(), Some(1));
    assert_eq!(dissicert(&["--help"], None).status.code(), Some(0));
}

#[test]
fn tolerance_overrides_apply() {
    let dir = Scratch::new("tol");
    let scalar = dir.file("scalar.json", SCALAR);
    let tol = dir.file("tol.json", r#"{"quad_tol": 1e-11}"#);
    let out = dissicert(
        &["certify", "--validate", "3", "--output", "machine", "--tol-overrides", tol.to_str().unwrap()],
        Some(&scalar),
    );
    assert_eq!(out.status.code(), Some(0));
    let report: CertReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.validation.unwrap().quad_tol, 1e-11);
}

#[test]
fn steady_state_command() {
    let dir = Scratch::new("ss");
    let problem = dir.file("scalar.json", SCALAR);
    let out = dissicert(&["steady-state", "--output", "machine"], Some(&problem));
    assert_eq!(out.status.code(), Some(0));
    let r: SteadyStateReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r.x_e.unwrap()[0] - 0.5).abs() < 1e-12);
    assert!((r.u_e.unwrap()[0] - 0.5).abs() < 1e-12);
    assert!((r.optimal_cost.unwrap() + 0.5).abs() < 1e-12);
}

#[test]
fn detect_command_on_heat_instance() {
    let dir = Scratch::new("detect");
    let problem = dir.0.join("heat.json");
    let gen = dissicert(
        &["generate-heat", "--n-modes", "5", "--observe", "first_2", "--control", "first_2", "--out", problem.to_str().unwrap()],
        None,
    );
    assert_eq!(gen.status.code(), Some(0));
    let out = dissicert(&["detect", "--output", "machine"], Some(&problem));
    assert_eq!(out.status.code(), Some(0));
    let r: DetectReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r.detectable);
    assert_eq!(r.unobservable_modes.len(), 3);
    assert!(r.m.unwrap() > 0.0);
    assert!(r.closed_loop_abscissa.unwrap() < 0.0);
}

#[test]
fn generate_heat_to_stdout_matches_formula() {
    let out = dissicert(&["generate-heat", "--n-modes", "2", "--z=-1,0.5", "--v", "0.25"], None);
    assert_eq!(out.status.code(), Some(0));
    let file = ProblemFile::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    assert_eq!(file.a, vec![vec![-pi2, 0.0], vec![0.0, -4.0 * pi2]]);
    assert_eq!(file.b, vec![vec![1.0], vec![0.0]]);
    assert_eq!(file.z, vec![-1.0, 0.5]);
    assert_eq!(file.v, vec![0.25]);
    assert_eq!(dissicert(&["generate-heat", "--n-modes", "0"], None).status.code(), Some(1));
}

#[test]
fn simulate_with_saved_certificate() {
    let dir = Scratch::new("sim");
    let problem = dir.file("scalar.json", SCALAR);
    let cert = dissicert(&["certify", "--output", "machine"], Some(&problem));
    let cert_path = dir.file("cert.json", std::str::from_utf8(&cert.stdout).unwrap());
    let out = dissicert(
        &["simulate", "--validate", "15", "--output", "machine", "--certificate", cert_path.to_str().unwrap()],
        Some(&problem),
    );
    assert_eq!(out.status.code(), Some(0));
    let r: SimulateReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r.holds);
    assert_eq!(r.validation.unwrap().scenarios, 15);

    // A tampered certificate with a much larger dissipation rate fails.
    let mut report: CertReport = serde_json::from_slice(&cert.stdout).unwrap();
    report.certificate.as_mut().unwrap().alpha_c = 50.0;
    let bad = dir.file("bad.json", &serde_json::to_string(&report).unwrap());
    let out = dissicert(&["simulate", "--certificate", bad.to_str().unwrap()], Some(&problem));
    assert_eq!(out.status.code(), Some(2));
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        rng_seed: RngSeed::Fixed(0x5eed_0c11),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn decimal() -> impl Strategy<Value = String> {
    // At most 17 significant digits, across many magnitudes.
    (any::<i64>(), 1usize..=17, -30i32..30).prop_map(|(mantissa, digits, exp)| {
        let m = mantissa.unsigned_abs() % 10u64.pow(digits.min(18) as u32);
        let sign = if mantissa < 0 { "-" } else { "" };
        format!("{sign}{m}e{exp}")
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn problem_files_round_trip_bit_exactly(
        n in 1usize..4,
        m in 1usize..3,
        entries in proptest::collection::vec(decimal(), 64),
    ) {
        let mut it = entries.iter().cycle();
        let mut mat = |r: usize, c: usize| -> String {
            let rows: Vec<String> = (0..r)
                .map(|_| format!("[{}]", (0..c).map(|_| it.next().unwrap().clone()).collect::<Vec<_>>().join(", ")))
                .collect();
            format!("[{}]", rows.join(", "))
        };
        let a = mat(n, n);
        let b = mat(n, m);
        let c = mat(n, n);
        let k = mat(m, m);
        let z = mat(1, n);
        let v = mat(1, m);
        let text = format!(
            r#"{{"name": "rt", "dims": {{"n": {n}, "m": {m}, "p": {n}, "q": {m}}},
                "A": {a}, "B": {b}, "C": {c}, "K": {k}, "z": {z_inner}, "v": {v_inner}}}"#,
            z_inner = &z[1..z.len() - 1],
            v_inner = &v[1..v.len() - 1],
        );
        let parsed = ProblemFile::parse(&text).unwrap();
        // Each literal must parse to the same bits as Rust's own parser.
        let flat: Vec<f64> = parsed.a.iter().flatten().copied().collect();
        let mut lit = entries.iter().cycle();
        for x in &flat {
            prop_assert_eq!(x.to_bits(), lit.next().unwrap().parse::<f64>().unwrap().to_bits());
        }
        let again = ProblemFile::parse(&parsed.to_json()).unwrap();
        let bits = |f: &ProblemFile| -> Vec<u64> {
            [&f.a, &f.b, &f.c, &f.k]
                .iter()
                .flat_map(|m| m.iter().flatten().map(|x| x.to_bits()))
                .chain(f.z.iter().chain(&f.v).map(|x| x.to_bits()))
                .collect()
        };
        prop_assert_eq!(bits(&parsed), bits(&again));
        prop_assert_eq!(parsed, again);
    }
}
