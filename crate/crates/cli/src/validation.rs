//! Seeded trajectory scenarios for checking a certificate along solutions.

use dissicert::generate::gaussian_vector;
use dissicert::trajectory::{integral_dissipation_check, TrajectoryError};
use dissicert::{Certificate64, ControlSignal, Ocp64};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::Validation;

/// Largest distance of the initial state from `x_e`.
pub const MAX_RADIUS: f64 = 10.0;
/// Largest horizon `t₂`.
pub const MAX_HORIZON: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub x0: DVector<f64>,
    pub u: ControlSignal<f64>,
    pub t1: f64,
    pub t2: f64,
}

/// Draws `x₀` with `‖x₀ − x_e‖ ≤ 10`, a piecewise-constant input with one to
/// four pieces around `u_e`, and `0 ≤ t₁ < t₂ ≤ 5`.
pub fn draw_scenario<R: Rng>(rng: &mut R, cert: &Certificate64) -> Scenario {
    let n = cert.ss.x_e.len();
    let m = cert.ss.u_e.len();
    let dir: DVector<f64> = gaussian_vector(rng, n);
    let radius = rng.random_range(0.0..=MAX_RADIUS);
    let x0 = &cert.ss.x_e + dir.normalize() * radius;

    let t2 = rng.random_range(0.1..=MAX_HORIZON);
    let pieces: usize = rng.random_range(1..=4);
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.0..t2)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut breaks = vec![0.0];
    breaks.extend(cuts.into_iter().filter(|&c| c > 0.0));
    breaks.dedup();
    breaks.push(t2);
    let values = (1..breaks.len())
        .map(|_| {
            let scale = rng.random_range(0.0..3.0);
            &cert.ss.u_e + gaussian_vector::<f64, _>(rng, m) * scale
        })
        .collect();
    let u = ControlSignal::new(breaks, values).expect("breakpoints are increasing");
    let t1 = rng.random_range(0.0..t2 * 0.5);
    Scenario { x0, u, t1, t2 }
}

/// Runs `scenarios` seeded scenarios in order and reports the worst margin.
pub fn validate_certificate(
    ocp: &Ocp64,
    cert: &Certificate64,
    scenarios: usize,
    seed: u64,
    quad_tol: f64,
) -> Result<Validation, TrajectoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..scenarios {
        let s = draw_scenario(&mut rng, cert);
        let check = integral_dissipation_check(ocp, cert, &s.x0, &s.u, s.t1, s.t2, quad_tol)?;
        if !check.holds {
            log::warn!(
                "scenario {i}: V(x(t2)) - V(x(t1)) = {:e} exceeds {:e} by more than {:e}",
                check.lhs,
                check.rhs,
                check.slack
            );
            violations += 1;
        }
        if worst.is_none_or(|(_, w)| check.margin < w) {
            worst = Some((i, check.margin));
        }
    }
    Ok(Validation {
        scenarios,
        seed,
        quad_tol,
        violations,
        worst_margin: worst.map(|(_, w)| w),
        worst_scenario: worst.map(|(i, _)| i),
    })
}
